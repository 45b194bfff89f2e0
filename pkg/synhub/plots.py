import json
import os
from typing import Any, Dict, List

from .config import neuron_names
from .summary import AP_KINDS, read_csv

DECISION_COLORS = {"LTP": "red", "LTD": "blue", "NoChange": "black"}


def _load(run_dir: str):
    with open(os.path.join(run_dir, "config.json"), "r", encoding="utf-8") as f:
        cfg = json.load(f)
    return cfg, read_csv(os.path.join(run_dir, "events.csv")), read_csv(os.path.join(run_dir, "plasticity.csv"))


def _phase_lines(ax, cfg: Dict[str, Any]) -> None:
    t = 0.0
    for p in cfg["schedule"]["phases"]:
        t += float(p["duration_s"])
        ax.axvline(t, color="0.7", linewidth=0.8, linestyle="--")


def make_figures(run_dir: str, outdir: str) -> List[str]:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cfg, events, plast = _load(run_dir)
    os.makedirs(outdir, exist_ok=True)
    names = neuron_names(cfg)
    written: List[str] = []

    fig1 = plt.figure(figsize=(10, 3))
    ax1 = fig1.add_subplot(111)
    order = sorted(names)
    for row, nid in enumerate(order):
        xs = [float(e["abs_time_ms"]) / 1000.0 for e in events
              if int(e["neuron_id"]) == nid and (e["kind"] in AP_KINDS or e["kind"] == "unused")]
        ax1.plot(xs, [row] * len(xs), "|", markersize=8)
    ax1.set_yticks(range(len(order)))
    ax1.set_yticklabels([names[n] for n in order])
    ax1.set_xlabel("time (s)")
    _phase_lines(ax1, cfg)
    ax1.set_title("Spike raster (hub axis)")
    fig1.tight_layout()
    p1 = os.path.join(outdir, "raster.svg")
    fig1.savefig(p1)
    plt.close(fig1)
    written.append(p1)

    fig2 = plt.figure(figsize=(10, 3))
    ax2 = fig2.add_subplot(111)
    for sid in sorted({p["synapse_id"] for p in plast}):
        rows = [p for p in plast if p["synapse_id"] == sid]
        xs = [float(p["abs_time_ms"]) / 1000.0 for p in rows]
        ys = [float(p["weight_after"]) for p in rows]
        ax2.plot(xs, ys, color="0.8", linewidth=0.8, label=sid)
        ax2.scatter(xs, ys, s=4, c=[DECISION_COLORS[p["decision"]] for p in rows])
    ax2.set_ylim(-0.02, 1.02)
    ax2.set_xlabel("time (s)")
    ax2.set_ylabel("weight")
    _phase_lines(ax2, cfg)
    ax2.set_title("Memristor weights")
    ax2.legend()
    fig2.tight_layout()
    p2 = os.path.join(outdir, "weights.svg")
    fig2.savefig(p2)
    plt.close(fig2)
    written.append(p2)
    return written
