"""
Per-phase statistics and acceptance checks, recomputed from the run's CSVs.
"""
from __future__ import annotations

import csv
import json
import os
from typing import Any, Dict, List, Mapping, Optional

from .artificial import PhaseSchedule
from .config import neuron_ids, neuron_names
from .contract_ids import SUMMARY_SCHEMA_V1
from .errors import ConfigError
from .plasticity import PlasticityDecision, bcm_decide, thresholds_from_config
from .util import write_json

DECISIONS = [d.value for d in PlasticityDecision]
AP_KINDS = ("forced_ap", "spontaneous_ap")
FORWARD_FRACTION_MIN = 0.9
MODULATION_MIN = 1.2
RECOVERY_TOL = 0.2


def _mode(values: List[str]) -> Optional[str]:
    # deterministic mode: tie-breaker by lexical order
    if not values:
        return None
    counts: Dict[str, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    maxc = max(counts.values())
    return sorted(k for k, c in counts.items() if c == maxc)[0]


def read_csv(path: str) -> List[Dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def _rate(times: List[float], start: float, end: float) -> float:
    if end <= start:
        return 0.0
    return sum(1 for t in times if start <= t < end) * 1000.0 / (end - start)


def _label(ref: Any, names: Mapping[int, str]) -> str:
    return names.get(ref, str(ref)) if isinstance(ref, int) else str(ref)


def summarize(cfg: Mapping[str, Any], events: List[Dict[str, str]], plasticity: List[Dict[str, str]]) -> Dict[str, Any]:
    schedule = PhaseSchedule.from_config(cfg["schedule"])
    thresholds = thresholds_from_config(cfg["bcm"])
    settle_ms = float(cfg["schedule"]["settle_s"]) * 1000.0
    names = neuron_names(cfg)
    ids = neuron_ids(cfg)
    bn_id = ids[cfg["bio"]["neuron"]]
    post_id = ids[cfg["artificial"]["adaptive_neuron"]]
    pathways = {str(c["synapse_id"]): c["pathway"] for c in cfg["connectome"]}

    bn_aps = [float(e["abs_time_ms"]) for e in events if int(e["neuron_id"]) == bn_id and e["kind"] in AP_KINDS]
    post_spikes = [float(e["abs_time_ms"]) for e in events if int(e["neuron_id"]) == post_id]

    phases: List[Dict[str, Any]] = []
    for i, ((start, end), phase) in enumerate(zip(schedule.boundaries_ms(), schedule.phases)):
        per_syn: Dict[str, Any] = {}
        for sid in pathways:
            rows = [p for p in plasticity if p["synapse_id"] == sid and start <= float(p["abs_time_ms"]) < end]
            settled = [p["decision"] for p in rows if float(p["abs_time_ms"]) >= start + settle_ms]
            counts = {d: settled.count(d) for d in DECISIONS}
            n = len(settled)
            weights = [float(p["weight_after"]) for p in rows]
            per_syn[sid] = {
                "n_settled": n,
                "counts": counts,
                "fractions": {d: (counts[d] / n if n else 0.0) for d in DECISIONS},
                "majority": _mode(settled),
                "mean_weight": (sum(weights) / len(weights)) if weights else None,
                "final_weight": weights[-1] if weights else None,
            }
        bins = []
        t = start
        while t + 2000.0 <= end + 1e-9:
            bins.append(sum(1 for x in bn_aps if t <= x < t + 2000.0))
            t += 2000.0
        phases.append({
            "index": i,
            "start_ms": start,
            "end_ms": end,
            "rate_hz": phase.rate_hz,
            "expected_forward": bcm_decide(phase.rate_hz, thresholds).value,
            "synapses": per_syn,
            "bn_aps": sum(1 for x in bn_aps if start <= x < end),
            "bn_aps_last_5s": sum(1 for x in bn_aps if max(start, end - 5000.0) <= x < end),
            "bn_min_aps_per_2s": min(bins) if bins else 0,
            "anpost_rate_hz": _rate(post_spikes, start, end),
        })

    total = schedule.total_ms
    onset = bn_aps[0] if bn_aps else None
    offset = bn_aps[-1] if bn_aps else None
    reverse = [sid for sid, pw in pathways.items() if pw == "reverse"]
    reverse_rows = [p for p in plasticity if p["synapse_id"] in reverse]
    summary = {
        "schema": SUMMARY_SCHEMA_V1,
        "seed": int(cfg["seed"]),
        "duration_ms": total,
        "neurons": {name: {"id": int(spec["id"]), "partner": spec["partner"]} for name, spec in cfg["neurons"].items()},
        "connectome": {
            str(c["synapse_id"]): {"pre": _label(c["pre"], names), "post": _label(c["post"], names), "pathway": c["pathway"]}
            for c in cfg["connectome"]
        },
        "phases": phases,
        "bn": {"total_aps": len(bn_aps), "onset_ms": onset, "offset_ms": offset},
        "anpost": {
            "baseline_hz": phases[0]["anpost_rate_hz"] if phases else 0.0,
            "active_hz": _rate(post_spikes, onset, offset) if onset is not None else None,
            "final_hz": _rate(post_spikes, max(0.0, total - 20000.0), total),
        },
        "reverse": {
            "ltp": sum(1 for p in reverse_rows if p["decision"] == PlasticityDecision.LTP.value),
            "ltd_while_bn_silent": sum(
                1 for p in reverse_rows
                if p["decision"] == PlasticityDecision.LTD.value
                and (onset is None or not onset <= float(p["abs_time_ms"]) <= offset)
            ),
        },
    }
    summary["acceptance"] = check_acceptance(summary, pathways)
    return summary


def _first(phases: List[Dict[str, Any]], decision: str, after: int = -1) -> Optional[int]:
    return next((p["index"] for p in phases if p["index"] > after and p["expected_forward"] == decision), None)


def check_acceptance(summary: Mapping[str, Any], pathways: Mapping[str, str]) -> Dict[str, Optional[bool]]:
    """Pass/fail per criterion; None where the schedule has no phase the criterion talks about."""
    phases = summary["phases"]
    out: Dict[str, Optional[bool]] = {}

    forward_ok = True
    for p in phases:
        for sid, pw in pathways.items():
            st = p["synapses"][sid]
            if pw == "forward" and st["n_settled"]:
                forward_ok &= st["fractions"][p["expected_forward"]] >= FORWARD_FRACTION_MIN
    out["forward_plasticity_follows_rate"] = bool(forward_ok) if phases else None

    ltp = _first(phases, PlasticityDecision.LTP.value)
    ltd = _first(phases, PlasticityDecision.LTD.value, after=ltp) if ltp is not None else None
    bn = summary["bn"]
    out["bn_silent_first_phase"] = (
        phases[0]["bn_aps"] == 0 if phases and phases[0]["expected_forward"] != PlasticityDecision.LTP.value else None
    )
    out["bn_active_late_ltp"] = phases[ltp]["bn_aps_last_5s"] > 0 if ltp is not None else None
    nxt = ltp + 1 if ltp is not None and ltp + 1 < len(phases) and ltp + 1 != ltd else None
    out["bn_active_after_ltp"] = phases[nxt]["bn_min_aps_per_2s"] > 0 if nxt is not None else None
    out["bn_ceases_after_ltd_onset"] = (
        bn["offset_ms"] is not None and bn["offset_ms"] < phases[ltd]["start_ms"] + 10000.0
        if ltd is not None else None
    )

    has_reverse = bool(phases) and any(pw == "reverse" for pw in pathways.values())
    rev = summary["reverse"]
    out["reverse_never_ltp"] = rev["ltp"] == 0 if has_reverse else None
    out["reverse_ltd_while_bn_silent"] = rev["ltd_while_bn_silent"] > 0 if has_reverse else None

    an = summary["anpost"]
    base = an["baseline_hz"]
    out["anpost_rate_modulated"] = (
        an["active_hz"] >= MODULATION_MIN * base if an["active_hz"] is not None and base > 0 else None
    )
    out["anpost_rate_recovers"] = abs(an["final_hz"] - base) <= RECOVERY_TOL * base if base > 0 else None
    return out


def summarize_dir(run_dir: str, emit: Optional[str] = None) -> Dict[str, Any]:
    cfg_path = os.path.join(run_dir, "config.json")
    if not os.path.exists(cfg_path):
        raise ConfigError(f"{run_dir} has no config.json; not a run directory")
    with open(cfg_path, "r", encoding="utf-8") as f:
        cfg = json.load(f)
    summary = summarize(
        cfg,
        read_csv(os.path.join(run_dir, "events.csv")),
        read_csv(os.path.join(run_dir, "plasticity.csv")),
    )
    if emit is not None:
        write_json(emit, summary)
    return summary
