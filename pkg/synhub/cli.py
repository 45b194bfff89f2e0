import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict

from . import VERSION
from .config import apply_overrides, default_config, load_config, parse_addr
from .errors import SynhubError
from .util import dump_json

logger = logging.getLogger("synhub")


def _fail(msg: str) -> int:
    print(f"ERROR: {msg}", file=sys.stderr)
    return 2


def _config(args: argparse.Namespace) -> Dict[str, Any]:
    cfg = load_config(args.config) if getattr(args, "config", None) else default_config()
    over: Dict[str, Any] = {}
    if getattr(args, "seed", None) is not None:
        over["seed"] = int(args.seed)
    if getattr(args, "out", None):
        over["output"] = {"dir": args.out}
    hub_addr = getattr(args, "hub_addr", None)
    if hub_addr:
        host, port = parse_addr(hub_addr)
        over["hub"] = {"host": host, "listen_port": port}
    return apply_overrides(cfg, over) if over else cfg


def cmd_run(args: argparse.Namespace, mode: str = None) -> int:
    from .engine import run_experiment

    cfg = _config(args)
    if mode is not None:
        cfg = apply_overrides(cfg, {"transport": {"mode": mode}})
    res = run_experiment(cfg)
    failed = [k for k, v in res.summary["acceptance"].items() if v is False]
    if failed:
        logger.warning("acceptance checks failed: %s", ", ".join(failed))
    print(f"OK: {res.out_dir}")
    return 0


def cmd_node(args: argparse.Namespace) -> int:
    from . import udp_nodes

    cfg = _config(args)
    out = cfg["output"]["dir"]
    if args.cmd == "run-hub":
        return udp_nodes.serve_hub(cfg, out, float(args.duration_ms))
    if args.cmd == "run-primary":
        return udp_nodes.serve_primary(cfg, out)
    return udp_nodes.serve_secondary(cfg, out, float(args.duration_ms))


def cmd_summarize(args: argparse.Namespace) -> int:
    from .summary import summarize_dir

    emit = args.emit or str(Path(args.run_dir) / "summary.json")
    summary = summarize_dir(args.run_dir, emit=emit)
    for name, ok in sorted(summary["acceptance"].items()):
        state = "n/a" if ok is None else ("pass" if ok else "FAIL")
        print(f"{name}: {state}")
    print(f"OK: {emit}")
    return 0


def cmd_scenarios(args: argparse.Namespace) -> int:
    from .scenarios import run_scenario_suite

    report = run_scenario_suite(args.suite, args.emit_report, base_config=args.config, emit_dir=args.emit_dir)
    if not report["qualitatively_equal"]:
        logger.warning("scenarios diverge from baseline: %s", report["witness"])
    print(f"OK: {args.emit_report}")
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    from .artificial import AdexParams, calibrate_background

    cfg = _config(args)
    anpost = cfg["artificial"]["anpost"]
    i_bg = calibrate_background(
        AdexParams.from_config(anpost),
        float(anpost["spont_rate_hz"]),
        i_noise_sigma=float(anpost["i_noise_sigma"]),
        dt_ms=float(cfg["artificial"]["dt_ms"]),
        window_s=float(anpost["calibration_window_s"]),
        seed=int(anpost["calibration_seed"]),
    )
    sys.stdout.write(dump_json({"i_background": i_bg, "spont_rate_hz": anpost["spont_rate_hz"]}))
    return 0


def cmd_plot(args: argparse.Namespace) -> int:
    from .plots import make_figures

    outdir = args.outdir or args.run_dir
    for p in make_figures(args.run_dir, outdir):
        print(f"OK: {p}")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="synhub", description=f"Distributed bio-hybrid spiking network simulator (v{VERSION})")
    ap.add_argument("--version", action="store_true", help="Print version and exit")
    ap.add_argument("--log-level", default="WARNING", help="Root log level (default: WARNING)")
    sub = ap.add_subparsers(dest="cmd", required=False)

    def run_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", default=None, help="Path to config JSON (default: built-in canned experiment)")
        p.add_argument("--seed", type=int, default=None, help="Override config seed")
        p.add_argument("--out", default=None, help="Output directory (overrides output.dir)")

    run_args(sub.add_parser("run", help="Run an experiment with the transport named in the config"))
    run_args(sub.add_parser("run-sim", help="Run an experiment on the simulated network (virtual time)"))

    for name, help_ in (
        ("run-hub", "Serve the synapse hub over UDP"),
        ("run-primary", "Serve the primary (artificial) node over UDP"),
        ("run-secondary", "Serve the secondary (biological) node over UDP"),
    ):
        p = sub.add_parser(name, help=help_)
        run_args(p)
        p.add_argument("--hub-addr", default=None, help="Hub address host:port (overrides hub.host/listen_port)")
        if name != "run-primary":
            p.add_argument("--duration-ms", type=float, required=True, help="Serve for this many ms, then export logs")

    smz = sub.add_parser("summarize", help="Recompute the phase summary of a run directory")
    smz.add_argument("--in", dest="run_dir", required=True, help="Run directory (with config.json and CSVs)")
    smz.add_argument("--emit", default=None, help="Output summary JSON path (default: <run>/summary.json)")

    scn = sub.add_parser("run-scenarios", help="Run a scenario suite and compare against its baseline")
    scn.add_argument("--suite", required=True, help="Suite JSON (synhub.suite.v1)")
    scn.add_argument("--config", default=None, help="Base config JSON")
    scn.add_argument("--emit-report", required=True, help="Output scenario report JSON path")
    scn.add_argument("--emit-dir", default=None, help="Directory for per-scenario run directories")

    cal = sub.add_parser("calibrate", help="Calibrate ANPOST background drive to its spontaneous rate")
    cal.add_argument("--config", default=None, help="Path to config JSON")

    plt = sub.add_parser("plot", help="Render raster and weight figures (needs the 'figures' extra)")
    plt.add_argument("--in", dest="run_dir", required=True, help="Run directory")
    plt.add_argument("--outdir", default=None, help="Figure directory (default: the run directory)")

    cts = sub.add_parser("contracts", help="Contracts: registry validation utilities")
    cts_sub = cts.add_subparsers(dest="contracts_cmd", required=True)
    cts_sub.add_parser("validate", help="Validate contracts registry + referenced schemas/docs/fixtures")

    args = ap.parse_args(argv)

    if args.version:
        print(VERSION)
        return 0

    logging.basicConfig(level=args.log_level.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    if args.cmd is None:
        ap.print_help()
        return 2

    if args.cmd == "contracts":
        from .contracts.registry import validate_registry

        ok, errors = validate_registry(Path.cwd())
        if ok:
            print("OK: contracts registry validated")
            return 0
        print("ERROR: contracts registry validation failed")
        for e in errors:
            print(f"- {e}")
        return 1

    handlers = {
        "run": cmd_run,
        "run-sim": lambda a: cmd_run(a, mode="sim"),
        "run-hub": cmd_node,
        "run-primary": cmd_node,
        "run-secondary": cmd_node,
        "summarize": cmd_summarize,
        "run-scenarios": cmd_scenarios,
        "calibrate": cmd_calibrate,
        "plot": cmd_plot,
    }
    try:
        return handlers[args.cmd](args)
    except (SynhubError, OSError, ValueError) as e:
        return _fail(str(e))
