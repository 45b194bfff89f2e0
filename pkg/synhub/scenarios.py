import csv
import hashlib
import json
import logging
import os
from typing import Any, Dict, List, Mapping, Optional

import jsonschema
from jsonschema.validators import Draft202012Validator

from .config import apply_overrides, default_config, load_config, load_schema
from .contract_ids import SCENARIOS_SCHEMA_V1, SUITE_SCHEMA_V1
from .engine import run_experiment
from .errors import ConfigError, SynhubError
from .summary import read_csv
from .util import write_json

logger = logging.getLogger(__name__)

TABLE_HEADER = [
    "name", "ok", "forward_majorities", "bn_onset_phase", "anpost_modulated",
    "forward_stream_sha256", "matches_baseline", "error",
]


def load_suite(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            suite = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read scenario suite {path}: {e}") from None
    if not isinstance(suite, dict) or suite.get("schema") != SUITE_SCHEMA_V1:
        raise ConfigError(f"{path}: expected schema {SUITE_SCHEMA_V1}")
    try:
        jsonschema.validate(instance=suite, schema=load_schema("suite"), cls=Draft202012Validator)
    except jsonschema.ValidationError as e:
        raise ConfigError(f"{path}: invalid suite: {e.message}") from None
    names = [s.get("name") for s in suite.get("scenarios", [])]
    if not names or len(set(names)) != len(names):
        raise ConfigError(f"{path}: scenario names must be present and unique")
    return suite


def _forward_stream(run_dir: str, forward: List[str]) -> str:
    # decision sequence only: weights differ across initial conditions, decisions should not
    h = hashlib.sha256()
    for row in read_csv(os.path.join(run_dir, "plasticity.csv")):
        if row["synapse_id"] in forward:
            h.update(f"{row['abs_time_ms']},{row['synapse_id']},{row['decision']}\n".encode("utf-8"))
    return h.hexdigest()


def _signature(summary: Mapping[str, Any], forward: List[str]) -> Dict[str, Any]:
    phases = summary["phases"]
    onset = summary["bn"]["onset_ms"]
    onset_phase = None
    if onset is not None:
        onset_phase = next((p["index"] for p in phases if p["start_ms"] <= onset < p["end_ms"]), len(phases) - 1)
    return {
        "forward_majorities": [[p["synapses"][sid]["majority"] for sid in forward] for p in phases],
        "bn_onset_phase": onset_phase,
        "anpost_modulated": summary["acceptance"].get("anpost_rate_modulated"),
    }


def run_scenario_suite(
    suite_file: str,
    emit_report: str,
    *,
    base_config: Optional[str] = None,
    emit_dir: Optional[str] = None,
) -> Dict[str, Any]:
    """
    Scenario suite:
      - run every scenario (base config + overrides), baseline first
      - one failing scenario does not stop the others
      - compare qualitative signatures to the baseline; first divergence is the witness
      - emit a report JSON and a flat CSV table next to it
    """
    suite = load_suite(suite_file)
    base = load_config(base_config) if base_config else default_config()
    emit_dir = emit_dir or os.path.join(os.path.dirname(emit_report) or ".", "scenarios")

    entries: List[Dict[str, Any]] = []
    base_sig: Optional[Dict[str, Any]] = None
    base_stream: Optional[str] = None
    witness: Optional[Dict[str, Any]] = None

    for i, sc in enumerate(suite["scenarios"]):
        name = str(sc["name"])
        run_dir = os.path.join(emit_dir, name)
        entry: Dict[str, Any] = {"i": i, "name": name, "run_dir": run_dir, "ok": False, "error": None}
        try:
            cfg = apply_overrides(base, sc.get("overrides", {}))
            forward = [str(c["synapse_id"]) for c in cfg["connectome"] if c["pathway"] == "forward"]
            res = run_experiment(cfg, run_dir)
            sig = _signature(res.summary, forward)
            stream = _forward_stream(run_dir, forward)
            entry.update(ok=True, signature=sig, forward_stream_sha256=stream, acceptance=res.summary["acceptance"])
        except SynhubError as e:
            logger.error("scenario %s failed: %s", name, e)
            entry["error"] = str(e)
            entries.append(entry)
            continue

        if base_sig is None:
            base_sig, base_stream = sig, stream
        entry["matches_baseline"] = sig == base_sig
        entry["forward_stream_identical"] = stream == base_stream
        if witness is None and sig != base_sig:
            key = next(k for k in sig if sig[k] != base_sig[k])
            witness = {"scenario": name, "field": key, "baseline": base_sig[key], "value": sig[key]}
        entries.append(entry)

    report = {
        "schema": SCENARIOS_SCHEMA_V1,
        "suite_file": suite_file,
        "baseline": entries[0]["name"],
        "qualitatively_equal": bool(base_sig is not None and witness is None and all(e["ok"] for e in entries)),
        "witness": witness,
        "scenarios": entries,
    }
    os.makedirs(os.path.dirname(emit_report) or ".", exist_ok=True)
    write_json(emit_report, report)
    write_table(os.path.splitext(emit_report)[0] + ".csv", entries)
    return report


def write_table(path: str, entries: List[Mapping[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.DictWriter(f, fieldnames=TABLE_HEADER, lineterminator="\n")
        w.writeheader()
        for e in entries:
            sig = e.get("signature") or {}
            w.writerow({
                "name": e["name"],
                "ok": e["ok"],
                "forward_majorities": "|".join("/".join(str(x) for x in row) for row in sig.get("forward_majorities", [])),
                "bn_onset_phase": sig.get("bn_onset_phase"),
                "anpost_modulated": sig.get("anpost_modulated"),
                "forward_stream_sha256": e.get("forward_stream_sha256", ""),
                "matches_baseline": e.get("matches_baseline", ""),
                "error": e.get("error") or "",
            })
