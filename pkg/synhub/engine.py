"""
Experiment orchestration.

`run_experiment` builds the three nodes from one config, drives them over the
selected transport for the whole stimulation schedule and writes the run
directory: hub logs, per-node spike logs, the resolved config, a summary and
a manifest with content hashes.
"""
from __future__ import annotations

import copy
import csv
import logging
import os
import subprocess
import sys
import time
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Dict, List, Mapping, Optional

from . import VERSION
from .artificial import AdexParams, PhaseSchedule, PrimaryNode, SpikeLogRow, build_primary, calibrate_background
from .bio import SecondaryNode, StimulusRecord, build_secondary
from .contract_ids import MANIFEST_SCHEMA_V1
from .errors import NodeStartupFailure, OutputIoError
from .config import neuron_names
from .hub import HubState, build_hub, export_log, on_datagram, release_time
from .protocol import PartnerRole, encode, tags_from_config
from .summary import summarize_dir
from .transport import Delivery, LinkProfile, build_sim_network, profiles_from_config
from .util import dump_json, rng_for, sha256_file, write_json

logger = logging.getLogger(__name__)

SPIKES_HEADER = ["time_ms", "neuron_id", "name", "kind"]
STIMULI_HEADER = ["arrival_ms", "t0_ms", "weight_byte", "pulse_count"]
UDP_STARTUP_S = 0.5
UDP_GRACE_S = 1.0


@dataclass
class RunResult:
    out_dir: str
    files: Dict[str, str]
    summary: Dict[str, Any]
    manifest: Dict[str, Any]
    hub: Optional[HubState] = field(default=None, repr=False)
    primary: Optional[PrimaryNode] = field(default=None, repr=False)
    secondary: Optional[SecondaryNode] = field(default=None, repr=False)


def run_duration_ms(cfg: Mapping[str, Any]) -> float:
    total = PhaseSchedule.from_config(cfg["schedule"]).total_ms
    return total + float(cfg["schedule"]["tail_s"]) * 1000.0 if total > 0 else 0.0


def resolve_config(cfg: Mapping[str, Any]) -> Dict[str, Any]:
    """Fill in values chosen at run time so the stored config reproduces the run exactly."""
    out = copy.deepcopy(dict(cfg))
    anpost = out["artificial"]["anpost"]
    if anpost.get("i_background") is None:
        if run_duration_ms(out) == 0.0:
            anpost["i_background"] = 0.0
        else:
            anpost["i_background"] = calibrate_background(
                AdexParams.from_config(anpost),
                float(anpost["spont_rate_hz"]),
                i_noise_sigma=float(anpost["i_noise_sigma"]),
                dt_ms=float(out["artificial"]["dt_ms"]),
                window_s=float(anpost["calibration_window_s"]),
                seed=int(anpost["calibration_seed"]),
            )
    return out


def sim_stimulus_hold(cfg: Mapping[str, Any], profiles: Mapping[str, LinkProfile]) -> float:
    hold = cfg["hub"].get("stimulus_hold_ms")
    if hold is not None:
        return float(hold)
    inbound = profiles["primary->hub"]
    return inbound.static_delay_ms + inbound.jitter_ms


def write_spike_log(path: str, rows: List[SpikeLogRow], names: Mapping[int, str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(SPIKES_HEADER)
        w.writerows(
            [f"{r.time_ms:.3f}", r.neuron_id, names.get(r.neuron_id, ""), r.kind]
            for r in sorted(rows, key=lambda r: r.time_ms)
        )


def write_stimuli_log(path: str, rows: List[StimulusRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(STIMULI_HEADER)
        w.writerows([f"{r.arrival_ms:.3f}", r.t0_ms, r.weight_byte, r.pulse_count] for r in rows)


def write_node_logs(
    out_dir: str,
    names: Mapping[int, str],
    primary: Optional[PrimaryNode] = None,
    secondary: Optional[SecondaryNode] = None,
) -> None:
    try:
        os.makedirs(out_dir, exist_ok=True)
        if primary is not None:
            write_spike_log(os.path.join(out_dir, "primary_spikes.csv"), primary.spike_log, names)
        if secondary is not None:
            write_spike_log(os.path.join(out_dir, "secondary_spikes.csv"), secondary.spike_log, names)
            write_stimuli_log(os.path.join(out_dir, "secondary_stimuli.csv"), secondary.stimuli)
    except OSError as e:
        raise OutputIoError(f"cannot write node logs to {out_dir}: {e}") from e


def run_sim(cfg: Mapping[str, Any], out_dir: str) -> RunResult:
    cfg = resolve_config(cfg)
    rng_factory = partial(rng_for, int(cfg["seed"]))
    tags = tags_from_config(cfg["partners"])
    profiles = profiles_from_config(cfg["transport"], rng_factory("transport"))
    hub = build_hub(cfg, rng_factory, tags, stimulus_hold_ms=sim_stimulus_hold(cfg, profiles))
    primary = build_primary(cfg, rng_factory, tags)
    secondary = build_secondary(cfg, rng_factory, tags)
    net = build_sim_network(profiles, rng_factory)

    def dispatch(d: Delivery) -> None:
        if d.destination is PartnerRole.SYNAPSE:
            for out in on_datagram(hub, d.octets):
                net.send(PartnerRole.SYNAPSE, out.destination, encode(out.packet), release_time(hub, out, d.time))
        elif d.destination is PartnerRole.PRIMARY:
            primary.on_datagram(d.octets, d.time)
        else:
            for em in secondary.on_datagram(d.octets, d.time):
                net.send(PartnerRole.SECONDARY, em.destination, encode(em.packet), em.at)

    dt = float(cfg["artificial"]["dt_ms"])
    n_steps = int(round(run_duration_ms(cfg) / dt))
    logger.info("sim run: %d steps of %.3f ms, seed %d", n_steps, dt, cfg["seed"])
    for k in range(1, n_steps + 1):
        t = k * dt
        net.scheduler.run_until(t, dispatch)
        hub.clock.advance(int(t))
        for em in primary.advance_to(t):
            net.send(PartnerRole.PRIMARY, em.destination, encode(em.packet), em.at)
        for em in secondary.advance_to(t):
            net.send(PartnerRole.SECONDARY, em.destination, encode(em.packet), em.at)
    if len(net.scheduler):
        logger.info("%d datagrams still in flight at end of run", len(net.scheduler))

    export_log(hub, out_dir)
    write_node_logs(out_dir, neuron_names(cfg), primary, secondary)
    extra = {
        "links": {
            name: {
                "static_delay_ms": link.profile.static_delay_ms,
                "jitter_ms": link.profile.jitter_ms,
                "loss_prob": link.profile.loss_prob,
                "fifo": link.profile.fifo,
                "sent": link.sent,
                "dropped": link.dropped,
            }
            for name, link in net.links.items()
        },
        "hub_dropped": hub.dropped,
        "stimulus_hold_ms": hub.stimulus_hold_ms,
    }
    result = finalize_run(cfg, out_dir, mode="sim", extra=extra)
    result.hub, result.primary, result.secondary = hub, primary, secondary
    return result


def _spawn(cmd: str, config_path: str, out_dir: str, *extra: str) -> subprocess.Popen:
    args = [sys.executable, "-m", "synhub", cmd, "--config", config_path, "--out", out_dir, *extra]
    logger.info("starting %s", " ".join(args))
    return subprocess.Popen(args, stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)


def run_udp(cfg: Mapping[str, Any], out_dir: str) -> RunResult:
    cfg = resolve_config(cfg)
    os.makedirs(out_dir, exist_ok=True)
    config_path = os.path.join(out_dir, "config.json")
    write_json(config_path, cfg)
    serve_s = run_duration_ms(cfg) / 1000.0 + UDP_STARTUP_S + UDP_GRACE_S
    serve = ["--duration-ms", f"{serve_s * 1000.0:.0f}"]

    procs: Dict[str, subprocess.Popen] = {}
    try:
        procs["hub"] = _spawn("run-hub", config_path, out_dir, *serve)
        procs["secondary"] = _spawn("run-secondary", config_path, out_dir, *serve)
        time.sleep(UDP_STARTUP_S)
        for name, p in procs.items():
            if p.poll() is not None:
                _, err = p.communicate()
                raise NodeStartupFailure(f"{name} exited during startup: {err.strip()}")
        procs["primary"] = _spawn("run-primary", config_path, out_dir)
        for name, p in procs.items():
            try:
                _, err = p.communicate(timeout=serve_s + 30.0)
            except subprocess.TimeoutExpired:
                raise NodeStartupFailure(f"{name} did not finish within {serve_s + 30.0:.0f} s") from None
            if p.returncode != 0:
                raise NodeStartupFailure(f"{name} failed with exit code {p.returncode}: {err.strip()}")
    finally:
        for p in procs.values():
            if p.poll() is None:
                p.kill()
                p.wait()
    return finalize_run(cfg, out_dir, mode="udp", extra={})


def make_manifest(cfg: Mapping[str, Any], out_dir: str, files: Mapping[str, str], *, mode: str, extra: Mapping[str, Any]) -> Dict[str, Any]:
    hashes = {name: sha256_file(path) for name, path in sorted(files.items())}
    cfg_hash = hashes["config"]
    return {
        "schema": MANIFEST_SCHEMA_V1,
        "synhub_version": VERSION,
        "mode": mode,
        "seed": int(cfg["seed"]),
        "rng": {"type": "numpy.PCG64", "streams": "default_rng([seed, crc32(component)])"},
        "i_background": float(cfg["artificial"]["anpost"]["i_background"]),
        "files": {name: os.path.basename(path) for name, path in sorted(files.items())},
        "hashes_sha256": hashes,
        "run_id": f"run-{cfg_hash[:8]}",
        "timestamp": "1970-01-01T00:00:00+00:00",
        **extra,
    }


def finalize_run(cfg: Mapping[str, Any], out_dir: str, *, mode: str, extra: Mapping[str, Any]) -> RunResult:
    files = {
        "config": os.path.join(out_dir, "config.json"),
        "events": os.path.join(out_dir, "events.csv"),
        "plasticity": os.path.join(out_dir, "plasticity.csv"),
        "primary_spikes": os.path.join(out_dir, "primary_spikes.csv"),
        "secondary_spikes": os.path.join(out_dir, "secondary_spikes.csv"),
        "secondary_stimuli": os.path.join(out_dir, "secondary_stimuli.csv"),
    }
    try:
        with open(files["config"], "w", encoding="utf-8") as f:
            f.write(dump_json(dict(cfg)))
        missing = [p for p in files.values() if not os.path.exists(p)]
        if missing:
            raise OutputIoError(f"run produced no {', '.join(os.path.basename(p) for p in missing)}")
        summary_path = os.path.join(out_dir, "summary.json")
        summary = summarize_dir(out_dir, emit=summary_path)
        files["summary"] = summary_path
        manifest = make_manifest(cfg, out_dir, files, mode=mode, extra=extra)
        write_json(os.path.join(out_dir, "manifest.json"), manifest)
    except OSError as e:
        raise OutputIoError(f"cannot write run artifacts to {out_dir}: {e}") from e
    logger.info("run written to %s", out_dir)
    return RunResult(out_dir=out_dir, files=files, summary=summary, manifest=manifest)


def run_experiment(cfg: Mapping[str, Any], out_dir: Optional[str] = None) -> RunResult:
    out_dir = out_dir or str(cfg["output"]["dir"])
    if cfg["transport"]["mode"] == "udp":
        return run_udp(cfg, out_dir)
    return run_sim(cfg, out_dir)
