"""
The synapse hub: control centre of the network.

Every spike packet passes through here. The hub puts it on the absolute
time axis, records it, consults the connectivity matrix, evaluates BCM
plasticity, programs the memristors and finally emits one stimulation packet
per synapse driven by the firing neuron (program-then-stimulate).
"""
from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Union

from .config import neuron_names
from .errors import ConfigError, DuplicateSynapseId, MalformedEventKind, OutputIoError, SelfLoop, WrongLength
from .memristor import MemristorDevice, apply_pulse, pulse_for, weight_to_byte
from .plasticity import (
    BcmThresholds,
    PlasticityDecision,
    SpikeHistory,
    evaluate_forward,
    evaluate_reverse,
    thresholds_from_config,
)
from .protocol import (
    DEFAULT_TAGS,
    TS_MASK,
    AerPacket,
    EventKind,
    PartnerRole,
    decode,
    event_kind,
    role_for_tag,
)
from .timekeeping import HubClock, primary_to_absolute, unwrap

logger = logging.getLogger(__name__)

EVENTS_HEADER = ["abs_time_ms", "neuron_id", "name", "source", "kind"]
PLASTICITY_HEADER = ["abs_time_ms", "synapse_id", "decision", "weight_after"]


class Pathway(str, Enum):
    FORWARD = "forward"
    REVERSE = "reverse"


@dataclass(frozen=True)
class ConnectomeEntry:
    pre_neuron_id: int
    synapse_id: str
    post_neuron_id: int
    post_partner: PartnerRole
    pathway: Pathway


@dataclass(frozen=True)
class ConnectivityMatrix:
    entries: tuple = ()

    def by_pre(self, neuron_id: int) -> List[ConnectomeEntry]:
        return [e for e in self.entries if e.pre_neuron_id == neuron_id]

    def by_post(self, neuron_id: int) -> List[ConnectomeEntry]:
        return [e for e in self.entries if e.post_neuron_id == neuron_id]

    def knows(self, neuron_id: int) -> bool:
        return any(neuron_id in (e.pre_neuron_id, e.post_neuron_id) for e in self.entries)

    @property
    def synapse_ids(self) -> List[str]:
        return [e.synapse_id for e in self.entries]


def _resolve_neuron(ref: Union[str, int], ids: Mapping[str, int]) -> int:
    if isinstance(ref, int):
        return ref
    if ref not in ids:
        raise ConfigError(f"connectome references unknown neuron '{ref}'")
    return ids[ref]


def load_connectome(config: Mapping[str, Any]) -> ConnectivityMatrix:
    neurons = config.get("neurons", {})
    ids = {name: int(spec["id"]) for name, spec in neurons.items()}
    hosts = {int(spec["id"]): PartnerRole(spec["partner"]) for spec in neurons.values() if "partner" in spec}
    entries: List[ConnectomeEntry] = []
    seen = set()
    for raw in config.get("connectome", []):
        pre = _resolve_neuron(raw["pre"], ids)
        post = _resolve_neuron(raw["post"], ids)
        sid = str(raw["synapse_id"])
        if sid in seen:
            raise DuplicateSynapseId(f"synapse id '{sid}' appears more than once")
        if pre == post:
            raise SelfLoop(f"synapse '{sid}' connects neuron {pre} to itself")
        partner = PartnerRole(raw["post_partner"])
        if post in hosts and hosts[post] is not partner:
            raise ConfigError(
                f"synapse '{sid}' routes to {partner.value}, but neuron {post} is hosted by {hosts[post].value}"
            )
        seen.add(sid)
        entries.append(
            ConnectomeEntry(
                pre_neuron_id=pre,
                synapse_id=sid,
                post_neuron_id=post,
                post_partner=partner,
                pathway=Pathway(raw["pathway"]),
            )
        )
    return ConnectivityMatrix(entries=tuple(entries))


@dataclass(frozen=True)
class NetworkEvent:
    abs_time: int
    neuron_id: int
    source: PartnerRole
    kind: EventKind


@dataclass(frozen=True)
class PlasticityRecord:
    abs_time: int
    synapse_id: str
    decision: PlasticityDecision
    weight_after: float


class Outbound(NamedTuple):
    destination: PartnerRole
    packet: AerPacket


@dataclass
class HubState:
    matrix: ConnectivityMatrix
    devices: Dict[str, MemristorDevice]
    thresholds: BcmThresholds = field(default_factory=BcmThresholds)
    window_ms: float = 1000.0
    history_capacity: int = 4096
    tags: Dict[PartnerRole, int] = field(default_factory=lambda: dict(DEFAULT_TAGS))
    clock: HubClock = field(default_factory=HubClock)
    stimulus_hold_ms: float = 0.0
    names: Dict[int, str] = field(default_factory=dict)
    histories: Dict[int, SpikeHistory] = field(default_factory=dict)
    log: List[Union[NetworkEvent, PlasticityRecord]] = field(default_factory=list)
    dropped: int = 0

    def __post_init__(self) -> None:
        missing = [sid for sid in self.matrix.synapse_ids if sid not in self.devices]
        if missing:
            raise ConfigError(f"no memristor device for synapses {missing}")

    def history(self, neuron_id: int) -> SpikeHistory:
        h = self.histories.get(neuron_id)
        if h is None:
            h = SpikeHistory(window_ms=self.window_ms, capacity=self.history_capacity)
            self.histories[neuron_id] = h
        return h

    @property
    def events(self) -> List[NetworkEvent]:
        return [r for r in self.log if isinstance(r, NetworkEvent)]

    @property
    def plasticity(self) -> List[PlasticityRecord]:
        return [r for r in self.log if isinstance(r, PlasticityRecord)]


def _absolute_time(state: HubState, pkt: AerPacket, source: PartnerRole) -> int:
    if source is PartnerRole.PRIMARY:
        return primary_to_absolute(state.clock, pkt.timestamp)
    # secondary stamps are already absolute (t0 + local delta), 24-bit wrapped
    t = unwrap(pkt.timestamp, state.clock.axis_now)
    state.clock.advance(t)
    return t


def _program(state: HubState, entry: ConnectomeEntry, decision: PlasticityDecision, t: int) -> None:
    dev = state.devices[entry.synapse_id]
    direction = pulse_for(decision)
    if direction is not None:
        apply_pulse(dev, direction)
    state.log.append(PlasticityRecord(abs_time=t, synapse_id=entry.synapse_id, decision=decision, weight_after=dev.w))


def on_packet(state: HubState, pkt: AerPacket, source: PartnerRole) -> List[Outbound]:
    if source is PartnerRole.SYNAPSE:
        logger.warning("dropping packet tagged as synapse-origin (neuron %d)", pkt.neuron_id)
        state.dropped += 1
        return []
    try:
        kind = event_kind(source, pkt.r2)
    except MalformedEventKind as e:
        logger.warning("dropping %s packet for neuron %d: %s", source.value, pkt.neuron_id, e)
        state.dropped += 1
        return []

    # primary deltas always extend the chain, even for packets dropped below
    t = _absolute_time(state, pkt, source)
    nid = pkt.neuron_id
    if not state.matrix.knows(nid):
        logger.warning("unknown neuron %d from %s at %d ms; nothing emitted", nid, source.value, t)
        state.dropped += 1
        return []

    state.log.append(NetworkEvent(abs_time=t, neuron_id=nid, source=source, kind=kind))
    if not kind.is_spike:
        logger.debug("PSP from neuron %d at %d ms logged", nid, t)
        return []
    state.history(nid).add(t)

    outgoing = state.matrix.by_pre(nid)
    for entry in outgoing:
        if entry.pathway is Pathway.FORWARD:
            _program(state, entry, evaluate_forward(state.history(nid), t, state.thresholds), t)
    for entry in state.matrix.by_post(nid):
        if entry.pathway is Pathway.REVERSE:
            pre = state.history(entry.pre_neuron_id)
            _program(state, entry, evaluate_reverse(pre, t, state.thresholds), t)

    out: List[Outbound] = []
    for entry in outgoing:
        packet = AerPacket(
            r1=state.tags[PartnerRole.SYNAPSE],
            neuron_id=entry.post_neuron_id,
            r2=weight_to_byte(state.devices[entry.synapse_id].w),
            timestamp=t & TS_MASK,
        )
        out.append(Outbound(entry.post_partner, packet))
    return out


def release_time(state: HubState, out: Outbound, arrival: float) -> float:
    """
    Send time of an outbound stimulation: `stimulus_hold_ms` after the firing
    time on the hub axis, never earlier than the inbound packet arrived. With a
    hold no shorter than the inbound link delay, stimulus spacing at the
    receiver carries only the outbound link jitter.
    """
    t = unwrap(out.packet.timestamp, state.clock.axis_now)
    return max(float(arrival), t + state.stimulus_hold_ms)


def on_datagram(state: HubState, octets: bytes) -> List[Outbound]:
    """Decode a raw datagram, identify the sender from R1 and process it."""
    try:
        pkt = decode(octets)
    except WrongLength as e:
        logger.warning("dropping datagram: %s", e)
        state.dropped += 1
        return []
    source = role_for_tag(pkt.r1, state.tags)
    if source is None:
        logger.warning("dropping datagram with unknown partner tag 0x%02X", pkt.r1)
        state.dropped += 1
        return []
    return on_packet(state, pkt, source)


def _write_csv(path: str, header: List[str], rows: List[List[Any]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def export_log(state: HubState, out_dir: str) -> Dict[str, str]:
    """Write events.csv and plasticity.csv, rows ordered by absolute time (stable on processing order)."""
    events = sorted(state.events, key=lambda e: e.abs_time)
    plast = sorted(state.plasticity, key=lambda p: p.abs_time)
    paths = {
        "events": os.path.join(out_dir, "events.csv"),
        "plasticity": os.path.join(out_dir, "plasticity.csv"),
    }
    try:
        os.makedirs(out_dir, exist_ok=True)
        _write_csv(
            paths["events"],
            EVENTS_HEADER,
            [[e.abs_time, e.neuron_id, state.names.get(e.neuron_id, ""), e.source.value, e.kind.value] for e in events],
        )
        _write_csv(
            paths["plasticity"],
            PLASTICITY_HEADER,
            [[p.abs_time, p.synapse_id, p.decision.value, f"{p.weight_after:.6f}"] for p in plast],
        )
    except OSError as e:
        raise OutputIoError(f"cannot write hub logs to {out_dir}: {e}") from e
    return paths


def build_hub(
    cfg: Mapping[str, Any],
    rng_factory,
    tags: Optional[Dict[PartnerRole, int]] = None,
    stimulus_hold_ms: Optional[float] = None,
) -> HubState:
    matrix = load_connectome(cfg)
    mem = cfg["memristor"]
    devices = {
        sid: MemristorDevice(
            w=float(mem["initial_weight"].get(sid, mem["default_initial_weight"])),
            alpha_p=float(mem["alpha_p"]),
            alpha_d=float(mem["alpha_d"]),
            noise_sigma=float(mem["noise_sigma"]),
            rng=rng_factory(f"memristor:{sid}"),
        )
        for sid in matrix.synapse_ids
    }
    if stimulus_hold_ms is None:
        stimulus_hold_ms = cfg["hub"].get("stimulus_hold_ms") or 0.0
    bcm = cfg["bcm"]
    return HubState(
        matrix=matrix,
        devices=devices,
        thresholds=thresholds_from_config(bcm),
        window_ms=float(bcm["window_ms"]),
        history_capacity=int(bcm["history_capacity"]),
        tags=dict(tags or DEFAULT_TAGS),
        stimulus_hold_ms=float(stimulus_hold_ms),
        names=neuron_names(cfg),
    )
