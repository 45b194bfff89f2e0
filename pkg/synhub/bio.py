"""
Secondary partner: the biological neuron (BN) as a behavioural model.

A capacitive stimulus of N pulses (N in 2..16, coded by the hub's weight
byte) evokes either a sub-threshold PSP or a forced action potential. The
node reports every response to the hub in reset-relative time.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, List, Mapping, NamedTuple, Optional

import numpy as np

from .artificial import Emission, SpikeLogRow
from .errors import ConfigError, NoReference, OutOfRange, UnknownNeuron
from .memristor import PULSE_LEVELS, byte_to_weight, weight_to_pulse_count
from .protocol import TS_MASK, AerPacket, EventKind, PartnerRole, decode, role_for_tag, secondary_code
from .timekeeping import SecondaryClock, secondary_report_time

logger = logging.getLogger(__name__)

MIN_PULSES = 2
MAX_PULSES = 2 * PULSE_LEVELS


@dataclass(frozen=True)
class BioParams:
    ap_threshold_pulses: int = 16
    psp_amp_max: float = 10.0
    ap_amplitude: float = 100.0
    jitter: float = 0.05
    spont_rate_hz: float = 0.0
    refractory_ms: float = 200.0
    response_latency_ms: float = 2.0
    summation_mode: bool = False
    summation_tau_ms: float = 50.0

    @classmethod
    def from_config(cls, bio: Mapping[str, Any]) -> "BioParams":
        return cls(
            ap_threshold_pulses=int(bio["ap_threshold_pulses"]),
            psp_amp_max=float(bio["psp_amp_max"]),
            jitter=float(bio["jitter"]),
            spont_rate_hz=float(bio["spont_rate_hz"]),
            refractory_ms=float(bio["refractory_ms"]),
            response_latency_ms=float(bio["response_latency_ms"]),
            summation_mode=bool(bio["summation_mode"]),
            summation_tau_ms=float(bio["summation_tau_ms"]),
        )


@dataclass
class BioNeuron:
    params: BioParams = field(default_factory=BioParams)
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0), repr=False)
    accumulated: float = 0.0
    last_input: Optional[float] = None


class BioResponse(NamedTuple):
    kind: EventKind
    amplitude: float
    effective_pulses: int


def _psp(params: BioParams, effective: float) -> float:
    return params.psp_amp_max * min(max(effective, 0.0), MAX_PULSES) / MAX_PULSES


def effective_pulses(neuron: BioNeuron, pulse_count: int) -> int:
    if not MIN_PULSES <= pulse_count <= MAX_PULSES:
        raise OutOfRange(f"pulse count {pulse_count} outside [{MIN_PULSES}, {MAX_PULSES}]")
    if neuron.params.jitter <= 0.0:
        return pulse_count
    xi = float(neuron.rng.normal(0.0, neuron.params.jitter))
    return max(0, math.floor(pulse_count * (1.0 + xi) + 0.5))


def stimulate(neuron: BioNeuron, pulse_count: int, now: Optional[float] = None) -> BioResponse:
    """Threshold response to one stimulus; leaky summation when the neuron runs in summation mode."""
    p = neuron.params
    eff = effective_pulses(neuron, pulse_count)
    drive = float(eff)
    if p.summation_mode:
        if now is None:
            raise ConfigError("summation mode needs the stimulus arrival time")
        if neuron.last_input is not None:
            neuron.accumulated *= math.exp(-(now - neuron.last_input) / p.summation_tau_ms)
        neuron.accumulated += eff
        neuron.last_input = now
        drive = neuron.accumulated
    if drive >= p.ap_threshold_pulses:
        neuron.accumulated = 0.0
        return BioResponse(EventKind.FORCED_AP, p.ap_amplitude, eff)
    return BioResponse(EventKind.PSP, _psp(p, drive), eff)


@dataclass
class StimulusRecord:
    arrival_ms: float
    t0_ms: int
    weight_byte: int
    pulse_count: int


class SecondaryNode:
    """Hosts BN; timestamps are t0 from the last stimulus plus local elapsed time."""

    def __init__(
        self,
        *,
        neuron_id: int,
        neuron: BioNeuron,
        tags: Mapping[PartnerRole, int],
        rng: Optional[np.random.Generator] = None,
    ) -> None:
        self.neuron_id = neuron_id
        self.neuron = neuron
        self.tags = dict(tags)
        self.clock = SecondaryClock()
        self.spike_log: List[SpikeLogRow] = []
        self.stimuli: List[StimulusRecord] = []
        self.last_ap: Optional[float] = None
        self._rng = rng if rng is not None else np.random.default_rng(0)
        self._next_spont: Optional[float] = None
        self._spont_from = 0.0

    def _in_refractory(self, t: float) -> bool:
        return self.last_ap is not None and t - self.last_ap < self.neuron.params.refractory_ms

    def _report(self, kind: EventKind, at: float) -> Emission:
        self.clock.observe(at)
        try:
            ts = secondary_report_time(self.clock)
        except NoReference:
            # nothing to reset against yet: report against session start
            ts = int(at) & TS_MASK
        packet = AerPacket(r1=self.tags[PartnerRole.SECONDARY], neuron_id=self.neuron_id,
                           r2=secondary_code(kind), timestamp=ts)
        self.spike_log.append(SpikeLogRow(at, self.neuron_id, kind.value))
        return Emission(at, PartnerRole.SYNAPSE, packet)

    def on_hub_packet(self, pkt: AerPacket, now: float) -> List[Emission]:
        if role_for_tag(pkt.r1, self.tags) is not PartnerRole.SYNAPSE:
            logger.warning("secondary: ignoring packet with partner tag 0x%02X", pkt.r1)
            return []
        if pkt.neuron_id != self.neuron_id:
            logger.warning("secondary: %s", UnknownNeuron(f"neuron {pkt.neuron_id} is not hosted here"))
            return []
        self.clock.reset(pkt.timestamp, now)
        pulses = weight_to_pulse_count(byte_to_weight(pkt.r2))
        self.stimuli.append(StimulusRecord(now, pkt.timestamp, pkt.r2, pulses))

        resp = stimulate(self.neuron, pulses, now)
        at = now + self.neuron.params.response_latency_ms
        kind = resp.kind
        if kind is EventKind.FORCED_AP:
            if self._in_refractory(at):
                kind = EventKind.PSP
            else:
                self.last_ap = at
        return [self._report(kind, at)]

    def on_datagram(self, octets: bytes, now: float) -> List[Emission]:
        return self.on_hub_packet(decode(octets), now)

    def advance_to(self, t: float) -> List[Emission]:
        return spontaneous_process(self, t)


def _hazard(params: BioParams) -> float:
    """Poisson hazard that yields spont_rate_hz once refractory dead time is taken out."""
    rate = params.spont_rate_hz / 1000.0
    dead = params.refractory_ms
    if rate * dead >= 1.0:
        raise ConfigError(
            f"bio.spont_rate_hz={params.spont_rate_hz} cannot be reached with refractory {dead} ms"
        )
    return rate / (1.0 - rate * dead)


def spontaneous_process(node: SecondaryNode, until: float) -> List[Emission]:
    """Emit every spontaneous AP due up to `until` (local ms)."""
    p = node.neuron.params
    if p.spont_rate_hz <= 0.0:
        return []
    hazard = _hazard(p)
    out: List[Emission] = []
    while True:
        if node._next_spont is None:
            node._next_spont = node._spont_from + float(node._rng.exponential(1.0 / hazard))
        t = node._next_spont
        if t > until:
            return out
        node._next_spont = None
        if node._in_refractory(t):
            node._spont_from = node.last_ap + p.refractory_ms
            continue
        node.last_ap = t
        node._spont_from = t + p.refractory_ms
        out.append(node._report(EventKind.SPONTANEOUS_AP, t))


def build_secondary(cfg: Mapping[str, Any], rng_factory, tags: Mapping[PartnerRole, int]) -> SecondaryNode:
    bio = cfg["bio"]
    name = bio["neuron"]
    if name not in cfg["neurons"]:
        raise ConfigError(f"bio.neuron '{name}' is not declared in neurons")
    params = BioParams.from_config(bio)
    if params.spont_rate_hz > 0.0:
        _hazard(params)
    return SecondaryNode(
        neuron_id=int(cfg["neurons"][name]["id"]),
        neuron=BioNeuron(params=params, rng=rng_factory("bio:response")),
        tags=tags,
        rng=rng_factory("bio:spontaneous"),
    )
