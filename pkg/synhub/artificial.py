"""
Primary partner: the artificial neurons.

ANPRE fires on a forced, phase-wise periodic schedule. ANPOST is an adaptive
exponential integrate-and-fire neuron driven by a calibrated background
current, a small Gaussian current noise and an EPSC accumulator fed by
weight-coded bursts arriving from the hub.
"""
from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, List, Mapping, NamedTuple, Optional

import numpy as np

from .config import neuron_ids
from .errors import ConfigError
from .memristor import byte_to_weight, weight_to_burst_rate
from .protocol import AerPacket, PartnerRole, decode, role_for_tag
from .timekeeping import PrimaryClock

logger = logging.getLogger(__name__)

EXP_ARG_CAP = 20.0
NOISE_BLOCK = 4096


@dataclass(frozen=True)
class Phase:
    rate_hz: float
    duration_s: float

    def __post_init__(self) -> None:
        if self.rate_hz <= 0 or self.duration_s <= 0:
            raise ConfigError(f"phase needs rate > 0 and duration > 0, got {self}")


@dataclass(frozen=True)
class PhaseSchedule:
    phases: tuple = ()

    @classmethod
    def from_config(cls, schedule: Mapping[str, Any]) -> "PhaseSchedule":
        return cls(tuple(Phase(float(p["rate_hz"]), float(p["duration_s"])) for p in schedule.get("phases", [])))

    @property
    def total_ms(self) -> float:
        return sum(p.duration_s for p in self.phases) * 1000.0

    def boundaries_ms(self) -> List[tuple]:
        out, start = [], 0.0
        for p in self.phases:
            end = start + p.duration_s * 1000.0
            out.append((start, end))
            start = end
        return out


def forced_spike_times(schedule: PhaseSchedule) -> List[float]:
    times: List[float] = []
    for (start, _end), phase in zip(schedule.boundaries_ms(), schedule.phases):
        period = 1000.0 / phase.rate_hz
        n = math.floor(phase.duration_s * phase.rate_hz + 1e-9)
        times.extend(start + k * period for k in range(1, n + 1))
    return times


@dataclass(frozen=True)
class AdexParams:
    tau_m: float = 20.0
    tau_w: float = 100.0
    tau_syn: float = 100.0
    v_rest: float = -70.0
    v_threshold: float = -50.0
    v_reset: float = -58.0
    v_peak: float = 0.0
    delta_T: float = 2.0
    a: float = 0.05
    b: float = 2.0
    t_refractory: float = 5.0

    @classmethod
    def from_config(cls, anpost: Mapping[str, Any]) -> "AdexParams":
        names = cls.__dataclass_fields__.keys()
        return cls(**{k: float(anpost[k]) for k in names if k in anpost})


@dataclass(frozen=True)
class StimParams:
    f_min: float = 10.0
    f_max: float = 200.0
    burst_duration_ms: float = 50.0
    epsc_quantum: float = 20.0

    @classmethod
    def from_config(cls, stim: Mapping[str, Any]) -> "StimParams":
        return cls(**{k: float(v) for k, v in stim.items()})


@dataclass
class AdaptiveNeuron:
    params: AdexParams = field(default_factory=AdexParams)
    i_background: float = 0.0
    i_noise_sigma: float = 0.0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0), repr=False)
    t: float = 0.0
    v: float = float("nan")
    w_adapt: float = 0.0
    i_syn: float = 0.0
    refractory_until: float = float("-inf")
    pending_epsc: List[float] = field(default_factory=list, repr=False)
    epsc_quantum: float = 20.0

    def __post_init__(self) -> None:
        if math.isnan(self.v):
            self.v = self.params.v_rest
        self._noise = np.empty(0)
        self._noise_i = 0

    def _next_noise(self) -> float:
        if self._noise_i >= self._noise.size:
            self._noise = self.rng.standard_normal(NOISE_BLOCK)
            self._noise_i = 0
        x = self._noise[self._noise_i]
        self._noise_i += 1
        return float(x)


def burst_offsets(rate_hz: float, duration_ms: float) -> List[float]:
    """Offsets of the spikes of one burst: k * period for every k * period < duration."""
    if rate_hz <= 0.0 or duration_ms <= 0.0:
        return []
    period = 1000.0 / rate_hz
    n = math.ceil(duration_ms / period - 1e-9)
    return [k * period for k in range(n)]


def on_stimulation(neuron: AdaptiveNeuron, weight_byte: int, stim: StimParams, now: Optional[float] = None) -> int:
    """Schedule a weight-coded burst; each burst spike adds one EPSC quantum. Returns the burst length."""
    start = neuron.t if now is None else float(now)
    rate = weight_to_burst_rate(byte_to_weight(weight_byte), stim.f_min, stim.f_max)
    offsets = burst_offsets(rate, stim.burst_duration_ms)
    neuron.epsc_quantum = stim.epsc_quantum
    for off in offsets:
        heapq.heappush(neuron.pending_epsc, start + off)
    return len(offsets)


def step(neuron: AdaptiveNeuron, dt_ms: float) -> bool:
    """Advance one explicit Euler step; True when the neuron spiked during it."""
    if dt_ms > 1.0:
        raise ConfigError(f"dt_ms must be <= 1 ms, got {dt_ms}")
    p = neuron.params
    pending = neuron.pending_epsc
    while pending and pending[0] <= neuron.t:
        heapq.heappop(pending)
        neuron.i_syn += neuron.epsc_quantum

    noise = neuron.i_noise_sigma * neuron._next_noise() if neuron.i_noise_sigma > 0.0 else 0.0
    drive = neuron.i_background + noise + neuron.i_syn

    if neuron.t < neuron.refractory_until:
        neuron.v = p.v_reset
    else:
        arg = min((neuron.v - p.v_threshold) / p.delta_T, EXP_ARG_CAP)
        dv = (-(neuron.v - p.v_rest) + p.delta_T * math.exp(arg) - neuron.w_adapt + drive) / p.tau_m
        neuron.v += dt_ms * dv
    neuron.w_adapt += dt_ms * (p.a * (neuron.v - p.v_rest) - neuron.w_adapt) / p.tau_w
    neuron.i_syn *= math.exp(-dt_ms / p.tau_syn)
    neuron.t += dt_ms

    if neuron.v >= p.v_peak:
        neuron.v = p.v_reset
        neuron.w_adapt += p.b
        neuron.refractory_until = neuron.t + p.t_refractory
        return True
    return False


def simulate_rate(
    params: AdexParams,
    i_background: float,
    *,
    i_noise_sigma: float = 0.0,
    duration_ms: float = 30000.0,
    dt_ms: float = 0.5,
    seed: int = 0,
) -> float:
    neuron = AdaptiveNeuron(params=params, i_background=i_background,
                            i_noise_sigma=i_noise_sigma, rng=np.random.default_rng(seed))
    spikes = sum(1 for _ in range(int(round(duration_ms / dt_ms))) if step(neuron, dt_ms))
    return spikes * 1000.0 / duration_ms


@lru_cache(maxsize=32)
def calibrate_background(
    params: AdexParams,
    target_hz: float,
    *,
    i_noise_sigma: float = 0.0,
    dt_ms: float = 0.5,
    window_s: float = 30.0,
    seed: int = 7,
    tol: float = 0.05,
    max_iter: int = 40,
) -> float:
    """Bisect the constant background drive until the spontaneous rate is within tol of target_hz."""

    def rate(i_bg: float) -> float:
        return simulate_rate(params, i_bg, i_noise_sigma=i_noise_sigma,
                             duration_ms=window_s * 1000.0, dt_ms=dt_ms, seed=seed)

    lo, hi = 0.0, 40.0
    for _ in range(6):
        if rate(hi) >= target_hz:
            break
        lo, hi = hi, hi * 2.0
    else:
        raise ConfigError(f"no background drive below {hi} reaches {target_hz} Hz")
    if rate(lo) > target_hz * (1.0 + tol):
        raise ConfigError(f"ANPOST fires above {target_hz} Hz without background drive")

    mid, r = 0.5 * (lo + hi), float("nan")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        r = rate(mid)
        if abs(r - target_hz) <= tol * target_hz:
            break
        if r < target_hz:
            lo = mid
        else:
            hi = mid
    else:
        logger.warning(
            "ANPOST calibration did not converge in %d steps: %.3f Hz at drive %.5f (target %.2f Hz +/- %.0f%%)",
            max_iter, r, mid, target_hz, tol * 100.0,
        )
        return mid
    logger.info("calibrated ANPOST background drive %.5f for %.2f Hz", mid, target_hz)
    return mid


class Emission(NamedTuple):
    at: float
    destination: PartnerRole
    packet: AerPacket


@dataclass
class SpikeLogRow:
    time_ms: float
    neuron_id: int
    kind: str


class PrimaryNode:
    """Hosts ANPRE and ANPOST and speaks general relative time to the hub."""

    def __init__(
        self,
        *,
        forced_id: int,
        adaptive_id: int,
        schedule: PhaseSchedule,
        neuron: AdaptiveNeuron,
        stim: StimParams,
        tags: Mapping[PartnerRole, int],
        dt_ms: float = 0.5,
    ) -> None:
        self.forced_id = forced_id
        self.adaptive_id = adaptive_id
        self.neuron = neuron
        self.stim = stim
        self.tags = dict(tags)
        self.dt_ms = dt_ms
        self.clock = PrimaryClock()
        self.spike_log: List[SpikeLogRow] = []
        self.stimulations = 0
        self._forced = forced_spike_times(schedule)
        self._next_forced = 0

    def emit_spike_packet(self, neuron_id: int, now: float) -> Emission:
        t = int(now)
        dt = self.clock.stamp(t)
        packet = AerPacket(r1=self.tags[PartnerRole.PRIMARY], neuron_id=neuron_id, r2=0, timestamp=dt)
        self.spike_log.append(SpikeLogRow(now, neuron_id, "spike"))
        return Emission(now, PartnerRole.SYNAPSE, packet)

    def advance_to(self, t: float) -> List[Emission]:
        out: List[Emission] = []
        while self.neuron.t + 0.5 * self.dt_ms <= t:
            while self._next_forced < len(self._forced) and self._forced[self._next_forced] <= self.neuron.t:
                out.append(self.emit_spike_packet(self.forced_id, self._forced[self._next_forced]))
                self._next_forced += 1
            if step(self.neuron, self.dt_ms):
                out.append(self.emit_spike_packet(self.adaptive_id, self.neuron.t))
        while self._next_forced < len(self._forced) and self._forced[self._next_forced] <= t:
            out.append(self.emit_spike_packet(self.forced_id, self._forced[self._next_forced]))
            self._next_forced += 1
        return out

    def on_datagram(self, octets: bytes, now: float) -> None:
        pkt = decode(octets)
        if role_for_tag(pkt.r1, self.tags) is not PartnerRole.SYNAPSE:
            logger.warning("primary: ignoring packet with partner tag 0x%02X", pkt.r1)
            return
        if pkt.neuron_id != self.adaptive_id:
            logger.warning("primary: stimulation for neuron %d which is not hosted here", pkt.neuron_id)
            return
        self.stimulations += 1
        on_stimulation(self.neuron, pkt.r2, self.stim, now)


def build_primary(cfg: Mapping[str, Any], rng_factory, tags: Mapping[PartnerRole, int]) -> PrimaryNode:
    art = cfg["artificial"]
    anpost = art["anpost"]
    params = AdexParams.from_config(anpost)
    dt = float(art["dt_ms"])
    schedule = PhaseSchedule.from_config(cfg["schedule"])
    i_bg = anpost.get("i_background")
    if i_bg is None:
        i_bg = calibrate_background(
            params,
            float(anpost["spont_rate_hz"]),
            i_noise_sigma=float(anpost["i_noise_sigma"]),
            dt_ms=dt,
            window_s=float(anpost["calibration_window_s"]),
            seed=int(anpost["calibration_seed"]),
        )
    stim = StimParams.from_config(cfg["stim"])
    neuron = AdaptiveNeuron(
        params=params,
        i_background=float(i_bg),
        i_noise_sigma=float(anpost["i_noise_sigma"]),
        rng=rng_factory("anpost"),
        epsc_quantum=stim.epsc_quantum,
    )
    ids = neuron_ids(cfg)
    return PrimaryNode(
        forced_id=ids[art["forced_neuron"]],
        adaptive_id=ids[art["adaptive_neuron"]],
        schedule=schedule,
        neuron=neuron,
        stim=stim,
        tags=tags,
        dt_ms=dt,
    )
