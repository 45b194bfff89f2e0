"""
Rate-coded BCM decision engine.

Direction of plasticity is a step function of the presynaptic rate measured
over a sliding window:

    rate <  low_hz            -> LTD
    low_hz <= rate <= high_hz -> NoChange
    rate >  high_hz           -> LTP

Forward synapses are evaluated on every presynaptic spike (no postsynaptic
gating); reverse synapses are evaluated on every postsynaptic spike against
the presynaptic history.
"""
from __future__ import annotations

import bisect
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Deque, Iterable, Mapping, Any

from .errors import ConfigError


class PlasticityDecision(str, Enum):
    LTP = "LTP"
    LTD = "LTD"
    NO_CHANGE = "NoChange"


@dataclass(frozen=True)
class BcmThresholds:
    low_hz: float = 5.0
    high_hz: float = 20.0

    def __post_init__(self) -> None:
        if not (0.0 < self.low_hz <= self.high_hz):
            raise ConfigError(f"BCM thresholds need 0 < low_hz <= high_hz, got {self.low_hz}, {self.high_hz}")


@dataclass
class SpikeHistory:
    window_ms: float = 1000.0
    capacity: int = 4096
    times: Deque[int] = field(default_factory=deque)

    def __post_init__(self) -> None:
        if self.window_ms <= 0:
            raise ConfigError("window_ms must be > 0")
        self.times = deque(self.times, maxlen=self.capacity)

    def add(self, t: int) -> None:
        if not self.times or t > self.times[-1]:
            self.times.append(t)
        elif t not in self.times:
            # late arrival: keep the ring sorted
            ordered = list(self.times)
            bisect.insort(ordered, t)
            self.times = deque(ordered, maxlen=self.capacity)
        self._prune()

    def _prune(self) -> None:
        newest = self.times[-1]
        while self.times and self.times[0] < newest - self.window_ms:
            self.times.popleft()

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self):
        return iter(self.times)


def estimate_rate(history: SpikeHistory, now: float) -> float:
    lo = now - history.window_ms
    count = sum(1 for t in history.times if lo < t <= now)
    return count * 1000.0 / history.window_ms


def bcm_decide(rate: float, th: BcmThresholds) -> PlasticityDecision:
    if rate < th.low_hz:
        return PlasticityDecision.LTD
    if rate > th.high_hz:
        return PlasticityDecision.LTP
    return PlasticityDecision.NO_CHANGE


def evaluate_forward(pre_history: SpikeHistory, now: float, th: BcmThresholds = BcmThresholds()) -> PlasticityDecision:
    return bcm_decide(estimate_rate(pre_history, now), th)


def evaluate_reverse(
    pre_history: SpikeHistory, post_spike_time: float, th: BcmThresholds = BcmThresholds()
) -> PlasticityDecision:
    return bcm_decide(estimate_rate(pre_history, post_spike_time), th)


def thresholds_from_config(bcm: Mapping[str, Any]) -> BcmThresholds:
    return BcmThresholds(low_hz=float(bcm["low_hz"]), high_hz=float(bcm["high_hz"]))


def history_from_times(times: Iterable[int], window_ms: float = 1000.0) -> SpikeHistory:
    h = SpikeHistory(window_ms=window_ms)
    for t in times:
        h.add(int(t))
    return h
