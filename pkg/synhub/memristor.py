"""
Behavioural memristive synapse.

The device is a black box holding a normalized weight w in [0, 1]. A
programming pulse moves w by a soft-bounded, state-dependent step:

    Potentiate: w <- clamp(w + alpha_p * (1 - w) * (1 + xi))
    Depress:    w <- clamp(w - alpha_d * w       * (1 + xi))

with xi ~ Normal(0, noise_sigma). Between pulses the state is non-volatile.
The quantizers map w to the three downstream encodings: the R2 weight byte,
the capacitive stimulation pulse count and the burst rate for the
artificial neuron.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import OutOfRange
from .plasticity import PlasticityDecision

PULSE_LEVELS = 8


class PulseDirection(str, Enum):
    POTENTIATE = "potentiate"
    DEPRESS = "depress"


def pulse_for(decision: PlasticityDecision) -> Optional[PulseDirection]:
    if decision is PlasticityDecision.LTP:
        return PulseDirection.POTENTIATE
    if decision is PlasticityDecision.LTD:
        return PulseDirection.DEPRESS
    return None


@dataclass
class MemristorDevice:
    w: float = 0.5
    alpha_p: float = 0.05
    alpha_d: float = 0.05
    noise_sigma: float = 0.1
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0), repr=False)

    def __post_init__(self) -> None:
        if not 0.0 <= self.w <= 1.0:
            raise OutOfRange(f"initial weight {self.w} outside [0, 1]")


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def apply_pulse(dev: MemristorDevice, direction: PulseDirection) -> float:
    xi = float(dev.rng.normal(0.0, dev.noise_sigma)) if dev.noise_sigma > 0.0 else 0.0
    if direction is PulseDirection.POTENTIATE:
        dev.w = _clamp01(dev.w + dev.alpha_p * (1.0 - dev.w) * (1.0 + xi))
    else:
        dev.w = _clamp01(dev.w - dev.alpha_d * dev.w * (1.0 + xi))
    return dev.w


def _check_weight(w: float) -> None:
    if not 0.0 <= w <= 1.0:
        raise OutOfRange(f"weight {w} outside [0, 1]")


def weight_to_pulse_count(w: float) -> int:
    _check_weight(w)
    k = min(PULSE_LEVELS - 1, max(0, math.floor(w * PULSE_LEVELS)))
    return 2 * (k + 1)


def weight_to_burst_rate(w: float, f_min: float = 10.0, f_max: float = 200.0) -> float:
    _check_weight(w)
    return f_min + w * (f_max - f_min)


def weight_to_byte(w: float) -> int:
    _check_weight(w)
    return min(255, math.floor(w * 255.0 + 0.5))


def byte_to_weight(b: int) -> float:
    if not 0 <= b <= 255:
        raise OutOfRange(f"weight byte {b} outside [0, 255]")
    return b / 255.0
