"""
Per-role time protocols.

- primary: general relative time, every packet carries the delta to the
  previous emitted spike whatever neuron emitted it;
- hub: one absolute, monotone axis built from the primary deltas;
- secondary: reset-relative time, t0 (absolute, as told by the hub) plus the
  local wall-clock time elapsed since that stimulus arrived.

All wire timestamps are 24-bit milliseconds; internal absolute times are
unwrapped Python ints.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import NoReference
from .protocol import TS_BITS, TS_MASK

HALF_RANGE = 1 << (TS_BITS - 1)


def wrap_delta(later: int, earlier: int) -> int:
    return (int(later) - int(earlier)) & TS_MASK


def unwrap(ts24: int, reference: int) -> int:
    """Absolute time congruent to ts24 (mod 2^24) closest to `reference`."""
    d = wrap_delta(ts24, reference & TS_MASK)
    if d >= HALF_RANGE:
        d -= 1 << TS_BITS
    return int(reference) + d


@dataclass
class PrimaryClock:
    last_emitted_abs: int = 0

    def stamp(self, now: int) -> int:
        dt = wrap_delta(now, self.last_emitted_abs)
        self.last_emitted_abs = int(now)
        return dt


@dataclass
class HubClock:
    axis_now: int = 0
    last_primary_abs: int = 0

    def advance(self, t: int) -> int:
        if t > self.axis_now:
            self.axis_now = int(t)
        return self.axis_now


def primary_to_absolute(clock: HubClock, dt: int) -> int:
    abs_time = clock.last_primary_abs + (int(dt) & TS_MASK)
    clock.last_primary_abs = abs_time
    clock.advance(abs_time)
    return abs_time


@dataclass
class SecondaryClock:
    t0: Optional[int] = None
    wall_elapsed: float = 0.0
    ref_local: float = 0.0

    def reset(self, t0: int, now_local: float) -> None:
        self.t0 = int(t0) & TS_MASK
        self.ref_local = float(now_local)
        self.wall_elapsed = 0.0

    def observe(self, now_local: float) -> float:
        self.wall_elapsed = max(0.0, float(now_local) - self.ref_local)
        return self.wall_elapsed


def secondary_report_time(clock: SecondaryClock) -> int:
    if clock.t0 is None:
        raise NoReference("no primary-originated stimulus has arrived yet")
    return (clock.t0 + int(clock.wall_elapsed)) & TS_MASK
