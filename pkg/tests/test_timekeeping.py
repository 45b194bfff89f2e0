import pytest
from hypothesis import given, strategies as st

from synhub.errors import NoReference
from synhub.protocol import TS_MASK
from synhub.timekeeping import (
    HubClock,
    PrimaryClock,
    SecondaryClock,
    primary_to_absolute,
    secondary_report_time,
    unwrap,
    wrap_delta,
)


def test_primary_to_absolute_worked_example():
    clock = HubClock(last_primary_abs=12000)
    assert primary_to_absolute(clock, 12) == 12012
    assert clock.last_primary_abs == 12012


def test_primary_to_absolute_cumulative():
    clock = HubClock(last_primary_abs=100)
    assert [primary_to_absolute(clock, 5) for _ in range(3)] == [105, 110, 115]
    assert primary_to_absolute(HubClock(), 0) == 0


def test_primary_chain_crosses_wrap():
    clock = HubClock(last_primary_abs=TS_MASK - 4)
    assert primary_to_absolute(clock, 10) == TS_MASK + 6
    assert clock.axis_now == TS_MASK + 6


def test_primary_clock_interleaves_neurons():
    clock = PrimaryClock()
    assert clock.stamp(0) == 0
    assert [clock.stamp(t) for t in (100, 140, 150)] == [100, 40, 10]


def test_secondary_report_time():
    clock = SecondaryClock()
    with pytest.raises(NoReference):
        secondary_report_time(clock)
    clock.reset(5000, now_local=70.0)
    assert secondary_report_time(clock) == 5000
    clock.observe(100.0)
    assert secondary_report_time(clock) == 5030
    reported = []
    for local in (80.0, 95.0):
        clock.observe(local)
        reported.append(secondary_report_time(clock))
    assert reported == [5010, 5025]


def test_secondary_elapsed_never_negative():
    clock = SecondaryClock()
    clock.reset(10, now_local=50.0)
    assert clock.observe(40.0) == 0.0


def test_wrap_delta_examples():
    assert wrap_delta(10, (1 << 24) - 5) == 15
    assert wrap_delta(7, 7) == 0
    assert wrap_delta(100, 40) == 60


@given(st.integers(0, TS_MASK), st.integers(0, (1 << 23) - 1))
def test_wrap_delta_inverts_modular_addition(a, d):
    assert wrap_delta((a + d) & TS_MASK, a) == d


@given(st.integers(0, 10**9), st.integers(-(1 << 22), 1 << 22))
def test_unwrap_recovers_nearby_absolute_time(reference, offset):
    t = max(0, reference + offset)
    assert unwrap(t & TS_MASK, reference) == t


def test_hub_axis_is_monotone():
    clock = HubClock()
    clock.advance(50)
    clock.advance(20)
    assert clock.axis_now == 50


@given(st.lists(st.integers(0, 5000), min_size=1, max_size=50), st.integers(0, 10**7))
def test_relative_timing_preserved_through_the_chain(isis, start):
    # primary emits at start + cumsum(isis); the hub must see identical intervals
    sender, hub = PrimaryClock(last_emitted_abs=start), HubClock(last_primary_abs=start)
    t = start
    abs_times = []
    for d in isis:
        t += d
        abs_times.append(primary_to_absolute(hub, sender.stamp(t)))
    assert [b - a for a, b in zip([start] + abs_times, abs_times)] == isis
