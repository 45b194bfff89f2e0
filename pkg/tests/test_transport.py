import numpy as np
import pytest

from synhub.errors import ConfigError, WrongLength
from synhub.protocol import PartnerRole
from synhub.transport import (
    LINK_ENDPOINTS,
    LinkProfile,
    SimLink,
    SimScheduler,
    build_sim_network,
    profiles_from_config,
)
from synhub.config import default_config
from synhub.util import rng_for

PKT = bytes(8)


def link(profile, seed=0, name="primary->hub"):
    sched = SimScheduler()
    return SimLink(name, profile, sched, np.random.default_rng(seed)), sched


def test_link_profile_validation():
    with pytest.raises(ConfigError):
        LinkProfile(static_delay_ms=-1.0)
    with pytest.raises(ConfigError):
        LinkProfile(loss_prob=1.5)


def test_static_delay_without_jitter():
    lk, sched = link(LinkProfile(static_delay_ms=10.0))
    d = lk.send(PKT, 100.0)
    assert d.time == 110.0
    assert d.destination is PartnerRole.SYNAPSE
    assert d.source is PartnerRole.PRIMARY
    assert sched.run_until(109.9) == []
    assert [x.time for x in sched.run_until(110.0)] == [110.0]


def test_send_rejects_wrong_length():
    lk, _ = link(LinkProfile())
    with pytest.raises(WrongLength):
        lk.send(b"\x00" * 7, 0.0)


def test_total_loss_drops_everything():
    lk, sched = link(LinkProfile(loss_prob=1.0))
    for t in range(100):
        assert lk.send(PKT, float(t)) is None
    assert (lk.sent, lk.dropped) == (100, 100)
    assert len(sched) == 0


def test_partial_loss_rate():
    lk, _ = link(LinkProfile(loss_prob=0.25), seed=5)
    for t in range(4000):
        lk.send(PKT, float(t))
    assert 800 <= lk.dropped <= 1200


def test_fifo_preserves_send_order_under_jitter():
    lk, sched = link(LinkProfile(static_delay_ms=20.0, jitter_ms=5.0, fifo=True), seed=9)
    for k in range(2000):
        lk.send(k.to_bytes(8, "big"), float(k))
    got = [int.from_bytes(d.octets, "big") for d in sched.run_until(1e9)]
    assert got == list(range(2000))


def test_without_fifo_jitter_may_reorder():
    lk, sched = link(LinkProfile(static_delay_ms=20.0, jitter_ms=5.0, fifo=False), seed=9)
    for k in range(2000):
        lk.send(k.to_bytes(8, "big"), float(k))
    got = [int.from_bytes(d.octets, "big") for d in sched.run_until(1e9)]
    assert sorted(got) == list(range(2000))
    assert got != list(range(2000))


def test_delivery_never_before_send():
    lk, _ = link(LinkProfile(static_delay_ms=0.0, jitter_ms=3.0, fifo=False), seed=2)
    for k in range(500):
        d = lk.send(PKT, float(k))
        assert d.time >= d.sent_at


def test_scheduler_orders_by_time_then_insertion():
    sched = SimScheduler()
    sched.schedule(5.0, PartnerRole.SYNAPSE, b"a" * 8)
    sched.schedule(3.0, PartnerRole.SYNAPSE, b"b" * 8)
    sched.schedule(5.0, PartnerRole.SYNAPSE, b"c" * 8)
    assert [d.octets[:1] for d in sched.run_until(10.0)] == [b"b", b"a", b"c"]
    assert sched.virtual_now == 10.0
    with pytest.raises(ValueError):
        sched.run_until(5.0)


def test_handler_follow_ups_inside_the_window_are_delivered():
    sched = SimScheduler()
    seen = []

    def handler(d):
        seen.append(d.time)
        if d.time < 3.0:
            sched.schedule(d.time + 1.0, PartnerRole.PRIMARY, PKT)

    sched.schedule(1.0, PartnerRole.SYNAPSE, PKT)
    sched.run_until(2.5, handler)
    assert seen == [1.0, 2.0]
    sched.run_until(10.0, handler)
    assert seen == [1.0, 2.0, 3.0]


def test_unspecified_static_delay_drawn_from_range():
    transport = default_config()["transport"]
    profiles = profiles_from_config(transport, np.random.default_rng(0))
    assert set(profiles) == set(LINK_ENDPOINTS)
    for p in profiles.values():
        assert 10.0 <= p.static_delay_ms <= 90.0
        assert p.jitter_ms == 2.0 and p.fifo


def test_network_routes_by_endpoint_pair():
    net = build_sim_network({name: LinkProfile() for name in LINK_ENDPOINTS}, lambda c: rng_for(1, c))
    d = net.send(PartnerRole.SYNAPSE, PartnerRole.SECONDARY, PKT, 4.0)
    assert d.destination is PartnerRole.SECONDARY
    with pytest.raises(ConfigError):
        net.send(PartnerRole.PRIMARY, PartnerRole.SECONDARY, PKT, 4.0)
