from functools import partial

import numpy as np
import pytest

from synhub.bio import BioNeuron, BioParams, SecondaryNode, build_secondary, effective_pulses, stimulate
from synhub.config import apply_overrides, default_config
from synhub.errors import ConfigError, OutOfRange
from synhub.protocol import DEFAULT_TAGS, AerPacket, EventKind, PartnerRole, decode, encode
from synhub.util import rng_for


def neuron(**kw):
    return BioNeuron(params=BioParams(jitter=0.0, **kw))


def node(**bio):
    cfg = apply_overrides(default_config(), {"bio": bio}) if bio else default_config()
    return build_secondary(cfg, partial(rng_for, 1), DEFAULT_TAGS)


def stim(weight_byte, t0):
    return AerPacket(r1=0x02, neuron_id=3, r2=weight_byte, timestamp=t0)


def test_stimulate_threshold_response():
    n = neuron()
    assert stimulate(n, 16) == (EventKind.FORCED_AP, 100.0, 16)
    assert stimulate(n, 14) == (EventKind.PSP, 8.75, 14)
    assert stimulate(n, 2) == (EventKind.PSP, 1.25, 2)


@pytest.mark.parametrize("n", [0, 1, 17])
def test_stimulate_rejects_pulse_counts_out_of_range(n):
    with pytest.raises(OutOfRange):
        stimulate(neuron(), n)


@pytest.mark.parametrize("n", range(2, 15))
def test_psp_amplitude_rises_with_pulse_count(n):
    lo, hi = stimulate(neuron(), n), stimulate(neuron(), n + 1)
    assert lo.kind is EventKind.PSP and hi.kind is EventKind.PSP
    assert lo.amplitude < hi.amplitude


def test_jitter_rarely_pushes_sub_threshold_stimulus_over():
    n = BioNeuron(params=BioParams(jitter=0.05), rng=np.random.default_rng(0))
    aps = sum(stimulate(n, 14).kind is EventKind.FORCED_AP for _ in range(20000))
    assert 0.005 * 20000 <= aps <= 0.035 * 20000


def test_effective_pulses_never_negative():
    n = BioNeuron(params=BioParams(jitter=2.0), rng=np.random.default_rng(1))
    assert min(effective_pulses(n, 2) for _ in range(2000)) == 0


def test_summation_mode_accumulates_close_stimuli():
    n = neuron(summation_mode=True, summation_tau_ms=50.0)
    assert stimulate(n, 10, now=0.0).kind is EventKind.PSP
    assert stimulate(n, 10, now=1.0).kind is EventKind.FORCED_AP
    assert n.accumulated == 0.0
    assert stimulate(n, 10, now=1000.0).kind is EventKind.PSP
    assert stimulate(n, 10, now=2000.0).kind is EventKind.PSP
    with pytest.raises(ConfigError):
        stimulate(n, 10)


def test_hub_stimulus_reported_in_reset_relative_time():
    sn = node(jitter=0.0)
    [em] = sn.on_hub_packet(stim(255, 5000), now=10.0)
    pkt = em.packet
    assert em.at == 12.0 and em.destination is PartnerRole.SYNAPSE
    assert (pkt.r1, pkt.neuron_id, pkt.r2, pkt.timestamp) == (0x03, 3, 0x01, 5002)
    assert sn.stimuli[0].pulse_count == 16 and sn.stimuli[0].t0_ms == 5000


def test_refractory_downgrades_forced_ap_to_psp():
    sn = node(jitter=0.0)
    kinds = []
    for now, t0 in ((10.0, 5000), (100.0, 5090), (300.0, 5290)):
        [em] = sn.on_hub_packet(stim(255, t0), now)
        kinds.append(em.packet.r2)
    assert kinds == [0x01, 0x00, 0x01]
    assert [r.kind for r in sn.spike_log] == ["forced_ap", "psp", "forced_ap"]


def test_low_weight_gives_psp():
    sn = node(jitter=0.0)
    [em] = sn.on_hub_packet(stim(0, 40), now=1.0)
    assert em.packet.r2 == 0x00
    assert sn.stimuli[0].pulse_count == 2


def test_foreign_packets_are_ignored():
    sn = node()
    assert sn.on_hub_packet(AerPacket(0x02, 9, 255, 0), 1.0) == []
    assert sn.on_hub_packet(AerPacket(0x01, 3, 0, 0), 1.0) == []
    assert sn.stimuli == []


def test_spontaneous_before_any_stimulus_uses_session_time():
    sn = node(spont_rate_hz=1.0)
    ems = sn.advance_to(20000.0)
    assert ems
    for em in ems:
        assert em.packet.timestamp == int(em.at)
        assert em.packet.r2 == 0x02


def test_spontaneous_rate_with_dead_time():
    sn = node(spont_rate_hz=1.0)
    times = [em.at for em in sn.advance_to(1_000_000.0)]
    assert 900 <= len(times) <= 1100
    assert min(b - a for a, b in zip(times, times[1:])) >= 200.0
    # no spontaneous output past the horizon
    assert sn.advance_to(1_000_000.0) == []


def test_unreachable_spontaneous_rate_rejected():
    with pytest.raises(ConfigError):
        node(spont_rate_hz=5.0)


def test_datagram_entry_point():
    sn = node(jitter=0.0)
    [em] = sn.on_datagram(encode(stim(255, 100)), 0.0)
    assert decode(encode(em.packet)) == em.packet
    assert em.packet.timestamp == 102
