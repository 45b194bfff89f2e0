"""
Real-time node loops for the UDP transport. One process per node.
"""
from __future__ import annotations

import heapq
import itertools
import logging
import time
from functools import partial
from typing import Any, List, Mapping, Optional, Tuple

from .artificial import build_primary
from .bio import build_secondary
from .config import neuron_names, parse_addr
from .engine import run_duration_ms, write_node_logs
from .hub import HubState, Outbound, build_hub, export_log, on_datagram
from .protocol import PartnerRole, encode, tags_from_config
from .timekeeping import unwrap
from .transport import UdpEndpoint
from .util import rng_for

logger = logging.getLogger(__name__)

POLL_S = 0.001


class HeldStimuli:
    """
    Outbound stimulation waiting on the hub wall clock. Hub-axis times map to
    wall time through the smallest arrival-minus-axis offset seen so far.
    """

    def __init__(self, hold_ms: float) -> None:
        self.hold_ms = float(hold_ms)
        self.offset: Optional[float] = None
        self._pending: List[Tuple[float, int, Outbound]] = []
        self._seq = itertools.count()

    def add(self, hub: HubState, out: Outbound, arrival: float) -> None:
        t = unwrap(out.packet.timestamp, hub.clock.axis_now)
        self.offset = arrival - t if self.offset is None else min(self.offset, arrival - t)
        release = max(arrival, t + self.offset + self.hold_ms)
        heapq.heappush(self._pending, (release, next(self._seq), out))

    def due(self, now: float) -> List[Outbound]:
        out: List[Outbound] = []
        while self._pending and self._pending[0][0] <= now:
            out.append(heapq.heappop(self._pending)[2])
        return out

    def __len__(self) -> int:
        return len(self._pending)


def pump_hub(hub: HubState, ep: UdpEndpoint, held: HeldStimuli) -> None:
    """One hub loop turn: advance the axis to local wall time, take one datagram, send what is due."""
    hub.clock.advance(int(ep.now_ms()))
    d = ep.receive(timeout=POLL_S if len(held) else 0.05)
    if d is not None:
        for out in on_datagram(hub, d.octets):
            held.add(hub, out, d.time)
    now = ep.now_ms()
    for out in held.due(now):
        ep.send(PartnerRole.SYNAPSE, out.destination, encode(out.packet), now)


def serve_hub(cfg: Mapping[str, Any], out_dir: str, duration_ms: float) -> int:
    tags = tags_from_config(cfg["partners"])
    hub = build_hub(cfg, partial(rng_for, int(cfg["seed"])), tags)
    h = cfg["hub"]
    ep = UdpEndpoint(
        PartnerRole.SYNAPSE,
        (h["host"], int(h["listen_port"])),
        {PartnerRole.PRIMARY: parse_addr(h["primary_addr"]), PartnerRole.SECONDARY: parse_addr(h["secondary_addr"])},
    ).start()
    held = HeldStimuli(hub.stimulus_hold_ms)
    logger.info("hub listening on %s:%s (stimulus hold %.1f ms)", *ep.address, hub.stimulus_hold_ms)
    try:
        while ep.now_ms() < duration_ms:
            pump_hub(hub, ep, held)
    finally:
        ep.close()
    export_log(hub, out_dir)
    logger.info("hub processed %d log records, dropped %d", len(hub.log), hub.dropped)
    return 0


def serve_primary(cfg: Mapping[str, Any], out_dir: str) -> int:
    tags = tags_from_config(cfg["partners"])
    node = build_primary(cfg, partial(rng_for, int(cfg["seed"])), tags)
    h = cfg["hub"]
    ep = UdpEndpoint(
        PartnerRole.PRIMARY,
        parse_addr(h["primary_addr"]),
        {PartnerRole.SYNAPSE: (h["host"], int(h["listen_port"]))},
    ).start()
    end = run_duration_ms(cfg)
    try:
        while True:
            now = ep.now_ms()
            while (d := ep.receive(timeout=0)) is not None:
                node.on_datagram(d.octets, d.time)
            for em in node.advance_to(min(now, end)):
                ep.send(PartnerRole.PRIMARY, em.destination, encode(em.packet), em.at)
            if now >= end:
                break
            time.sleep(POLL_S)
    finally:
        ep.close()
    write_node_logs(out_dir, neuron_names(cfg), primary=node)
    return 0


def serve_secondary(cfg: Mapping[str, Any], out_dir: str, duration_ms: float) -> int:
    tags = tags_from_config(cfg["partners"])
    node = build_secondary(cfg, partial(rng_for, int(cfg["seed"])), tags)
    h = cfg["hub"]
    ep = UdpEndpoint(
        PartnerRole.SECONDARY,
        parse_addr(h["secondary_addr"]),
        {PartnerRole.SYNAPSE: (h["host"], int(h["listen_port"]))},
    ).start()
    try:
        while ep.now_ms() < duration_ms:
            d = ep.receive(timeout=POLL_S)
            if d is not None:
                for em in node.on_datagram(d.octets, d.time):
                    ep.send(PartnerRole.SECONDARY, em.destination, encode(em.packet), em.at)
            for em in node.advance_to(ep.now_ms()):
                ep.send(PartnerRole.SECONDARY, em.destination, encode(em.packet), em.at)
    finally:
        ep.close()
    write_node_logs(out_dir, neuron_names(cfg), secondary=node)
    return 0
