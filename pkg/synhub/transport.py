"""
Datagram transport between the three nodes.

Two backends share one contract: `send(source, destination, octets, now)`
hands an 8-octet datagram to the network, and deliveries come back as
`Delivery` records. The simulated backend runs on a virtual clock with
per-link static delay, uniform jitter and loss; the UDP backend uses real
sockets on a background receive thread.
"""
from __future__ import annotations

import heapq
import itertools
import logging
import queue
import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np

from .errors import ConfigError, WrongLength
from .protocol import PACKET_OCTETS, PartnerRole

logger = logging.getLogger(__name__)

LINK_ENDPOINTS: Dict[str, Tuple[PartnerRole, PartnerRole]] = {
    "primary->hub": (PartnerRole.PRIMARY, PartnerRole.SYNAPSE),
    "hub->secondary": (PartnerRole.SYNAPSE, PartnerRole.SECONDARY),
    "secondary->hub": (PartnerRole.SECONDARY, PartnerRole.SYNAPSE),
    "hub->primary": (PartnerRole.SYNAPSE, PartnerRole.PRIMARY),
}


@dataclass(frozen=True)
class LinkProfile:
    static_delay_ms: float = 0.0
    jitter_ms: float = 0.0
    loss_prob: float = 0.0
    fifo: bool = True

    def __post_init__(self) -> None:
        if self.static_delay_ms < 0 or self.jitter_ms < 0:
            raise ConfigError("link delays must be >= 0")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ConfigError("loss_prob must lie in [0, 1]")


@dataclass(order=True)
class Delivery:
    time: float
    seq: int
    destination: PartnerRole = field(compare=False)
    octets: bytes = field(compare=False)
    source: Optional[PartnerRole] = field(default=None, compare=False)
    sent_at: Optional[float] = field(default=None, compare=False)


class SimScheduler:
    """Virtual-time delivery queue; ties resolve in insertion order."""

    def __init__(self) -> None:
        self.virtual_now: float = 0.0
        self._pending: List[Delivery] = []
        self._seq = itertools.count()

    def schedule(
        self,
        t: float,
        destination: PartnerRole,
        octets: bytes,
        source: Optional[PartnerRole] = None,
        sent_at: Optional[float] = None,
    ) -> Delivery:
        d = Delivery(time=float(t), seq=next(self._seq), destination=destination,
                     octets=bytes(octets), source=source, sent_at=sent_at)
        heapq.heappush(self._pending, d)
        return d

    def run_until(self, t_end: float, handler: Optional[Callable[[Delivery], None]] = None) -> List[Delivery]:
        if t_end < self.virtual_now:
            raise ValueError(f"cannot run backwards from {self.virtual_now} to {t_end}")
        delivered: List[Delivery] = []
        while self._pending and self._pending[0].time <= t_end:
            d = heapq.heappop(self._pending)
            self.virtual_now = max(self.virtual_now, d.time)
            delivered.append(d)
            if handler is not None:
                # the handler may schedule follow-ups that still fall before t_end
                handler(d)
        self.virtual_now = float(t_end)
        return delivered

    def __len__(self) -> int:
        return len(self._pending)


class SimLink:
    def __init__(self, name: str, profile: LinkProfile, scheduler: SimScheduler, rng: np.random.Generator) -> None:
        self.name = name
        self.profile = profile
        self.source, self.destination = LINK_ENDPOINTS[name]
        self._scheduler = scheduler
        self._rng = rng
        self._last_delivery = float("-inf")
        self.sent = 0
        self.dropped = 0

    def send(self, octets: bytes, now: float) -> Optional[Delivery]:
        if len(octets) != PACKET_OCTETS:
            raise WrongLength(f"expected {PACKET_OCTETS} octets, got {len(octets)}")
        self.sent += 1
        p = self.profile
        if p.loss_prob > 0.0 and self._rng.random() < p.loss_prob:
            self.dropped += 1
            logger.debug("link %s dropped datagram sent at %.3f", self.name, now)
            return None
        jitter = float(self._rng.uniform(-p.jitter_ms, p.jitter_ms)) if p.jitter_ms > 0.0 else 0.0
        t = max(now, now + p.static_delay_ms + jitter)
        if p.fifo:
            t = max(t, self._last_delivery)
            self._last_delivery = t
        return self._scheduler.schedule(t, self.destination, octets, source=self.source, sent_at=now)


class SimNetwork:
    """The four links of the star topology on one virtual clock."""

    def __init__(self, links: Mapping[str, SimLink], scheduler: SimScheduler) -> None:
        self.links = dict(links)
        self.scheduler = scheduler
        self._by_pair = {(l.source, l.destination): l for l in self.links.values()}

    def send(self, source: PartnerRole, destination: PartnerRole, octets: bytes, now: float) -> Optional[Delivery]:
        link = self._by_pair.get((source, destination))
        if link is None:
            raise ConfigError(f"no link from {source.value} to {destination.value}")
        return link.send(octets, now)


def profiles_from_config(transport: Mapping, rng: np.random.Generator) -> Dict[str, LinkProfile]:
    lo, hi = (float(x) for x in transport["static_delay_range_ms"])
    if hi < lo:
        raise ConfigError("static_delay_range_ms must be [low, high]")
    out: Dict[str, LinkProfile] = {}
    for name in LINK_ENDPOINTS:
        spec = transport["links"][name]
        static = spec["static_delay_ms"]
        # unspecified static delay is drawn once per link
        static = float(rng.uniform(lo, hi)) if static is None else float(static)
        out[name] = LinkProfile(
            static_delay_ms=static,
            jitter_ms=float(spec["jitter_ms"]),
            loss_prob=float(spec["loss_prob"]),
            fifo=bool(spec["fifo"]),
        )
    return out


def build_sim_network(profiles: Mapping[str, LinkProfile], rng_factory: Callable[[str], np.random.Generator]) -> SimNetwork:
    scheduler = SimScheduler()
    links = {name: SimLink(name, prof, scheduler, rng_factory(f"link:{name}")) for name, prof in profiles.items()}
    return SimNetwork(links, scheduler)


class UdpEndpoint:
    """One node's UDP socket; deliveries are stamped with local wall time in ms."""

    def __init__(
        self,
        role: PartnerRole,
        bind: Tuple[str, int],
        peers: Mapping[PartnerRole, Tuple[str, int]],
        clock: Callable[[], float] = time.monotonic,
    ) -> None:
        self.role = role
        self.peers = dict(peers)
        self._clock = clock
        self._t0 = clock()
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._sock.bind(bind)
        self._sock.settimeout(0.2)
        self.address = self._sock.getsockname()
        self._inbox: "queue.Queue[Delivery]" = queue.Queue()
        self._seq = itertools.count()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._loop, name=f"udp-{role.value}", daemon=True)

    def now_ms(self) -> float:
        return (self._clock() - self._t0) * 1000.0

    def start(self) -> "UdpEndpoint":
        self._thread.start()
        return self

    def _loop(self) -> None:
        while not self._stop.is_set():
            try:
                data, peer = self._sock.recvfrom(64)
            except socket.timeout:
                continue
            except OSError:
                break
            if len(data) != PACKET_OCTETS:
                logger.warning("%s: discarding %d-octet datagram from %s", self.role.value, len(data), peer)
                continue
            self._inbox.put(Delivery(time=self.now_ms(), seq=next(self._seq), destination=self.role, octets=data))

    def send(self, source: PartnerRole, destination: PartnerRole, octets: bytes, now: float) -> None:
        if len(octets) != PACKET_OCTETS:
            raise WrongLength(f"expected {PACKET_OCTETS} octets, got {len(octets)}")
        addr = self.peers.get(destination)
        if addr is None:
            raise ConfigError(f"{self.role.value} has no address for {destination.value}")
        self._sock.sendto(octets, addr)

    def receive(self, timeout: Optional[float] = None) -> Optional[Delivery]:
        try:
            return self._inbox.get(timeout=timeout)
        except queue.Empty:
            return None

    def close(self) -> None:
        self._stop.set()
        try:
            self._sock.close()
        except OSError:
            pass
        if self._thread.is_alive():
            self._thread.join(timeout=1.0)
