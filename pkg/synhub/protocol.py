"""
64-bit AER/UDP packet codec.

Wire layout (big-endian, one event per datagram):

    R1 (8) | NeuronID (24) | R2 (8) | Timestamp (24)

R1 carries the sender's partner tag. R2 and the timestamp mean different
things per sender role (see docs/contract/packet.v1.md).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Mapping, Optional

from .errors import MalformedEventKind, OutOfRange, WrongLength

PACKET_OCTETS = 8
ID_BITS = 24
TS_BITS = 24
ID_MASK = (1 << ID_BITS) - 1
TS_MASK = (1 << TS_BITS) - 1
BYTE_MASK = 0xFF


class PartnerRole(str, Enum):
    PRIMARY = "primary"
    SYNAPSE = "synapse"
    SECONDARY = "secondary"


class EventKind(str, Enum):
    PSP = "psp"
    FORCED_AP = "forced_ap"
    SPONTANEOUS_AP = "spontaneous_ap"
    WEIGHT = "weight"
    UNUSED = "unused"

    @property
    def is_spike(self) -> bool:
        return self in (EventKind.FORCED_AP, EventKind.SPONTANEOUS_AP, EventKind.UNUSED)


DEFAULT_TAGS: Dict[PartnerRole, int] = {
    PartnerRole.PRIMARY: 0x01,
    PartnerRole.SYNAPSE: 0x02,
    PartnerRole.SECONDARY: 0x03,
}

_SECONDARY_CODES: Dict[EventKind, int] = {
    EventKind.PSP: 0x00,
    EventKind.FORCED_AP: 0x01,
    EventKind.SPONTANEOUS_AP: 0x02,
}
_SECONDARY_KINDS = {code: kind for kind, code in _SECONDARY_CODES.items()}


@dataclass(frozen=True)
class AerPacket:
    r1: int
    neuron_id: int
    r2: int
    timestamp: int

    def __post_init__(self) -> None:
        for name, value, mask in (
            ("r1", self.r1, BYTE_MASK),
            ("neuron_id", self.neuron_id, ID_MASK),
            ("r2", self.r2, BYTE_MASK),
            ("timestamp", self.timestamp, TS_MASK),
        ):
            if not isinstance(value, int) or value < 0 or value > mask:
                raise OutOfRange(f"{name}={value!r} does not fit its field (max {mask})")


def encode(packet: AerPacket) -> bytes:
    word = (
        (packet.r1 << 56)
        | (packet.neuron_id << 32)
        | (packet.r2 << 24)
        | packet.timestamp
    )
    return word.to_bytes(PACKET_OCTETS, "big")


def decode(octets: bytes) -> AerPacket:
    if len(octets) != PACKET_OCTETS:
        raise WrongLength(f"expected {PACKET_OCTETS} octets, got {len(octets)}")
    word = int.from_bytes(bytes(octets), "big")
    return AerPacket(
        r1=(word >> 56) & BYTE_MASK,
        neuron_id=(word >> 32) & ID_MASK,
        r2=(word >> 24) & BYTE_MASK,
        timestamp=word & TS_MASK,
    )


def tags_from_config(partners: Mapping[str, int]) -> Dict[PartnerRole, int]:
    tags = {PartnerRole(k): int(v) for k, v in partners.items()}
    if len(set(tags.values())) != len(tags):
        raise OutOfRange(f"partner tags must be distinct: {partners}")
    return tags


def role_for_tag(tag: int, tags: Mapping[PartnerRole, int] = DEFAULT_TAGS) -> Optional[PartnerRole]:
    for role, value in tags.items():
        if value == tag:
            return role
    return None


def secondary_code(kind: EventKind) -> int:
    try:
        return _SECONDARY_CODES[kind]
    except KeyError:
        raise MalformedEventKind(f"{kind.value} is not a secondary event kind") from None


def event_kind(role: PartnerRole, r2: int) -> EventKind:
    """Interpret R2 for the sender role; legality is checked by the receiver."""
    if role is PartnerRole.SECONDARY:
        try:
            return _SECONDARY_KINDS[r2]
        except KeyError:
            raise MalformedEventKind(f"secondary R2 code 0x{r2:02X} is not a known event") from None
    if role is PartnerRole.SYNAPSE:
        return EventKind.WEIGHT
    if r2 != 0:
        raise MalformedEventKind(f"primary R2 must be unused (0), got 0x{r2:02X}")
    return EventKind.UNUSED
