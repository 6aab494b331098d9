"""Simplified 16-byte fronthaul header codec and scatter-gather packetization.

Header layout (big-endian)::

    off  size  field
    0    1     version (always 1)
    1    1     plane (0 = C-plane, 1 = U-plane)
    2    2     flow_id
    4    2     slot_id
    6    1     symbol_id
    7    1     section_id
    8    4     seq_num
    12   2     payload_len
    14   2     reserved
"""

import math
import struct
from dataclasses import dataclass

from ..errors import (BadVersion, InvalidArgument, MtuTooSmall, PacketError,
                      PayloadLengthMismatch, Truncated)

HEADER = struct.Struct(">BBHHBBIHH")
HEADER_LEN = HEADER.size
VERSION = 1
C_PLANE = 0
U_PLANE = 1
MAX_PAYLOAD = 0xFFFF

_LIMITS = {
    "plane": 0xFF, "flow_id": 0xFFFF, "slot_id": 0xFFFF, "symbol_id": 0xFF,
    "section_id": 0xFF, "seq_num": 0xFFFFFFFF, "reserved": 0xFFFF,
}


@dataclass(frozen=True)
class FronthaulPacket:
    plane: int
    flow_id: int
    slot_id: int
    symbol_id: int
    section_id: int
    seq_num: int
    payload: bytes = b""
    version: int = VERSION
    reserved: int = 0

    def __post_init__(self):
        for name, limit in _LIMITS.items():
            value = getattr(self, name)
            if not 0 <= value <= limit:
                raise InvalidArgument(f"{name}={value} out of range [0, {limit}]")
        if len(self.payload) > MAX_PAYLOAD:
            raise InvalidArgument(f"payload of {len(self.payload)} bytes exceeds {MAX_PAYLOAD}")
        object.__setattr__(self, "payload", bytes(self.payload))

    @property
    def payload_len(self):
        return len(self.payload)

    def header_bytes(self):
        return HEADER.pack(self.version, self.plane, self.flow_id, self.slot_id, self.symbol_id,
                           self.section_id, self.seq_num, len(self.payload), self.reserved)


def serialize_packet(p):
    return p.header_bytes() + p.payload


def parse_header(data):
    if len(data) < HEADER_LEN:
        raise Truncated(f"need {HEADER_LEN} header bytes, got {len(data)}")
    fields = HEADER.unpack_from(data)
    if fields[0] != VERSION:
        raise BadVersion(f"unsupported version {fields[0]}")
    if fields[1] not in (C_PLANE, U_PLANE):
        raise PacketError(f"unknown plane {fields[1]}")
    return fields


def parse_packet(data):
    data = bytes(data)
    version, plane, flow, slot, sym, sec, seq, plen, rsvd = parse_header(data)
    actual = len(data) - HEADER_LEN
    if plen != actual:
        raise PayloadLengthMismatch(f"header declares {plen} payload bytes, got {actual}")
    return FronthaulPacket(plane, flow, slot, sym, sec, seq, data[HEADER_LEN:], version, rsvd)


def segment_lengths(total, mtu):
    """Equal segments of ``mtu - 16`` bytes; only the last one may be shorter."""
    if mtu <= HEADER_LEN:
        raise MtuTooSmall(f"mtu {mtu} leaves no room for payload after the {HEADER_LEN}-byte header")
    seg = min(mtu - HEADER_LEN, MAX_PAYLOAD)
    count = math.ceil(total / seg)
    return [min(seg, total - i * seg) for i in range(count)]


def segment_size(mtu):
    if mtu <= HEADER_LEN:
        raise MtuTooSmall(f"mtu {mtu} leaves no room for payload after the {HEADER_LEN}-byte header")
    return min(mtu - HEADER_LEN, MAX_PAYLOAD)


def packetize_bytes(data, mtu, *, flow_id=0, slot_id=0, symbol_id=0, section_id=0,
                    plane=U_PLANE):
    """Split ``data`` into self-contained packets with seq_nums from 0."""
    out, off = [], 0
    for seq, n in enumerate(segment_lengths(len(data), mtu)):
        out.append(FronthaulPacket(plane, flow_id, slot_id, symbol_id, section_id, seq,
                                   data[off:off + n]))
        off += n
    return out


@dataclass(frozen=True)
class ScatterGatherDescriptor:
    """A packet composed from a header buffer and a range of a payload buffer."""

    header: object
    payload: object
    payload_offset: int
    payload_length: int
    seq_num: int

    @property
    def header_region(self):
        return (self.header.domain, 0, HEADER_LEN)

    @property
    def payload_region(self):
        return (self.payload.domain, self.payload_offset, self.payload_length)

    def gather(self):
        """Wire bytes: the NIC reads both regions directly."""
        return self.header.read(0, HEADER_LEN) + self.payload.read(self.payload_offset,
                                                                   self.payload_length)


def packetize_slot(payload, mtu, header_pool, *, flow_id=0, slot_id=0, symbol_id=0,
                   section_id=0):
    """Describe ``payload`` as U-plane packets without copying it.

    Headers are written into buffers drawn from ``header_pool``; each
    descriptor references its slice of ``payload`` in place.
    """
    lengths = segment_lengths(payload.length, mtu)
    descs, off = [], 0
    try:
        for seq, n in enumerate(lengths):
            hdr = header_pool.allocate()
            descs.append(ScatterGatherDescriptor(hdr, payload, off, n, seq))
            hdr.write(HEADER.pack(VERSION, U_PLANE, flow_id, slot_id, symbol_id, section_id,
                                  seq, n, 0))
            off += n
    except Exception:
        release_descriptors(descs)
        raise
    return descs


def release_descriptors(descs):
    for d in descs:
        d.header.pool_obj.release(d.header)
