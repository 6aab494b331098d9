"""Uplink slot reassembly from out-of-order U-plane packets.

Segments are equal-sized (only the last may be short), so a packet's
destination offset is ``seq_num * segment_size`` and can be written the moment
the packet lands. Two strategies share that placement rule:

* ``STREAMING`` places each packet on arrival, overlapping placement with
  reception.
* ``SEQUENTIAL`` buffers packets and places them all in one pass once the
  last needed packet has arrived.

Placement work is priced by ``overhead_us + bytes * us_per_byte`` and is
serialized on one placement engine, which yields each slot's ready time.
"""

from dataclasses import dataclass
from enum import Enum

from ..errors import DuplicateSeq, InvalidArgument, MissingPackets, PacketError, UnknownSlot


class ReorderStrategy(str, Enum):
    STREAMING = "streaming"
    SEQUENTIAL = "sequential"


@dataclass(frozen=True)
class PlacementAction:
    seq_num: int
    kind: str
    offset: int
    length: int
    start_us: float | None = None
    done_us: float | None = None


class SlotAssembly:
    def __init__(self, slot_id, expected_packets, segment_size, strategy, *,
                 overhead_us=0.5, us_per_byte=0.0005, flow_id=0):
        if expected_packets < 1 or segment_size < 1:
            raise InvalidArgument("expected_packets and segment_size must be >= 1")
        if overhead_us < 0 or us_per_byte < 0:
            raise InvalidArgument("placement costs must be >= 0")
        self.slot_id = slot_id
        self.flow_id = flow_id
        self.expected_packets = expected_packets
        self.segment_size = segment_size
        self.strategy = ReorderStrategy(strategy)
        self.overhead_us = overhead_us
        self.us_per_byte = us_per_byte
        self.placed = [False] * expected_packets
        self.buffer = bytearray(expected_packets * segment_size)
        self.actions = []
        self.ready_time_us = None
        self._seen = set()
        self._held = []
        self._last_len = None
        self._busy_until = None
        self._complete_at = None

    def cost_us(self, nbytes):
        return self.overhead_us + nbytes * self.us_per_byte

    @property
    def complete(self):
        return len(self._seen) == self.expected_packets

    @property
    def missing(self):
        return [s for s in range(self.expected_packets) if s not in self._seen]

    def _validate(self, packet):
        seq = packet.seq_num
        if seq >= self.expected_packets:
            raise PacketError(f"seq {seq} outside slot of {self.expected_packets} packets")
        n = packet.payload_len
        last = seq == self.expected_packets - 1
        if (not last and n != self.segment_size) or (last and not 0 < n <= self.segment_size):
            raise PacketError(f"seq {seq}: payload of {n} bytes breaks segment size {self.segment_size}")

    def _place(self, seq, payload, start):
        off = seq * self.segment_size
        self.buffer[off:off + len(payload)] = payload
        self.placed[seq] = True
        done = start + self.cost_us(len(payload))
        act = PlacementAction(seq, "placed", off, len(payload), start, done)
        self.actions.append(act)
        return act

    def submit(self, packet, at_us=0.0):
        if packet.slot_id != self.slot_id or packet.flow_id != self.flow_id:
            raise UnknownSlot(f"packet for flow {packet.flow_id} slot {packet.slot_id}")
        if packet.seq_num in self._seen:
            raise DuplicateSeq(f"slot {self.slot_id}: seq {packet.seq_num} already received")
        self._validate(packet)
        self._seen.add(packet.seq_num)
        if packet.seq_num == self.expected_packets - 1:
            self._last_len = packet.payload_len
        if self.complete:
            self._complete_at = at_us
        if self.strategy is ReorderStrategy.STREAMING:
            start = at_us if self._busy_until is None else max(at_us, self._busy_until)
            act = self._place(packet.seq_num, packet.payload, start)
            self._busy_until = act.done_us
            return act
        self._held.append(packet)
        off = packet.seq_num * self.segment_size
        act = PlacementAction(packet.seq_num, "buffered", off, packet.payload_len)
        self.actions.append(act)
        return act

    def finalize(self):
        """Return the contiguous payload, or raise :class:`MissingPackets`."""
        if not self.complete:
            raise MissingPackets(self.missing)
        if self.ready_time_us is None:
            if self.strategy is ReorderStrategy.SEQUENTIAL:
                t = self._complete_at
                for p in self._held:
                    t = self._place(p.seq_num, p.payload, t).done_us
                self._held.clear()
                self.ready_time_us = t
            else:
                self.ready_time_us = self._busy_until
        total = (self.expected_packets - 1) * self.segment_size + self._last_len
        return bytes(self.buffer[:total])

    def placements(self):
        return [a for a in self.actions if a.kind == "placed"]


class Reassembler:
    """Routes packets to per-(flow, slot) assemblies."""

    def __init__(self, strategy, **costs):
        self.strategy = ReorderStrategy(strategy)
        self._costs = costs
        self._slots = {}

    def open_slot(self, slot_id, expected_packets, segment_size, flow_id=0):
        key = (flow_id, slot_id)
        if key in self._slots:
            raise InvalidArgument(f"slot {slot_id} of flow {flow_id} already open")
        asm = SlotAssembly(slot_id, expected_packets, segment_size, self.strategy,
                           flow_id=flow_id, **self._costs)
        self._slots[key] = asm
        return asm

    def slot(self, slot_id, flow_id=0):
        try:
            return self._slots[(flow_id, slot_id)]
        except KeyError:
            raise UnknownSlot(f"slot {slot_id} of flow {flow_id} is not open") from None

    def submit(self, packet, at_us=0.0):
        return self.slot(packet.slot_id, packet.flow_id).submit(packet, at_us)

    def finalize(self, slot_id, flow_id=0):
        return self.slot(slot_id, flow_id).finalize()

    def close(self, slot_id, flow_id=0):
        self._slots.pop((flow_id, slot_id), None)


def reorder_submit(engine, packet, at_us=0.0):
    return engine.submit(packet, at_us)


def reorder_finalize(engine, slot_id, flow_id=0):
    return engine.finalize(slot_id, flow_id)
