"""Fronthaul packet format, scatter-gather packetization, channel model, reassembly."""

from .channel import ChannelSpec, Delivery, apply_channel
from .packet import (C_PLANE, HEADER_LEN, U_PLANE, FronthaulPacket, ScatterGatherDescriptor,
                     packetize_bytes, packetize_slot, parse_packet, release_descriptors,
                     segment_lengths, segment_size, serialize_packet)
from .reorder import (PlacementAction, Reassembler, ReorderStrategy, SlotAssembly,
                      reorder_finalize, reorder_submit)

__all__ = [
    "ChannelSpec", "Delivery", "apply_channel",
    "C_PLANE", "HEADER_LEN", "U_PLANE", "FronthaulPacket", "ScatterGatherDescriptor",
    "packetize_bytes", "packetize_slot", "parse_packet", "release_descriptors",
    "segment_lengths", "segment_size", "serialize_packet",
    "PlacementAction", "Reassembler", "ReorderStrategy", "SlotAssembly",
    "reorder_finalize", "reorder_submit",
]
