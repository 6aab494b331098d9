"""CRC-16/XMODEM transport-block integrity over bit strings."""

import numpy as np

from .. import kernels
from ..errors import InputTooShort, InvalidArgument

CRC16_POLY = 0x1021
CRC16_INIT = 0x0000
CRC_BITS = 16


def as_bits(bits):
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    return np.ascontiguousarray(arr)


def crc16(bits, poly=CRC16_POLY, init=CRC16_INIT):
    """CRC register value after clocking ``bits`` in MSB-first."""
    return kernels.crc16_bits(as_bits(bits), poly, init)


def crc_bits(value):
    return np.array([(value >> (15 - i)) & 1 for i in range(CRC_BITS)], dtype=np.uint8)


def crc_attach(bits):
    bits = as_bits(bits)
    if bits.size == 0:
        raise InvalidArgument("crc_attach needs a nonempty bit string")
    return np.concatenate([bits, crc_bits(crc16(bits))])


def crc_check(bits):
    """Split off the trailing CRC and verify it.

    Returns ``(payload_bits, ok)``.
    """
    bits = as_bits(bits)
    if bits.size < CRC_BITS:
        raise InputTooShort(f"need at least {CRC_BITS} bits, got {bits.size}")
    payload = bits[:-CRC_BITS]
    ok = bool(np.array_equal(bits[-CRC_BITS:], crc_bits(crc16(payload))))
    return payload, ok
