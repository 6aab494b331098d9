"""QPSK and 16-QAM mapping with unit average power, hard-decision demapping.

IQ streams are 1-D ``complex128`` arrays; ``real`` is the in-phase and
``imag`` the quadrature component of each sample.
"""

from enum import Enum

import numpy as np

from ..errors import LengthNotDivisible

_SQRT2 = np.sqrt(2.0)
_SQRT10 = np.sqrt(10.0)


class Modulation(str, Enum):
    QPSK = "qpsk"
    QAM16 = "qam16"

    @property
    def bits_per_symbol(self):
        return 2 if self is Modulation.QPSK else 4


def _groups(bits, scheme):
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    bps = scheme.bits_per_symbol
    if bits.size % bps:
        raise LengthNotDivisible(
            f"{bits.size} bits is not a multiple of {bps} for {scheme.value}"
        )
    return bits.reshape(-1, bps).astype(np.float64)


def modulate(bits, scheme):
    scheme = Modulation(scheme)
    b = _groups(bits, scheme)
    if scheme is Modulation.QPSK:
        i = (1 - 2 * b[:, 0]) / _SQRT2
        q = (1 - 2 * b[:, 1]) / _SQRT2
    else:
        i = (1 - 2 * b[:, 0]) * (2 - (1 - 2 * b[:, 2])) / _SQRT10
        q = (1 - 2 * b[:, 1]) * (2 - (1 - 2 * b[:, 3])) / _SQRT10
    return i + 1j * q


def demodulate(iq, scheme):
    scheme = Modulation(scheme)
    iq = np.asarray(iq, dtype=np.complex128).reshape(-1)
    i, q = iq.real, iq.imag
    if scheme is Modulation.QPSK:
        out = np.stack([i < 0, q < 0], axis=1)
    else:
        edge = 2 / _SQRT10
        out = np.stack([i < 0, q < 0, np.abs(i) > edge, np.abs(q) > edge], axis=1)
    return out.astype(np.uint8).reshape(-1)


def constellation(scheme):
    """Every constellation point, indexed by the integer value of its bits (MSB first)."""
    scheme = Modulation(scheme)
    bps = scheme.bits_per_symbol
    idx = np.arange(2 ** bps)
    bits = ((idx[:, None] >> np.arange(bps - 1, -1, -1)) & 1).astype(np.uint8)
    return modulate(bits.reshape(-1), scheme)
