from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import InvalidArgument

# x^7 + x^6 + 1
DEFAULT_TAPS = 0b1100000


@dataclass(frozen=True)
class ScramblerSpec:
    seed: int = 0b1011101
    lfsr_taps: int = DEFAULT_TAPS

    def __post_init__(self):
        if not 0 < self.seed < 128:
            raise InvalidArgument(f"scrambler seed must be a nonzero 7-bit value, got {self.seed}")
        if not 0 < self.lfsr_taps < 128:
            raise InvalidArgument(f"lfsr_taps must be a nonzero 7-bit mask, got {self.lfsr_taps}")


def scrambling_sequence(n, spec):
    return kernels.lfsr_sequence(int(n), spec.lfsr_taps, spec.seed)


def scramble(bits, spec):
    """XOR ``bits`` with the LFSR sequence; applying it twice is the identity."""
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    return bits ^ scrambling_sequence(bits.size, spec)


descramble = scramble
