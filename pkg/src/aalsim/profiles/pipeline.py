"""Simplified high-PHY chain: bytes -> CRC -> FEC -> scrambling -> IQ and back.

Both directions are expressed as an ordered list of :class:`Stage` objects so
that the simulator can place each stage on the host or on the accelerator.
Every stage consumes and produces a single numpy array. The uplink
``crc_check`` stage appends its verdict as one extra trailing element (1 = ok)
which ``pack_bytes`` carries through.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidArgument, LengthNotDivisible
from .crc import crc_attach, crc_check
from .fec import CodeSpec, decode_blocks, encode_blocks
from .modulation import Modulation, demodulate, modulate
from .scrambler import ScramblerSpec, scramble

IQ_SCALE = 1 << 14
IQ_SAMPLE_BYTES = 4


@dataclass(frozen=True)
class PipelineConfig:
    code: CodeSpec = field(default_factory=CodeSpec.hamming74)
    scrambler: ScramblerSpec = field(default_factory=ScramblerSpec)
    modulation: Modulation = Modulation.QPSK
    crc: str = "crc16_xmodem"

    def __post_init__(self):
        object.__setattr__(self, "modulation", Modulation(self.modulation))
        if self.crc != "crc16_xmodem":
            raise InvalidArgument(f"unsupported crc {self.crc!r}")


@dataclass(frozen=True)
class Stage:
    name: str
    fn: object

    def __call__(self, data, cfg):
        return self.fn(data, cfg)


# -- downlink stages ----------------------------------------------------------

def _unpack_bits(data, cfg):
    data = np.asarray(data, dtype=np.uint8).reshape(-1)
    if data.size == 0:
        raise InvalidArgument("transport block must be nonempty")
    return np.unpackbits(data)


def _crc_attach(bits, cfg):
    return crc_attach(bits)


def _segment(bits, cfg):
    k = cfg.code.k
    if bits.size % k:
        raise LengthNotDivisible(f"{bits.size} bits do not split into {k}-bit code blocks")
    return bits.reshape(-1, k)


def _fec_encode(blocks, cfg):
    return encode_blocks(blocks, cfg.code)


def _scramble(words, cfg):
    return scramble(words.reshape(-1), cfg.scrambler)


def _modulate(bits, cfg):
    return modulate(bits, cfg.modulation)


# -- uplink stages ------------------------------------------------------------

def _demodulate(iq, cfg):
    return demodulate(iq, cfg.modulation)


def _descramble(bits, cfg):
    return scramble(bits, cfg.scrambler)


def _fec_decode(bits, cfg):
    n = cfg.code.n
    if bits.size % n:
        raise LengthNotDivisible(f"{bits.size} bits do not split into {n}-bit codewords")
    msgs, _ = decode_blocks(bits.reshape(-1, n), cfg.code)
    return msgs


def _desegment(blocks, cfg):
    return np.ascontiguousarray(blocks).reshape(-1)


def _crc_check(bits, cfg):
    payload, ok = crc_check(bits)
    return np.append(payload, np.uint8(ok))


def _pack_bytes(bits_and_flag, cfg):
    bits, ok = bits_and_flag[:-1], bits_and_flag[-1]
    if bits.size % 8:
        raise LengthNotDivisible(f"{bits.size} bits is not a whole number of bytes")
    return np.append(np.packbits(bits), np.uint8(ok))


DL_STAGES = (
    Stage("unpack_bits", _unpack_bits),
    Stage("crc_attach", _crc_attach),
    Stage("segment", _segment),
    Stage("fec_encode", _fec_encode),
    Stage("scramble", _scramble),
    Stage("modulate", _modulate),
)

UL_STAGES = (
    Stage("demodulate", _demodulate),
    Stage("descramble", _descramble),
    Stage("fec_decode", _fec_decode),
    Stage("desegment", _desegment),
    Stage("crc_check", _crc_check),
    Stage("pack_bytes", _pack_bytes),
)

NUM_STAGES = len(DL_STAGES)


def run_stages(stages, data, cfg):
    for stage in stages:
        data = stage(data, cfg)
    return data


def dl_pipeline(tb, cfg):
    """Transport block bytes -> IQ samples (complex128)."""
    return run_stages(DL_STAGES, np.frombuffer(bytes(tb), dtype=np.uint8), cfg)


def split_ul_output(out):
    return bytes(out[:-1].tobytes()), bool(out[-1])


def ul_pipeline(iq, cfg):
    """IQ samples -> ``(tb_bytes, crc_ok)``."""
    return split_ul_output(run_stages(UL_STAGES, np.asarray(iq, dtype=np.complex128), cfg))


def iq_to_bytes(iq):
    """Big-endian int16 I/Q pairs, full scale = 2**14."""
    iq = np.asarray(iq, dtype=np.complex128).reshape(-1)
    pairs = np.empty(2 * iq.size, dtype=np.float64)
    pairs[0::2] = iq.real
    pairs[1::2] = iq.imag
    return np.round(pairs * IQ_SCALE).astype(">i2").tobytes()


def bytes_to_iq(data):
    if len(data) % IQ_SAMPLE_BYTES:
        raise LengthNotDivisible(f"{len(data)} bytes is not a whole number of IQ samples")
    pairs = np.frombuffer(bytes(data), dtype=">i2").astype(np.float64) / IQ_SCALE
    return pairs[0::2] + 1j * pairs[1::2]
