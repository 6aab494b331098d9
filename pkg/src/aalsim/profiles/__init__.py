"""Signal-processing kernels behind the FEC-lookaside and high-PHY-inline profiles."""

from .crc import CRC16_INIT, CRC16_POLY, crc16, crc_attach, crc_check
from .fec import (CodeSpec, decode_blocks, encode_blocks, fec_decode, fec_encode,
                  load_generator_matrix)
from .modulation import Modulation, constellation, demodulate, modulate
from .pipeline import (DL_STAGES, NUM_STAGES, UL_STAGES, PipelineConfig, bytes_to_iq,
                       dl_pipeline, iq_to_bytes, ul_pipeline)
from .scrambler import ScramblerSpec, descramble, scramble

__all__ = [
    "CRC16_INIT", "CRC16_POLY", "crc16", "crc_attach", "crc_check",
    "CodeSpec", "decode_blocks", "encode_blocks", "fec_decode", "fec_encode",
    "load_generator_matrix",
    "Modulation", "constellation", "demodulate", "modulate",
    "DL_STAGES", "NUM_STAGES", "UL_STAGES", "PipelineConfig", "bytes_to_iq",
    "dl_pipeline", "iq_to_bytes", "ul_pipeline",
    "ScramblerSpec", "descramble", "scramble",
]
