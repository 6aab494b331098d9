"""Bit-level hot kernels with a compiled backend and a pure-Python fallback.

The compiled extension (``_ckernels``, built from Cython) is used when it can
be imported. Setting ``AALSIM_PURE_PYTHON=1`` forces the fallback, which is
also what runs when the package is installed without a C compiler.

``BACKEND`` names the active backend; ``backends()`` returns every backend
that loaded, for equivalence testing and benchmarking.
"""

import os

from . import _pykernels

_compiled = None
if os.environ.get("AALSIM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

_active = _compiled if _compiled is not None else _pykernels
BACKEND = "cython" if _compiled is not None else "python"

crc16_bits = _active.crc16_bits
lfsr_sequence = _active.lfsr_sequence
bitflip_decode = _active.bitflip_decode


def backends():
    found = {"python": _pykernels}
    if _compiled is not None:
        found["cython"] = _compiled
    return found


__all__ = ["BACKEND", "backends", "crc16_bits", "lfsr_sequence", "bitflip_decode"]
