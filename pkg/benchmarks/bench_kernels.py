"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Every workload is first checked for identical output across backends, then
timed with ``timeit`` (best of ``--repeat``).
"""

import argparse
import json
import sys
import timeit

import numpy as np

from aalsim.kernels import _pykernels
from aalsim.profiles.crc import CRC16_INIT, CRC16_POLY
from aalsim.profiles.fec import CodeSpec

try:
    from aalsim.kernels import _ckernels
except ImportError:
    _ckernels = None


def workloads(rng):
    code = CodeSpec.hamming74()
    msgs = rng.integers(0, 2, (4096, code.k), dtype=np.uint8)
    words = (msgs @ code.G % 2).astype(np.uint8)
    flip = rng.integers(0, code.n, len(words))
    words[np.arange(len(words)), flip] ^= 1
    crc_in = rng.integers(0, 2, 8 * 4096, dtype=np.uint8)
    return {
        "crc16 (32 kbit)": lambda k: k.crc16_bits(crc_in, CRC16_POLY, CRC16_INIT),
        "lfsr (64 kbit)": lambda k: k.lfsr_sequence(65536, 0b1100000, 0b1011101),
        "bitflip (4096 x (7,4))": lambda k: k.bitflip_decode(code.H, words, 8),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", metavar="PATH")
    args = ap.parse_args(argv)

    backends = {"python": _pykernels}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    else:
        print("compiled backend not built; timing the fallback only", file=sys.stderr)

    rows = []
    for name, fn in workloads(np.random.default_rng(0)).items():
        outs = {b: fn(mod) for b, mod in backends.items()}
        ref = outs["python"]
        assert all(_same(ref, o) for o in outs.values()), f"backends disagree on {name}"
        times = {}
        for b, mod in backends.items():
            number = 1 if b == "python" else 20
            best = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat))
            times[b] = best / number
        speedup = times["python"] / times["cython"] if "cython" in times else None
        rows.append({"kernel": name, **{f"{b}_s": t for b, t in times.items()},
                     "speedup": speedup})

    print(f"{'kernel':<26}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}")
    for r in rows:
        cy = r.get("cython_s")
        print(f"{r['kernel']:<26}{r['python_s'] * 1e3:>14.3f}"
              f"{(cy * 1e3 if cy else float('nan')):>14.3f}"
              f"{(r['speedup'] or float('nan')):>10.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
