"""Systematic linear block codes with bit-flipping decoding.

A code is described by a systematic generator ``G = [I_k | P]``; the
parity-check matrix is ``H = [P^T | I_(n-k)]``.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import kernels
from ..errors import InvalidArgument, LengthMismatch

HAMMING74_PARITY = np.array(
    [[1, 1, 0],
     [1, 0, 1],
     [0, 1, 1],
     [1, 1, 1]],
    dtype=np.uint8,
)


@dataclass(frozen=True, eq=False)
class CodeSpec:
    kind: str
    G: np.ndarray = field(repr=False)
    max_decode_iters: int = 8

    def __post_init__(self):
        G = np.array(self.G, dtype=np.uint8)
        if G.ndim != 2:
            raise InvalidArgument("generator matrix must be 2-D")
        k, n = G.shape
        if not n > k >= 1:
            raise InvalidArgument(f"need n > k >= 1, got n={n}, k={k}")
        if not np.all((G == 0) | (G == 1)):
            raise InvalidArgument("generator matrix must be binary")
        if not np.array_equal(G[:, :k], np.eye(k, dtype=np.uint8)):
            raise InvalidArgument("generator matrix is not systematic [I_k | P]")
        if self.max_decode_iters < 0:
            raise InvalidArgument("max_decode_iters must be >= 0")
        G.setflags(write=False)
        object.__setattr__(self, "G", G)
        H = np.concatenate([G[:, k:].T, np.eye(n - k, dtype=np.uint8)], axis=1)
        H.setflags(write=False)
        object.__setattr__(self, "H", H)

    @property
    def k(self):
        return self.G.shape[0]

    @property
    def n(self):
        return self.G.shape[1]

    @property
    def parity(self):
        return self.G[:, self.k:]

    @classmethod
    def hamming74(cls, max_decode_iters=8):
        G = np.concatenate([np.eye(4, dtype=np.uint8), HAMMING74_PARITY], axis=1)
        return cls("Hamming74", G, max_decode_iters)

    @classmethod
    def from_generator(cls, G, max_decode_iters=8):
        return cls("GeneratorMatrix", G, max_decode_iters)

    def __eq__(self, other):
        if not isinstance(other, CodeSpec):
            return NotImplemented
        return (self.kind == other.kind and self.max_decode_iters == other.max_decode_iters
                and np.array_equal(self.G, other.G))

    def __hash__(self):
        return hash((self.kind, self.G.tobytes(), self.G.shape, self.max_decode_iters))


def load_generator_matrix(path):
    """Read a generator matrix from text: one row per line of '0'/'1' chars.

    Blank lines and lines starting with '#' are ignored.
    """
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if set(line) - {"0", "1"}:
            raise InvalidArgument(f"{path}:{lineno}: expected only 0/1 characters")
        rows.append([int(c) for c in line])
    if not rows or len({len(r) for r in rows}) != 1:
        raise InvalidArgument(f"{path}: rows must be nonempty and of equal length")
    return np.array(rows, dtype=np.uint8)


def encode_blocks(msgs, code):
    """Encode a (B, k) array of message blocks into (B, n) codewords."""
    msgs = np.asarray(msgs, dtype=np.uint8)
    if msgs.ndim != 2 or msgs.shape[1] != code.k:
        raise LengthMismatch(f"expected blocks of {code.k} bits, got shape {msgs.shape}")
    parity = (msgs.astype(np.int64) @ code.parity.astype(np.int64)) & 1
    return np.concatenate([msgs, parity.astype(np.uint8)], axis=1)


def decode_blocks(words, code):
    """Bit-flip decode a (B, n) array. Returns ``(msgs, converged)``."""
    words = np.asarray(words, dtype=np.uint8)
    if words.ndim != 2 or words.shape[1] != code.n:
        raise LengthMismatch(f"expected blocks of {code.n} bits, got shape {words.shape}")
    decoded, converged, _ = kernels.bitflip_decode(code.H, words, code.max_decode_iters)
    return np.ascontiguousarray(decoded[:, :code.k]), np.asarray(converged, dtype=bool)


def fec_encode(msg, code):
    msg = np.asarray(msg, dtype=np.uint8).reshape(-1)
    if msg.size != code.k:
        raise LengthMismatch(f"message must be {code.k} bits, got {msg.size}")
    return encode_blocks(msg[None, :], code)[0]


def fec_decode(received, code):
    """Returns ``(msg, converged)``; ``msg`` is best-effort when not converged."""
    received = np.asarray(received, dtype=np.uint8).reshape(-1)
    if received.size != code.n:
        raise LengthMismatch(f"received word must be {code.n} bits, got {received.size}")
    msgs, conv = decode_blocks(received[None, :], code)
    return msgs[0], bool(conv[0])


def syndrome(word, code):
    return (code.H.astype(np.int64) @ np.asarray(word, dtype=np.int64)) & 1
