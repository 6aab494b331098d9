"""Pure-Python implementations of the bit-level hot kernels.

These are the reference fallback for :mod:`aalsim.kernels._ckernels` and must
produce identical outputs for identical inputs.
"""

import numpy as np


def crc16_bits(bits, poly, init):
    """Bit-serial CRC-16 (MSB first, no reflection, no final XOR)."""
    crc = init & 0xFFFF
    for b in bits.tolist():
        top = ((crc >> 15) & 1) ^ (b & 1)
        crc = (crc << 1) & 0xFFFF
        if top:
            crc ^= poly
    return crc


def lfsr_sequence(n, taps, seed):
    """Fibonacci LFSR output over a 7-bit register.

    Each step emits the parity of ``state & taps`` and shifts it in at the
    low end.
    """
    out = bytearray(n)
    state = seed & 0x7F
    taps &= 0x7F
    for i in range(n):
        fb = bin(state & taps).count("1") & 1
        out[i] = fb
        state = ((state << 1) | fb) & 0x7F
    return np.frombuffer(bytes(out), dtype=np.uint8).copy()


def bitflip_decode(H, words, max_iters):
    """Single-bit-per-iteration weighted bit flipping.

    For every word the bit with the largest (unsatisfied - satisfied) check
    count is flipped until the syndrome clears, ``max_iters`` flips have been
    spent, or no bit has a positive score (the decoder is stuck). Ties go to
    the lowest bit index.

    Returns ``(decoded, converged, flips)``.
    """
    H = np.ascontiguousarray(H, dtype=np.uint8)
    words = np.array(words, dtype=np.uint8, copy=True)
    if words.ndim == 1:
        words = words[None, :]
    m, n = H.shape
    rows = [np.flatnonzero(H[c]).tolist() for c in range(m)]
    cols = [np.flatnonzero(H[:, i]).tolist() for i in range(n)]
    nwords = words.shape[0]
    converged = np.zeros(nwords, dtype=bool)
    flips = np.zeros(nwords, dtype=np.int64)
    for w in range(nwords):
        word = words[w].tolist()
        synd = [0] * m
        for c in range(m):
            s = 0
            for i in rows[c]:
                s ^= word[i]
            synd[c] = s
        it = 0
        while any(synd) and it < max_iters:
            best, best_score = 0, None
            for i in range(n):
                score = 0
                for c in cols[i]:
                    score += 1 if synd[c] else -1
                if best_score is None or score > best_score:
                    best, best_score = i, score
            if best_score <= 0:
                break
            word[best] ^= 1
            for c in cols[best]:
                synd[c] ^= 1
            it += 1
        words[w] = word
        converged[w] = not any(synd)
        flips[w] = it
    return words, converged, flips
