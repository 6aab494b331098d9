# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled bit-level kernels. Mirrors ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline int _parity7(int x) nogil:
    x ^= x >> 4
    x ^= x >> 2
    x ^= x >> 1
    return x & 1


def crc16_bits(const unsigned char[::1] bits, int poly, int init):
    cdef unsigned int crc = init & 0xFFFF
    cdef unsigned int top
    cdef Py_ssize_t i, n = bits.shape[0]
    with nogil:
        for i in range(n):
            top = ((crc >> 15) & 1) ^ (bits[i] & 1)
            crc = (crc << 1) & 0xFFFF
            if top:
                crc ^= poly
    return int(crc)


def lfsr_sequence(Py_ssize_t n, int taps, int seed):
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out = np.empty(n, dtype=np.uint8)
    cdef unsigned char[::1] o = out
    cdef int state = seed & 0x7F
    cdef int fb
    cdef Py_ssize_t i
    taps &= 0x7F
    with nogil:
        for i in range(n):
            fb = _parity7(state & taps)
            o[i] = fb
            state = ((state << 1) | fb) & 0x7F
    return out


def bitflip_decode(H, words, int max_iters):
    cdef cnp.ndarray h = np.ascontiguousarray(H, dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] w = np.array(words, dtype=np.uint8, copy=True, ndmin=2)
    cdef Py_ssize_t m = h.shape[0], n = h.shape[1], nwords = w.shape[0]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] conv = np.zeros(nwords, dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] flips = np.zeros(nwords, dtype=np.int64)
    cdef const unsigned char[:, ::1] hv = h
    cdef unsigned char[:, ::1] wv = w
    cdef unsigned char[::1] cv = conv
    cdef cnp.int64_t[::1] fv = flips
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] synd_arr = np.zeros(m, dtype=np.uint8)
    cdef unsigned char[::1] synd = synd_arr
    cdef Py_ssize_t r, c, i, best
    cdef int s, any_bad, it, score, best_score
    with nogil:
        for r in range(nwords):
            any_bad = 0
            for c in range(m):
                s = 0
                for i in range(n):
                    if hv[c, i]:
                        s ^= wv[r, i]
                synd[c] = s
                any_bad |= s
            it = 0
            while any_bad and it < max_iters:
                best = 0
                best_score = -m - 1
                for i in range(n):
                    score = 0
                    for c in range(m):
                        if hv[c, i]:
                            if synd[c]:
                                score += 1
                            else:
                                score -= 1
                    if score > best_score:
                        best = i
                        best_score = score
                if best_score <= 0:
                    break
                wv[r, best] ^= 1
                any_bad = 0
                for c in range(m):
                    if hv[c, best]:
                        synd[c] ^= 1
                    any_bad |= synd[c]
                it += 1
            cv[r] = 1 if not any_bad else 0
            fv[r] = it
    return w, conv.astype(bool), flips
