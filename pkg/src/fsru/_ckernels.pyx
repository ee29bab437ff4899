# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: in-place radix-2 FFT over the rows of a 2-D real pair,
and the direct O(L^2) circular convolution used as the frequency-domain oracle."""

from libc.math cimport cos, sin, M_PI

import numpy as np

cdef Py_ssize_t BLOCK = 32  # columns per scratch block


def fft_inplace(double[:, ::1] re, double[:, ::1] im, bint inverse=False):
    """Unnormalized transform along axis 0, every column independently.

    ``re.shape[0]`` must be a power of two; the caller checks. Columns are
    copied in blocks into a small contiguous scratch pair (bit-reversed on the
    way in), so every stage works in cache instead of on power-of-two strides.
    """
    cdef Py_ssize_t n = re.shape[0]
    cdef Py_ssize_t cols = re.shape[1]
    cdef Py_ssize_t i, j, bit, c, h, start, k, stride, a, b, c0, w, block
    cdef double tr, ti, wr, wi, sign
    if n < 2:
        return
    sign = 1.0 if inverse else -1.0
    tw = np.empty((2, n // 2), dtype=np.float64)
    cdef double[:, ::1] tw_v = tw
    for k in range(n // 2):
        tw_v[0, k] = cos(2.0 * M_PI * k / n)
        tw_v[1, k] = sign * sin(2.0 * M_PI * k / n)
    rev = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] rev_v = rev
    j = 0
    rev_v[0] = 0
    for i in range(1, n):
        bit = n >> 1
        while j & bit:
            j ^= bit
            bit >>= 1
        j ^= bit
        rev_v[i] = j

    block = min(cols, BLOCK)
    sr_arr = np.empty((n, block), dtype=np.float64)
    si_arr = np.empty((n, block), dtype=np.float64)
    cdef double[:, ::1] sr = sr_arr
    cdef double[:, ::1] si = si_arr

    for c0 in range(0, cols, block):
        w = min(block, cols - c0)
        for i in range(n):
            j = rev_v[i]
            for c in range(w):
                sr[i, c] = re[j, c0 + c]
                si[i, c] = im[j, c0 + c]
        h = 1
        while h < n:
            stride = n // (2 * h)
            for start in range(0, n, 2 * h):
                for k in range(h):
                    wr = tw_v[0, k * stride]
                    wi = tw_v[1, k * stride]
                    a = start + k
                    b = a + h
                    for c in range(w):
                        tr = sr[b, c] * wr - si[b, c] * wi
                        ti = sr[b, c] * wi + si[b, c] * wr
                        sr[b, c] = sr[a, c] - tr
                        si[b, c] = si[a, c] - ti
                        sr[a, c] = sr[a, c] + tr
                        si[a, c] = si[a, c] + ti
            h *= 2
        for i in range(n):
            for c in range(w):
                re[i, c0 + c] = sr[i, c]
                im[i, c0 + c] = si[i, c]


def circular_conv_direct(double[:, ::1] x, double[:, ::1] kernel):
    """out[s, c] = sum_t kernel[t, c] * x[(s - t) mod L, c]."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t cols = x.shape[1]
    cdef Py_ssize_t s, t, c, src
    out = np.zeros((n, cols), dtype=np.float64)
    cdef double[:, ::1] o = out
    for s in range(n):
        for t in range(n):
            src = s - t
            if src < 0:
                src += n
            for c in range(cols):
                o[s, c] += kernel[t, c] * x[src, c]
    return out
