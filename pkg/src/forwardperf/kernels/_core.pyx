# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled backend for the counter-based kernels.

Bit-identical twin of ``reference``: same Philox-4x64-10 blocks, same
canonical pairwise reduction tree. Exists purely for speed.
"""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport uint64_t
from libc.stdlib cimport free, malloc

cnp.import_array()

cdef extern from *:
    ctypedef unsigned long long u128 "unsigned __int128"

cdef uint64_t M0 = 0xD2E7470EE14C6C93ULL
cdef uint64_t M1 = 0xCA5A826395121157ULL
cdef uint64_t W0 = 0x9E3779B97F4A7C15ULL
cdef uint64_t W1 = 0xBB67AE8584CAA73BULL


cdef inline void _block(uint64_t key0, uint64_t key1, uint64_t c0, uint64_t c1,
                        uint64_t* out) noexcept nogil:
    cdef uint64_t x0 = c0, x1 = c1, x2 = 0, x3 = 0
    cdef uint64_t k0 = key0, k1 = key1
    cdef uint64_t hi0, lo0, hi1, lo1, n0, n2
    cdef u128 p
    cdef int r
    for r in range(10):
        p = <u128> M0 * <u128> x0
        hi0 = <uint64_t> (p >> 64)
        lo0 = <uint64_t> p
        p = <u128> M1 * <u128> x2
        hi1 = <uint64_t> (p >> 64)
        lo1 = <uint64_t> p
        n0 = hi1 ^ x1 ^ k0
        n2 = hi0 ^ x3 ^ k1
        x0 = n0
        x1 = lo1
        x2 = n2
        x3 = lo0
        k0 = k0 + W0
        k1 = k1 + W1
    out[0] = x0
    out[1] = x1
    out[2] = x2
    out[3] = x3


def philox4x64(key0, key1, c0, c1):
    """Philox-4x64-10 blocks for counters (c0[i], c1[i], 0, 0); (n, 4) uint64."""
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] a0 = np.ascontiguousarray(c0, dtype=np.uint64)
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] a1 = np.ascontiguousarray(c1, dtype=np.uint64)
    if a0.shape[0] != a1.shape[0]:
        raise ValueError("counter arrays must be equal-length 1-D")
    cdef Py_ssize_t n = a0.shape[0]
    cdef cnp.ndarray[cnp.uint64_t, ndim=2] out = np.empty((n, 4), dtype=np.uint64)
    cdef uint64_t k0 = <uint64_t> int(key0)
    cdef uint64_t k1 = <uint64_t> int(key1)
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            _block(k0, k1, a0[i], a1[i], &out[i, 0])
    return out


def pairwise_sum(x):
    """Canonical power-of-two pairwise sum; matches reference.pairwise_sum bitwise."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0]
    if n == 0:
        return 0.0
    cdef Py_ssize_t m = 1
    while m < n:
        m <<= 1
    cdef double* buf = <double*> malloc(m * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef Py_ssize_t i
    cdef double res
    with nogil:
        for i in range(n):
            buf[i] = a[i]
        for i in range(n, m):
            buf[i] = 0.0
        while m > 1:
            m >>= 1
            for i in range(m):
                buf[i] = buf[2 * i] + buf[2 * i + 1]
        res = buf[0]
        free(buf)
    return res
