"""Pure-numpy backend for the counter-based kernels.

Bit-compatible with the compiled backend in ``_core``: both produce the same
Philox-4x64-10 blocks (exact integer arithmetic) and the same canonical
pairwise reduction tree, so every downstream result is independent of which
backend happens to be active.
"""

import numpy as np

PHILOX_M0 = np.uint64(0xD2E7470EE14C6C93)
PHILOX_M1 = np.uint64(0xCA5A826395121157)
WEYL0 = np.uint64(0x9E3779B97F4A7C15)
WEYL1 = np.uint64(0xBB67AE8584CAA73B)

_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)


def _mulhilo(a, b):
    # high and low 64 bits of the 128-bit product, via 32-bit limbs
    lo = a * b
    ah, al = a >> _S32, a & _MASK32
    bh, bl = b >> _S32, b & _MASK32
    t = ah * bl + ((al * bl) >> _S32)
    u = al * bh + (t & _MASK32)
    hi = ah * bh + (t >> _S32) + (u >> _S32)
    return hi, lo


def philox4x64(key0, key1, c0, c1):
    """Philox-4x64-10 blocks for counters (c0[i], c1[i], 0, 0).

    Returns an (n, 4) uint64 array, one block per counter pair. The third
    and fourth counter words are fixed at zero; two words of counter space
    (step, stream) are plenty here and keep call sites simple.
    """
    c0 = np.ascontiguousarray(c0, dtype=np.uint64)
    c1 = np.ascontiguousarray(c1, dtype=np.uint64)
    if c0.shape != c1.shape or c0.ndim != 1:
        raise ValueError("counter arrays must be equal-length 1-D")
    n = c0.shape[0]
    with np.errstate(over="ignore"):
        k0 = np.uint64(key0)
        k1 = np.uint64(key1)
        x0 = c0.copy()
        x1 = c1.copy()
        x2 = np.zeros(n, dtype=np.uint64)
        x3 = np.zeros(n, dtype=np.uint64)
        for _ in range(10):
            hi0, lo0 = _mulhilo(PHILOX_M0, x0)
            hi1, lo1 = _mulhilo(PHILOX_M1, x2)
            x0, x1, x2, x3 = hi1 ^ x1 ^ k0, lo1, hi0 ^ x3 ^ k1, lo0
            k0 = k0 + WEYL0
            k1 = k1 + WEYL1
    out = np.empty((n, 4), dtype=np.uint64)
    out[:, 0] = x0
    out[:, 1] = x1
    out[:, 2] = x2
    out[:, 3] = x3
    return out


def pairwise_sum(x):
    """Sum of a float64 vector over the canonical power-of-two reduction tree.

    The tree is fixed by the element indices alone (zero-padded to the next
    power of two, then halved level by level), so the result is a pure
    function of the input vector, independent of any chunking upstream.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.size
    if n == 0:
        return 0.0
    m = 1
    while m < n:
        m <<= 1
    buf = np.zeros(m, dtype=np.float64)
    buf[:n] = x
    while m > 1:
        m >>= 1
        buf = buf[0 : 2 * m : 2] + buf[1 : 2 * m : 2]
    return float(buf[0])
