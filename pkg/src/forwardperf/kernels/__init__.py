"""Counter-based random kernels with interchangeable backends.

Two backends implement the integer-exact core (Philox-4x64-10 block
generation and the canonical pairwise reduction): a compiled Cython module
and a pure-numpy reference. They are bit-identical by construction; the
compiled one is picked when available. Set ``FORWARDPERF_KERNEL`` to
``python`` or ``compiled`` to force a choice.

Everything random in the package flows through ``gaussian_field``: the
increment at (stream, step) is a fixed function of (seed, stream, step)
alone, so results can never depend on execution order or on how work was
chunked across workers.
"""

import os

import numpy as np

from . import reference

_FORCED = os.environ.get("FORWARDPERF_KERNEL", "").strip().lower()

if _FORCED == "python":
    _impl = reference
    BACKEND = "python"
elif _FORCED in ("", "compiled"):
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:
        if _FORCED == "compiled":
            raise ImportError(
                "FORWARDPERF_KERNEL=compiled but the compiled kernel module "
                "is not built; reinstall the package or drop the override"
            )
        _impl = reference
        BACKEND = "python"
else:
    raise ValueError(
        f"FORWARDPERF_KERNEL={_FORCED!r} not understood (use 'python' or 'compiled')"
    )


def philox4x64(key0, key1, c0, c1):
    """Philox-4x64-10 blocks for counters (c0[i], c1[i], 0, 0); (n, 4) uint64."""
    c0 = np.ascontiguousarray(c0, dtype=np.uint64)
    c1 = np.ascontiguousarray(c1, dtype=np.uint64)
    return _impl.philox4x64(key0, key1, c0, c1)


def pairwise_sum(x):
    """Deterministic sum over the canonical power-of-two reduction tree."""
    return _impl.pairwise_sum(np.ascontiguousarray(x, dtype=np.float64))


def pairwise_mean(x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("mean of empty vector")
    return pairwise_sum(x) / x.size


def uniform_open(blocks):
    """Map uint64 words to float64 in (0, 1]: ((w >> 11) + 0.5) * 2**-53.

    Never returns 0, so log() downstream is always finite.
    """
    return ((blocks >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def gaussian_field(seed, n_streams, n_steps, stream_offset=0):
    """Two independent standard-normal fields, each (n_streams, n_steps).

    Entry (i, k) depends only on (seed, stream_offset + i, k): one Philox
    block per (stream, step) yields four uniforms, turned into two normals
    by Box-Muller. The transform runs through numpy ufuncs in both backends,
    so the output is bit-identical regardless of backend or chunking.
    """
    if n_streams < 0 or n_steps <= 0:
        raise ValueError("need n_streams >= 0 and n_steps >= 1")
    streams = np.arange(stream_offset, stream_offset + n_streams, dtype=np.uint64)
    c0 = np.tile(np.arange(n_steps, dtype=np.uint64), n_streams)
    c1 = np.repeat(streams, n_steps)
    u = uniform_open(philox4x64(int(seed), 0, c0, c1))
    r1 = np.sqrt(-2.0 * np.log(u[:, 0]))
    r2 = np.sqrt(-2.0 * np.log(u[:, 2]))
    a1 = (2.0 * np.pi) * u[:, 1]
    a2 = (2.0 * np.pi) * u[:, 3]
    z1 = (r1 * np.cos(a1)).reshape(n_streams, n_steps)
    z2 = (r2 * np.cos(a2)).reshape(n_streams, n_steps)
    return z1, z2
