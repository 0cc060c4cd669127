"""Counter-based random streams.

Every draw is a pure function of ``(key, stream, column)``: trajectories are
streams and time steps are columns, so a batch split into chunks, run in any
order or on any number of workers reproduces the same numbers.
"""

import numpy as np

from . import _backend

_MASK = (1 << 64) - 1

# purposes folded into derived keys
NOISE = 1
INIT = 2
WEIGHTS = 3
BERNOULLI = 4


def _mix(z):
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_key(seed, *tags):
    """Fold integer tags into a 64-bit key."""
    k = _mix(int(seed) + 0x9E3779B97F4A7C15)
    for t in tags:
        k = _mix(k ^ _mix((int(t) + 0x9E3779B97F4A7C15) & _MASK))
    return k


def normals(key, stream0, n_streams, n_cols, col0=0, backend=None):
    """Standard normals, shape ``(n_streams, n_cols)``."""
    return _backend.get(backend).fill_normals(key, stream0, n_streams, col0, n_cols)


def uniforms(key, stream0, n_streams, n_cols, col0=0, backend=None):
    """Uniforms on [0, 1), shape ``(n_streams, n_cols)``."""
    return _backend.get(backend).fill_uniforms(key, stream0, n_streams, col0, n_cols)
