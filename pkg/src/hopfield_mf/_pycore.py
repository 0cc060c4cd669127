"""Pure numpy versions of the hot kernels.

Every function here has a twin with the same signature in the compiled
``_core`` extension.  Both must draw the same random numbers for the same
``(key, stream, column)`` triple and apply the same Euler update, so the two
backends agree to the last few ulps (libm vs numpy transcendental functions
may differ in the final bit).
"""

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
STREAM_SALT = np.uint64(0x632BE59BD9B4E019)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO53 = 1.0 / 9007199254740992.0
_TWO_PI = 2.0 * np.pi

KIND_H = 0
KIND_S = 1
# S-model paths are clamped to A * (1 - BOUNDARY_MARGIN)
BOUNDARY_MARGIN = 1e-6

backend_name = "python"


def mix64(z):
    """SplitMix64 finaliser on a uint64 array (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def stream_keys(key, stream0, n_streams):
    s = np.arange(stream0, stream0 + n_streams, dtype=np.uint64)
    return mix64(np.uint64(key) ^ mix64(s * GOLDEN + STREAM_SALT))


def _bits(sk, counters):
    return mix64(sk[:, None] + (counters[None, :] + np.uint64(1)) * GOLDEN)


def fill_uniforms(key, stream0, n_streams, col0, n_cols):
    sk = stream_keys(key, stream0, n_streams)
    c = np.arange(col0, col0 + n_cols, dtype=np.uint64)
    return (_bits(sk, c) >> np.uint64(11)).astype(np.float64) * _TWO53


def fill_normals(key, stream0, n_streams, col0, n_cols):
    """Box-Muller normals; column ``c`` uses the pair ``c // 2``."""
    sk = stream_keys(key, stream0, n_streams)
    q0 = col0 >> 1
    q1 = (col0 + n_cols - 1) >> 1
    q = np.arange(q0, q1 + 1, dtype=np.uint64)
    two = np.uint64(2)
    b1 = _bits(sk, two * q)
    b2 = _bits(sk, two * q + np.uint64(1))
    u1 = ((b1 >> np.uint64(11)) + np.uint64(1)).astype(np.float64) * _TWO53
    u2 = (b2 >> np.uint64(11)).astype(np.float64) * _TWO53
    del b1, b2
    r = np.sqrt(-2.0 * np.log(u1))
    theta = u2 * _TWO_PI
    z = np.empty((n_streams, 2 * q.size))
    z[:, 0::2] = r * np.cos(theta)
    z[:, 1::2] = r * np.sin(theta)
    off = col0 - 2 * q0
    return np.ascontiguousarray(z[:, off:off + n_cols])


def _drift(x, kind, alpha, A, k):
    if kind == KIND_H:
        return -alpha * x
    return -2.0 * k * x / (A * A - x * x)


def _clamp(xn, kind, A):
    if kind != KIND_S:
        return 0
    bound = A * (1.0 - BOUNDARY_MARGIN)
    out = np.abs(xn) > bound
    n = int(np.count_nonzero(out))
    if n:
        xn[out] = np.copysign(bound, xn[out])
    return n


def euler_paths(x0, drive, noise, kind, alpha, A, k, dt):
    """Explicit Euler over all paths with a time-only deterministic drive.

    ``x[l+1] = x[l] + (g(x[l]) + drive[l]) * dt + noise[:, l]``.
    Returns ``(X, clamps)`` with ``X`` of shape ``(P, L + 1)``.
    """
    noise = np.asarray(noise, dtype=np.float64)
    P, L = noise.shape
    cols = np.empty((L + 1, P))
    cols[0] = x0
    nz = np.ascontiguousarray(noise.T)
    clamps = 0
    for l in range(L):
        x = cols[l]
        xn = x + (_drift(x, kind, alpha, A, k) + drive[l]) * dt + nz[l]
        clamps += _clamp(xn, kind, A)
        cols[l + 1] = xn
    return np.ascontiguousarray(cols.T), clamps


def euler_step(x, drive, noise, kind, alpha, A, k, dt):
    """One Euler step with a per-path drive; returns ``(x_new, clamps)``."""
    xn = x + (_drift(x, kind, alpha, A, k) + drive) * dt + noise
    return xn, _clamp(xn, kind, A)


def gaussian_matvec(key, n, mean, scale, f, row_block=256):
    """``out[i] = sum_j (mean + scale * z(i, j)) * f[j]`` with ``z`` regenerated."""
    f = np.asarray(f, dtype=np.float64)
    out = np.empty(n)
    for i0 in range(0, n, row_block):
        rows = min(row_block, n - i0)
        w = fill_normals(key, i0, rows, 0, n)
        w *= scale
        w += mean
        out[i0:i0 + rows] = w @ f
    return out
