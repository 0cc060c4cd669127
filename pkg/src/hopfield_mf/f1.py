"""Closed forms for the constant activation ``f = 1`` with ``g(x) = -x``.

Here the interaction kernel is the constant ``sigma^2`` and everything is
Gaussian.  The functions below are exact; the two simulators produce the
annealed (effective-interaction) and quenched (random constant input)
versions of the dynamics for Monte Carlo comparison.
"""

import math

import numpy as np

from . import rng
from .model import InitialLaw, ModelError, ModelSpec, TimeGrid, TrajectoryBatch, euler


def ktilde_f1(t, sigma, lam):
    """``sigma^2 lam^2 / (lam^2 + sigma^2 t)``."""
    t = np.asarray(t, dtype=np.float64)
    s2, l2 = sigma * sigma, lam * lam
    return s2 * l2 / (l2 + s2 * t)


def h_f1(t, s, sigma, lam):
    """Resolvent ``sigma^2 / (lam^2 + sigma^2 s)`` for ``s <= t``, else 0."""
    t, s = np.broadcast_arrays(np.asarray(t, dtype=np.float64), np.asarray(s, dtype=np.float64))
    s2 = sigma * sigma
    out = np.where(s <= t, s2 / (lam * lam + s2 * s), 0.0)
    return out[()] if out.ndim == 0 else out


def mean_f1(t, J, m0):
    """``J + (m0 - J) e^{-t}``."""
    return J + (m0 - J) * np.exp(-np.asarray(t, dtype=np.float64))


def var_f1(t, varG, varX0, lam):
    """Variance of ``X_t``: ``varG + lam^2/2 - 2 varG e^{-t} + (varG + varX0 - lam^2/2) e^{-2t}``."""
    e = np.exp(-np.asarray(t, dtype=np.float64))
    h = 0.5 * lam * lam
    return varG + h - 2.0 * varG * e + (varG + varX0 - h) * e * e


def effective_var_f1(t, sigma, lam):
    """Variance ``t sigma^4 / (lam^2 + sigma^2 t)`` of the effective interaction."""
    t = np.asarray(t, dtype=np.float64)
    s2 = sigma * sigma
    return t * s2 * s2 / (lam * lam + s2 * t)


def var_c_f1(t, sigma, lam):
    """Variance ``t (lam^2 + sigma^2 t)`` of the interaction noise ``C_t``."""
    t = np.asarray(t, dtype=np.float64)
    return t * (lam * lam + sigma * sigma * t)


def f1_model(J, sigma, lam):
    return ModelSpec(drift="H", activation="constant_one", J=J, sigma=sigma, lam=lam, alpha=1.0)


def _check(P, sigma, lam):
    if P < 1:
        raise ModelError("P must be >= 1")
    if not sigma > 0 or lam == 0:
        raise ModelError("need sigma > 0 and lam != 0")


def simulate_annealed_f1(J, sigma, lam, grid: TimeGrid, law: InitialLaw, P, seed,
                         backend=None) -> TrajectoryBatch:
    """Euler paths of ``dX = (-X + J + lam sigma^2 Z_t) dt + lam dW``,
    ``Z_t = int_0^t dW_s / (lam^2 + sigma^2 s)`` (left-point sums)."""
    _check(P, sigma, lam)
    dt = grid.dt
    dW = rng.normals(rng.derive_key(seed, rng.NOISE, 0), 0, P, grid.L, backend=backend)
    dW *= math.sqrt(dt)
    w = 1.0 / (lam * lam + sigma * sigma * grid.times[:-1])
    Z = np.zeros_like(dW)
    np.cumsum((dW * w)[:, :-1], axis=1, out=Z[:, 1:])
    noise = lam * sigma * sigma * Z * dt + lam * dW
    x0 = law.sample(rng.derive_key(seed, rng.INIT, 0), 0, P, backend=backend)
    X, _ = euler(f1_model(J, sigma, lam), grid, x0, np.full(grid.L, float(J)), noise,
                 backend=backend)
    return TrajectoryBatch(X=X, dW=dW, seed=seed, meta={"dynamics": "annealed"})


def simulate_quenched_f1(J, sigma, lam, grid: TimeGrid, law: InitialLaw, P, seed,
                         backend=None) -> TrajectoryBatch:
    """Euler paths of ``dX = (-X + G) dt + lam dB`` with ``G ~ N(J, sigma^2)`` per path."""
    _check(P, sigma, lam)
    dt = grid.dt
    G = J + sigma * rng.normals(rng.derive_key(seed, rng.WEIGHTS), 0, P, 1, backend=backend)
    dW = rng.normals(rng.derive_key(seed, rng.NOISE, 0), 0, P, grid.L, backend=backend)
    dW *= math.sqrt(dt)
    noise = (G - J) * dt + lam * dW
    x0 = law.sample(rng.derive_key(seed, rng.INIT, 0), 0, P, backend=backend)
    X, _ = euler(f1_model(J, sigma, lam), grid, x0, np.full(grid.L, float(J)), noise,
                 backend=backend)
    return TrajectoryBatch(X=X, dW=dW, seed=seed, meta={"dynamics": "quenched", "G": G[:, 0]})


def path_moments(X):
    """Per-time mean, variance and their standard errors over the rows of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    mean = X.mean(axis=0)
    d = X - mean
    d2 = d * d
    var = d2.sum(axis=0) / (n - 1)
    mu4 = (d2 * d2).mean(axis=0)
    se_var = np.sqrt(np.maximum(mu4 - var * var, 0.0) / n)
    return mean, var, np.sqrt(var / n), se_var
