"""Discrete stochastic Volterra equation of the second kind.

Solves, for a causal kernel ``kappa``,

    dB[l] = dW[l] + c[l] dt + dt * sum_{j < l} kappa[l, j] dB[j]

either by forward substitution or through the resolvent kernel.  Paths are
stored as increments; arrays may be one path ``(L,)`` or a batch ``(P, L)``.
"""

import numpy as np
from scipy import linalg

from .kernel_ops import resolvent


def path_values(increments):
    """Cumulative sums with a leading zero: values at ``t_0..t_L``."""
    inc = np.asarray(increments, dtype=np.float64)
    out = np.zeros(inc.shape[:-1] + (inc.shape[-1] + 1,))
    np.cumsum(inc, axis=-1, out=out[..., 1:])
    return out


def _rhs(dW, c, dt):
    dW = np.asarray(dW, dtype=np.float64)
    if c is None:
        return dW
    return dW + np.asarray(c, dtype=np.float64) * dt


def solve_increments(kappa, dW, dt, c=None):
    """Forward substitution; ``kappa[l, l]`` and above are ignored."""
    kappa = np.asarray(kappa, dtype=np.float64)
    L = kappa.shape[0]
    rhs = _rhs(dW, c, dt)
    A = np.eye(L) - dt * np.tril(kappa, -1)
    if rhs.ndim == 1:
        return linalg.solve_triangular(A, rhs, lower=True, unit_diagonal=True)
    # batch: one triangular solve with P right-hand sides
    out = linalg.solve_triangular(A, rhs.T, lower=True, unit_diagonal=True)
    return np.ascontiguousarray(out.T)


def tilde_noise(kappa, dW):
    """Discrete Ito integral ``W~[l] = sum_{j < l} kappa[l, j] dW[j]``."""
    return np.asarray(dW) @ np.tril(kappa, -1).T


def solve_resolvent_form(kappa, dW, dt, c=None, H=None):
    """Closed-form solution through the resolvent kernel ``H``.

    ``dB = dW + dt (W~ + c) + dt^2 H (W~ + c)``, term by term, where
    ``W~`` is :func:`tilde_noise`.  Agrees with :func:`solve_increments`
    to round-off.
    """
    kappa = np.tril(np.asarray(kappa, dtype=np.float64), -1)
    if H is None:
        H = resolvent(kappa, dt)
    dW = np.asarray(dW, dtype=np.float64)
    drive = tilde_noise(kappa, dW)
    if c is not None:
        drive = drive + np.asarray(c, dtype=np.float64)
    return dW + dt * drive + dt * dt * (drive @ H.T)


def reconstruct_p_brownian(dC, m, lam, dt):
    """``dB[l] = (m[l] dt + dC[l]) / lam``."""
    if lam == 0:
        raise ValueError("lam must be nonzero")
    dC = np.asarray(dC, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)[: dC.shape[-1]]
    return (m * dt + dC) / lam
