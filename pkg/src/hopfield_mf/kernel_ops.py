"""Discretised covariance-kernel algebra.

Kernels are sampled on a uniform grid and integrated with left-endpoint
Riemann sums, the same quadrature the Euler scheme uses.  A kernel is a
plain ``ndarray`` ``K[l, j] = K(l dt, j dt)``; the step ``dt`` travels
separately.  Causal kernels ``kappa`` are strictly lower triangular.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import cg

PSD_TOL = 1e-8
DIRECT_SOLVE_MAX = 512
CG_TOL = 1e-10


class NotPSDError(ValueError):
    """Kernel has an eigenvalue below the PSD tolerance."""

    def __init__(self, eigenvalue, threshold):
        self.eigenvalue = eigenvalue
        self.threshold = threshold
        super().__init__(
            f"kernel is not positive semidefinite: eigenvalue {eigenvalue:.6g} "
            f"< {threshold:.6g}"
        )


class SolverError(RuntimeError):
    """Conjugate gradient did not converge."""

    def __init__(self, size, residual):
        self.size = size
        self.residual = residual
        super().__init__(f"CG failed on a {size}x{size} system, residual {residual:.3e}")


def trace_norm(K, dt, upto=None):
    """``dt * sum_{j < upto} |K[j, j]|``."""
    d = np.abs(np.diagonal(K))
    return float(dt * d[:upto].sum())


def hs_norm(K, dt, upto=None):
    """``(dt^2 * sum_{i, j < upto} K[i, j]^2)^(1/2)``."""
    K = np.asarray(K)
    if upto is not None:
        K = K[:upto, :upto]
    return float(dt * math.sqrt(np.sum(K * K)))


def compose(k1, k2, dt):
    """Causal composition ``dt * sum_{u < v < s} k1(s, v) k2(v, u)``."""
    return dt * (np.tril(k1, -1) @ np.tril(k2, -1))


def check_psd(K, tol=PSD_TOL):
    """Raise NotPSDError unless ``min eig >= -tol * ||K||``; returns the min eigenvalue."""
    K = np.asarray(K, dtype=np.float64)
    if K.size == 0:
        return 0.0
    ev = linalg.eigvalsh(K)
    scale = max(abs(ev[0]), abs(ev[-1]))
    threshold = -tol * scale
    if ev[0] < threshold:
        raise NotPSDError(float(ev[0]), threshold)
    return float(ev[0])


def ktilde_block(K, i, lam, dt):
    """``K_i (Id + dt/lam^2 K_i)^(-1)`` for the leading ``i x i`` block ``K_i``."""
    Ki = np.asarray(K, dtype=np.float64)[:i, :i]
    check_psd(Ki)
    A = np.eye(i) + (dt / lam**2) * Ki
    out = linalg.solve(A, Ki, assume_a="pos")
    return 0.5 * (out + out.T)


def ktilde_row(K, l, lam, dt, method="auto"):
    """Last row of the ``l x l`` conditioned block, via one linear solve.

    Solves ``(Id_l + dt/lam^2 K_l) x = K_l e_l``; the block is symmetric so
    the solution is also its last row.  ``method`` is ``"direct"``, ``"cg"``
    or ``"auto"`` (direct up to 512 unknowns).  The caller is responsible for
    the PSD check (once on the full kernel is enough: principal blocks
    inherit it).
    """
    Kl = np.asarray(K, dtype=np.float64)[:l, :l]
    b = Kl[:, l - 1]
    A = np.eye(l) + (dt / lam**2) * Kl
    if method == "auto":
        method = "direct" if l <= DIRECT_SOLVE_MAX else "cg"
    if method == "direct":
        return linalg.solve(A, b, assume_a="pos")
    if method != "cg":
        raise ValueError(f"unknown method {method!r}")
    x, info = cg(A, b, rtol=CG_TOL, atol=0.0, maxiter=10 * l)
    res = float(np.linalg.norm(A @ x - b))
    if info != 0 or res > CG_TOL * max(np.linalg.norm(b), 1e-300) * 10:
        raise SolverError(l, res)
    return x


@dataclass
class KtildeFamily:
    """Rows of the conditioned kernels, one per time index.

    ``rows[l, j]`` (``j < l``) is the last row of the ``l x l`` block, used
    as ``Ktilde^{l dt}(l dt, j dt)`` in the Volterra step; row 0 is empty.
    The family is not the restriction of a single kernel.
    """

    rows: np.ndarray
    lam: float
    dt: float

    @property
    def L(self):
        return self.rows.shape[0]

    def kappa(self):
        """Causal kernel ``Ktilde / lam^2`` driving the Volterra equation."""
        return self.rows / self.lam**2

    def diagonal(self):
        """``Ktilde^{t}`` at its own corner, ``rows[l, l-1]`` (0 for l = 0)."""
        d = np.zeros(self.L)
        idx = np.arange(1, self.L)
        d[1:] = self.rows[idx, idx - 1]
        return d


def ktilde_family(K, L, lam, dt, method="auto", check=True):
    """Rows ``l = 1..L-1`` of the conditioned family built from ``K[:L, :L]``."""
    K = np.asarray(K, dtype=np.float64)
    if check:
        check_psd(K[:L, :L])
    rows = np.zeros((L, L))
    for l in range(1, L):
        rows[l, :l] = ktilde_row(K, l, lam, dt, method=method)
    return KtildeFamily(rows=rows, lam=lam, dt=dt)


def resolvent(kappa, dt):
    """Resolvent ``H`` of a causal kernel: ``H = kappa + compose(kappa, H)``.

    Forward substitution on ``(Id - dt kappa) H = kappa``, exact for strictly
    lower-triangular kernels.
    """
    kappa = np.tril(np.asarray(kappa, dtype=np.float64), -1)
    A = np.eye(kappa.shape[0]) - dt * kappa
    H = linalg.solve_triangular(A, kappa, lower=True, unit_diagonal=True)
    return np.tril(H, -1)


def resolvent_residual(kappa, H, dt):
    """Sup norm of ``H - kappa - compose(kappa, H)``."""
    kappa = np.tril(kappa, -1)
    return float(np.max(np.abs(H - kappa - compose(kappa, H, dt)), initial=0.0))


def neumann_resolvent(kappa, dt, terms):
    """Truncated series ``sum_{n=1..terms} kappa^(n)`` of iterated kernels."""
    kappa = np.tril(kappa, -1)
    term = kappa.copy()
    H = kappa.copy()
    for _ in range(terms - 1):
        term = compose(kappa, term, dt)
        H += term
    return H


def h_series(x, tol=1e-16):
    """``sum_n x^n / sqrt(n!)``, summed until a term falls below ``tol * sum``."""
    if x < 0:
        raise ValueError("h_series needs x >= 0")
    if x == 0:
        return 1.0
    total = 0.0
    lx = math.log(x)
    n = 0
    while True:
        term = math.exp(n * lx - 0.5 * math.lgamma(n + 1))
        total += term
        # terms rise until n ~ 2 x^2, then fall
        if n > 2 * x * x and term < tol * total:
            return total
        n += 1


def row_l2_bound(kappa, dt):
    """``M = max_l dt * sum_j kappa[l, j]^2``."""
    kappa = np.tril(kappa, -1)
    return float(dt * np.max(np.sum(kappa * kappa, axis=1), initial=0.0))


def resolvent_bound(kappa, dt, T):
    """The bound ``M h(M T)`` on ``sup |H|`` with ``M`` from :func:`row_l2_bound`."""
    M = row_l2_bound(kappa, dt)
    return M * h_series(M * T)


def resolvent_bound_sup(kappa, dt, T):
    """``sup|kappa| h(sqrt(M T))``: Cauchy-Schwarz on iterated kernels gives
    ``|kappa^(n+1)(s, u)| <= sup|kappa| (M (s - u))^(n/2) / sqrt(n!)``."""
    M = row_l2_bound(kappa, dt)
    kmax = float(np.max(np.abs(np.tril(kappa, -1)), initial=0.0))
    return kmax * h_series(math.sqrt(M * T))


def write_kernel_csv(path, K, dt):
    """Row-major CSV with a ``# L=<rows-1> dt=<dt>`` header, 17 significant digits."""
    K = np.asarray(K, dtype=np.float64)
    with open(path, "w") as fh:
        fh.write(f"# L={K.shape[0] - 1} dt={dt!r}\n")
        for row in K:
            fh.write(",".join(f"{v:.17g}" for v in row))
            fh.write("\n")


def read_kernel_csv(path):
    """Inverse of :func:`write_kernel_csv`; returns ``(K, dt)``."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing kernel header")
        fields = dict(tok.split("=", 1) for tok in header[1:].split())
        K = np.loadtxt(fh, delimiter=",", ndmin=2)
    L = int(fields["L"])
    if K.shape != (L + 1, L + 1):
        raise ValueError(f"{path}: header says L={L} but matrix is {K.shape}")
    return K, float(fields["dt"])
