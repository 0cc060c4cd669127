"""Monte Carlo Picard iteration for the mean-field fixed point.

One application of the map takes a pair ``(m, K)`` (mean activity and
activity covariance on the grid), simulates ``P`` paths of

    dX = (g(X) + J m(t)) dt + dC,
    dC[l] = lam dW[l] + dt / lam^2 * sum_{j<l} Ktilde^{l dt}(l dt, j dt) dC[j],

and returns the empirical ``(E f(X_t), sigma^2 E f(X_t) f(X_s))``.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import _backend, rng
from .kernel_ops import KtildeFamily, check_psd, ktilde_family
from .model import (InitialLaw, ModelError, ModelSpec, TimeGrid, activation, check_clamps,
                    euler)


class DivergenceError(RuntimeError):
    """Distances between successive iterates kept doubling."""


@dataclass
class SolverConfig:
    model: ModelSpec
    grid: TimeGrid
    law: InitialLaw = field(default_factory=InitialLaw)
    P: int = 100_000
    n_iters: int = 10
    seed: int = 0
    fresh_noise: bool = True
    chunk: int = 8192
    n_keep: int = 4
    backend: str | None = None

    def __post_init__(self):
        if self.P < 100:
            raise ModelError("P must be >= 100")
        if self.n_iters < 1:
            raise ModelError("n_iters must be >= 1")
        if self.chunk < 1:
            raise ModelError("chunk must be >= 1")
        self.law.check_model(self.model)


@dataclass
class FixedPointState:
    """Estimates on grid points ``t_0..t_L`` with per-entry standard errors."""

    grid: TimeGrid
    m: np.ndarray
    K: np.ndarray
    se_m: np.ndarray
    se_K: np.ndarray
    iteration: int = 0
    x_mean: np.ndarray | None = None
    x_var: np.ndarray | None = None
    se_x_mean: np.ndarray | None = None
    se_x_var: np.ndarray | None = None
    ktilde: KtildeFamily | None = None
    paths: np.ndarray | None = None
    clamps: int = 0

    @property
    def Ktt(self):
        return np.diagonal(self.K).copy()

    @property
    def se_Ktt(self):
        return np.diagonal(self.se_K).copy()


@dataclass
class IterationDiagnostics:
    distance: list = field(default_factory=list)
    dm_sup: list = field(default_factory=list)
    dK_sup: list = field(default_factory=list)
    clamps: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)
    total_time: float = 0.0

    def as_dict(self):
        return {
            "distance": list(self.distance),
            "dm_sup": list(self.dm_sup),
            "dK_sup": list(self.dK_sup),
            "clamps": list(self.clamps),
            "wall_time": list(self.wall_time),
            "total_time": self.total_time,
        }


def distance(a, b, upto=None):
    """``(dt sum_{j<l} dm^2 + dt^2 sum_{i,j<l} dK^2)^(1/2)`` with ``l = upto`` (default L)."""
    dt = a.grid.dt
    l = a.grid.L if upto is None else upto
    dm = np.asarray(a.m[:l]) - np.asarray(b.m[:l])
    dK = np.asarray(a.K[:l, :l]) - np.asarray(b.K[:l, :l])
    return math.sqrt(dt * np.sum(dm * dm) + dt * dt * np.sum(dK * dK))


# -- moment accumulation -------------------------------------------------------

def _partial_sums(F, X):
    # explicit products: integer powers above 2 go through libm pow
    F2 = F * F
    X2 = X * X
    return (
        F.shape[0],
        F.sum(axis=0), F2.sum(axis=0),
        F.T @ F, F2.T @ F2,
        X.sum(axis=0), X2.sum(axis=0), (X2 * X).sum(axis=0), (X2 * X2).sum(axis=0),
    )


def _add(a, b):
    return tuple(x + y for x, y in zip(a, b))


def _pairwise(parts):
    """Fixed-shape tree reduction so the result is independent of worker count."""
    parts = list(parts)
    while len(parts) > 1:
        nxt = [_add(parts[i], parts[i + 1]) for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def moments_from_sums(sums, sigma):
    """Estimates and standard errors of ``m``, ``K`` and the state moments."""
    n, sf, sf2, sff, sff2, sx, sx2, sx3, sx4 = sums
    s2 = sigma * sigma
    m = sf / n
    var_f = np.maximum(sf2 / n - m * m, 0.0)
    Eff = sff / n
    var_ff = np.maximum(sff2 / n - Eff * Eff, 0.0)
    K = s2 * Eff
    K = 0.5 * (K + K.T)
    xm = sx / n
    ex2, ex3, ex4 = sx2 / n, sx3 / n, sx4 / n
    xv = np.maximum(ex2 - xm * xm, 0.0)
    xm2 = xm * xm
    mu4 = ex4 - 4 * xm * ex3 + 6 * xm2 * ex2 - 3 * xm2 * xm2
    denom = math.sqrt(n)
    se_K = s2 * np.sqrt(var_ff) / denom
    return dict(
        m=m, se_m=np.sqrt(var_f) / denom,
        K=K, se_K=0.5 * (se_K + se_K.T),
        x_mean=xm, se_x_mean=np.sqrt(xv) / denom,
        x_var=xv * n / max(n - 1, 1), se_x_var=np.sqrt(np.maximum(mu4 - xv * xv, 0.0)) / denom,
    )


def estimate_moments(F, X, sigma):
    """Moments of a full batch (rows are trajectories or neurons)."""
    return moments_from_sums(_partial_sums(np.asarray(F), np.asarray(X)), sigma)


def _first_nonfinite(X, p0):
    bad = np.argwhere(~np.isfinite(X))[0]
    return FloatingPointError(f"non-finite state at trajectory {p0 + bad[0]}, step {bad[1]}")


def _simulate(config: SolverConfig, draw: int, kappa=None, drive=None):
    """Simulate all P paths in chunks and reduce their moment sums.

    ``draw`` selects the noise and initial-condition streams.  Returns
    ``(sums, kept_paths, clamps)``.
    """
    model, grid = config.model, config.grid
    L, dt = grid.L, grid.dt
    key_noise = rng.derive_key(config.seed, rng.NOISE, draw)
    key_init = rng.derive_key(config.seed, rng.INIT, draw)
    drive = np.zeros(L) if drive is None else np.asarray(drive, dtype=np.float64)
    A = None
    if kappa is not None:
        A = np.eye(L) - dt * np.tril(kappa, -1)
    sqdt = math.sqrt(dt)

    def run(p0):
        n = min(config.chunk, config.P - p0)
        noise = rng.normals(key_noise, p0, n, L, backend=config.backend)
        noise *= model.lam * sqdt
        if A is not None:
            noise = np.ascontiguousarray(
                linalg.solve_triangular(A, noise.T, lower=True, unit_diagonal=True).T)
        x0 = config.law.sample(key_init, p0, n, backend=config.backend)
        X, clamps = euler(model, grid, x0, drive, noise, backend=config.backend)
        if not np.all(np.isfinite(X)):
            raise _first_nonfinite(X, p0)
        F = activation(model, X)
        kept = X[: config.n_keep].copy() if p0 == 0 else None
        return _partial_sums(F, X), kept, clamps

    starts = range(0, config.P, config.chunk)
    nw = _backend.workers()
    if nw > 1:
        with ThreadPoolExecutor(max_workers=nw) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(p0) for p0 in starts]
    sums = _pairwise(r[0] for r in results)
    clamps = sum(r[2] for r in results)
    if model.drift == "S":
        check_clamps(clamps, config.P * L)
    return sums, results[0][1], clamps


def _state(config, sums, kept, clamps, iteration, family=None):
    est = moments_from_sums(sums, config.model.sigma)
    return FixedPointState(grid=config.grid, iteration=iteration, ktilde=family,
                           paths=kept, clamps=clamps, **est)


def initial_state(config: SolverConfig) -> FixedPointState:
    """Moments of the uncoupled dynamics (the Picard seed)."""
    sums, kept, clamps = _simulate(config, draw=0)
    return _state(config, sums, kept, clamps, iteration=0)


def lambda_step(state: FixedPointState, config: SolverConfig, iteration=None) -> FixedPointState:
    """Apply the mean-field map once to ``state``."""
    it = state.iteration + 1 if iteration is None else iteration
    grid, model = config.grid, config.model
    L = grid.L
    if not (np.all(np.isfinite(state.K[:L, :L])) and np.all(np.isfinite(state.m[:L]))):
        raise FloatingPointError("input state has non-finite entries")
    check_psd(state.K[:L, :L])
    fam = ktilde_family(state.K, L, model.lam, grid.dt, check=False)
    draw = it if config.fresh_noise else 1
    sums, kept, clamps = _simulate(config, draw=draw, kappa=fam.kappa(),
                                   drive=model.J * np.asarray(state.m[:L]))
    return _state(config, sums, kept, clamps, iteration=it, family=fam)


def solve_fixed_point(config: SolverConfig, callback=None):
    """Seed from the uncoupled law, iterate ``n_iters`` times.

    Returns ``(state, diagnostics)``.  Raises DivergenceError when the
    distance between successive iterates more than doubles three times in
    a row.
    """
    t0 = time.perf_counter()
    state = initial_state(config)
    diag = IterationDiagnostics()
    growth = 0
    for _ in range(config.n_iters):
        t1 = time.perf_counter()
        new = lambda_step(state, config)
        d = distance(new, state)
        if diag.distance and d > 2.0 * diag.distance[-1]:
            growth += 1
        else:
            growth = 0
        diag.distance.append(d)
        diag.dm_sup.append(float(np.max(np.abs(new.m - state.m))))
        diag.dK_sup.append(float(np.max(np.abs(new.K - state.K))))
        diag.clamps.append(int(new.clamps))
        diag.wall_time.append(time.perf_counter() - t1)
        state = new
        if callback is not None:
            callback(state, diag)
        if growth >= 3:
            raise DivergenceError(f"distance grew >2x three times in a row: {diag.distance[-4:]}")
    diag.total_time = time.perf_counter() - t0
    return state, diag
