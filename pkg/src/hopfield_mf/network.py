"""Finite-N network with quenched random weights.

Weights are drawn once from the counter-based generator: entry ``(i, j)``
is column ``j`` of stream ``i`` under the weight key, so any row can be
regenerated on demand and is identical to the stored one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from . import _backend, rng
from .fixed_point import moments_from_sums, _partial_sums
from .model import (InitialLaw, ModelError, ModelSpec, TimeGrid, TrajectoryBatch, activation,
                    brownian_increments, check_clamps)

DENSE_LIMIT = 8192
ROW_BLOCK = 512


@dataclass
class WeightMatrix:
    """Synaptic weights ``W[i, j]`` (effect of neuron j on neuron i).

    ``storage`` is ``"dense"`` (full array), ``"regen"`` (Gaussian rows
    regenerated at every product, nothing stored) or ``"sparse"``
    (Bernoulli: ``W = a + b S`` with ``S`` the 0/1 success pattern in CSR).
    """

    N: int
    J: float
    sigma: float
    sampler: str
    seed: int
    storage: str
    p: float | None = None
    dense: np.ndarray | None = None
    pattern: sparse.csr_matrix | None = None
    key: int = 0
    backend: str | None = None

    @property
    def mean(self):
        return self.J / self.N

    @property
    def scale(self):
        return self.sigma / math.sqrt(self.N)

    def support(self):
        """Bernoulli two-point values ``(a, a + b)``."""
        if self.sampler != "bernoulli":
            raise ValueError("support is only defined for Bernoulli weights")
        return _bernoulli_values(self.N, self.J, self.sigma, self.p)

    def matvec(self, f):
        f = np.asarray(f, dtype=np.float64)
        if self.storage == "dense":
            return self.dense @ f
        if self.storage == "regen":
            k = _backend.get(self.backend)
            return k.gaussian_matvec(self.key, self.N, self.mean, self.scale, f)
        a, b = self.support()
        return a * math.fsum(f) + (b - a) * (self.pattern @ f)

    def rows(self, i0, i1):
        """Rows ``i0..i1-1`` as a dense block, whatever the storage."""
        if self.storage == "dense":
            return self.dense[i0:i1].copy()
        if self.storage == "regen":
            z = rng.normals(self.key, i0, i1 - i0, self.N, backend=self.backend)
            return z * self.scale + self.mean
        a, b = self.support()
        return a + (b - a) * self.pattern[i0:i1].toarray()

    def to_dense(self):
        return self.rows(0, self.N)

    def entry_moments(self):
        """Sample mean and variance of all N^2 entries (diagnostics)."""
        s1 = s2 = 0.0
        for i0 in range(0, self.N, ROW_BLOCK):
            blk = self.rows(i0, min(i0 + ROW_BLOCK, self.N))
            s1 += blk.sum()
            s2 += (blk * blk).sum()
        n = float(self.N) ** 2
        mean = s1 / n
        return mean, s2 / n - mean * mean


def _bernoulli_values(N, J, sigma, p):
    c = sigma / math.sqrt(N) * math.sqrt(p / (1.0 - p))
    a = J / N - c
    return a, a + c / p


def _pick_storage(storage, N, dense_limit, large):
    if storage == "auto":
        return "dense" if N <= dense_limit else large
    if storage not in ("dense", large):
        raise ValueError(f"storage must be 'auto', 'dense' or {large!r}, got {storage!r}")
    return storage


def sample_weights_gaussian(N, J, sigma, seed, storage="auto", dense_limit=DENSE_LIMIT,
                            backend=None) -> WeightMatrix:
    """I.i.d. ``N(J/N, sigma^2/N)`` entries."""
    if N < 2:
        raise ModelError("N must be >= 2")
    key = rng.derive_key(seed, rng.WEIGHTS)
    mode = _pick_storage(storage, N, dense_limit, "regen")
    W = WeightMatrix(N=N, J=J, sigma=sigma, sampler="gaussian", seed=seed, storage="regen",
                     key=key, backend=backend)
    if mode == "dense":
        dense = np.empty((N, N))
        for i0 in range(0, N, ROW_BLOCK):
            i1 = min(i0 + ROW_BLOCK, N)
            dense[i0:i1] = W.rows(i0, i1)
        W.dense, W.storage = dense, "dense"
    return W


def sample_weights_bernoulli(N, J, sigma, p, seed, storage="auto", dense_limit=DENSE_LIMIT,
                             backend=None) -> WeightMatrix:
    """Two-point entries ``J/N + (sigma/sqrt N)(B/p - 1) sqrt(p/(1-p))``, ``B ~ Ber(p)``.

    Mean ``J/N`` and variance ``sigma^2/N`` hold exactly for every ``p``.
    """
    if not 0.0 < p < 1.0:
        raise ModelError(f"Bernoulli p must lie in (0, 1), got {p}")
    if N < 2:
        raise ModelError("N must be >= 2")
    key = rng.derive_key(seed, rng.BERNOULLI)
    mode = _pick_storage(storage, N, dense_limit, "sparse")
    blocks = []
    for i0 in range(0, N, ROW_BLOCK):
        i1 = min(i0 + ROW_BLOCK, N)
        u = rng.uniforms(key, i0, i1 - i0, N, backend=backend)
        blocks.append(sparse.csr_matrix(u < p, dtype=np.float64))
    pattern = sparse.vstack(blocks, format="csr")
    W = WeightMatrix(N=N, J=J, sigma=sigma, sampler="bernoulli", seed=seed, storage="sparse",
                     p=p, pattern=pattern, key=key, backend=backend)
    if mode == "dense":
        W.dense, W.storage, W.pattern = W.to_dense(), "dense", None
    return W


def simulate_network(model: ModelSpec, weights: WeightMatrix, grid: TimeGrid,
                     law: InitialLaw = InitialLaw(), seed: int = 0, backend=None) -> TrajectoryBatch:
    """Euler-Maruyama on the N coupled equations, one product ``W f(X)`` per step.

    Uses the same initial-value and noise streams as ``simulate_uncoupled``
    with the same seed (neuron i is trajectory i).
    """
    law.check_model(model)
    N, L, dt = weights.N, grid.L, grid.dt
    k = _backend.get(backend)
    x = law.sample(rng.derive_key(seed, rng.INIT, 0), 0, N, backend=backend)
    dW = brownian_increments(rng.derive_key(seed, rng.NOISE, 0), grid, 0, N, backend=backend)
    noise = np.ascontiguousarray((model.lam * dW).T)
    X = np.empty((N, L + 1))
    X[:, 0] = x
    clamps = 0
    for l in range(L):
        drive = weights.matvec(activation(model, x))
        x, c = k.euler_step(x, drive, noise[l], model.kind, float(model.alpha),
                            float(model.A), float(model.k), float(dt))
        if not np.all(np.isfinite(x)):
            i = int(np.argwhere(~np.isfinite(x))[0, 0])
            raise FloatingPointError(f"non-finite state at neuron {i}, step {l + 1}")
        clamps += c
        X[:, l + 1] = x
    if model.drift == "S":
        check_clamps(clamps, N * L)
    meta = {"N": N, "sampler": weights.sampler, "weight_seed": weights.seed,
            "storage": weights.storage}
    return TrajectoryBatch(X=X, dW=dW, seed=seed, clamps=int(clamps), meta=meta)


@dataclass
class EmpiricalStats:
    """Averages over neurons, in the same layout as a fixed-point state."""

    m: np.ndarray
    K: np.ndarray
    se_m: np.ndarray
    se_K: np.ndarray
    x_mean: np.ndarray
    x_var: np.ndarray
    se_x_mean: np.ndarray
    se_x_var: np.ndarray

    @property
    def Ktt(self):
        return np.diagonal(self.K).copy()

    @property
    def se_Ktt(self):
        return np.diagonal(self.se_K).copy()


def empirical_stats(batch: TrajectoryBatch, model: ModelSpec) -> EmpiricalStats:
    """``m(t) = mean_i f(X_i(t))`` and ``K(t, s) = sigma^2 mean_i f(X_i(t)) f(X_i(s))``."""
    F = activation(model, batch.X)
    return EmpiricalStats(**moments_from_sums(_partial_sums(F, batch.X), model.sigma))
