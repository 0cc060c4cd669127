"""Single-neuron models, time grids and the uncoupled dynamics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend, rng
from ._pycore import BOUNDARY_MARGIN, KIND_H, KIND_S

ACTIVATIONS = ("sigmoid01", "tanh", "identity", "relu", "constant_one")
BOUNDED_ACTIVATIONS = ("sigmoid01", "tanh", "constant_one")
# S-model runs fail when more than this fraction of Euler steps hit the clamp
MAX_CLAMP_FRACTION = 1e-3


class ModelError(ValueError):
    """Invalid model, grid or initial-law parameters."""


class DomainError(ValueError):
    """S-model drift evaluated outside (-A, A)."""


class BoundaryExitError(RuntimeError):
    """Too many S-model Euler steps left the admissible interval."""

    def __init__(self, clamps, steps):
        self.clamps = clamps
        self.steps = steps
        super().__init__(
            f"{clamps} of {steps} Euler steps left (-A, A) "
            f"(limit {MAX_CLAMP_FRACTION:.1%}); reduce dt or raise k"
        )


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_l = l * dt`` for ``l = 0..L`` with ``L = floor(T / dt)``."""

    horizon: float
    dt: float

    def __post_init__(self):
        if not (self.horizon > 0 and self.dt > 0):
            raise ModelError("horizon and dt must be positive")
        if self.L < 2:
            raise ModelError(f"grid needs at least 2 steps, got L={self.L}")

    @property
    def L(self) -> int:
        # tolerate T/dt landing a hair below an integer (10 / 0.04)
        return int(math.floor(self.horizon / self.dt + 1e-9))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.L + 1) * self.dt


@dataclass(frozen=True)
class ModelSpec:
    """Drift family, activation and coupling parameters.

    ``drift`` is ``"H"`` (``g(x) = -alpha x``) or ``"S"``
    (``g(x) = -2 k x / (A^2 - x^2)``, the gradient of ``k log(A^2 - x^2)``).
    The activation is ``act_scale * base(act_gain * x)``; gain and scale
    default to 1 and exist so the lambda-rescaled model can be expressed.
    """

    drift: str = "H"
    activation: str = "sigmoid01"
    J: float = 0.0
    sigma: float = 1.0
    lam: float = 1.0
    alpha: float = 1.0
    A: float = 2.0
    k: float = 1.0
    act_gain: float = 1.0
    act_scale: float = 1.0

    def __post_init__(self):
        if self.drift not in ("H", "S"):
            raise ModelError(f"drift must be 'H' or 'S', got {self.drift!r}")
        if self.activation not in ACTIVATIONS:
            raise ModelError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if not self.sigma > 0:
            raise ModelError("sigma must be positive")
        if self.lam == 0 or not math.isfinite(self.lam):
            raise ModelError("lam must be a nonzero real")
        if self.drift == "H" and not self.alpha > 0:
            raise ModelError("alpha must be positive")
        if self.drift == "S":
            if not self.A > 1:
                raise ModelError("S-model needs A > 1")
            if self.k not in (1, 2, 4):
                raise ModelError("S-model exponent k must be 1, 2 or 4")
            if self.activation != "identity":
                raise ModelError("S-model requires the identity activation")

    @property
    def kind(self) -> int:
        return KIND_H if self.drift == "H" else KIND_S

    @property
    def outside_guarantees(self) -> bool:
        """True for H-model runs with an unbounded activation."""
        return self.drift == "H" and self.activation not in BOUNDED_ACTIVATIONS

    @property
    def activation_bound(self) -> float:
        """Sup of |f|: C for bounded activations, A for the S-model, inf otherwise."""
        if self.activation in BOUNDED_ACTIVATIONS:
            return abs(self.act_scale)
        if self.drift == "S":
            return abs(self.act_scale) * self.A * abs(self.act_gain)
        return math.inf


@dataclass(frozen=True)
class InitialLaw:
    """Law of X_0: ``point_mass(x0)``, ``gaussian(mean, std)`` or ``uniform(a, b)``."""

    family: str = "point_mass"
    params: tuple = (0.0,)

    def __post_init__(self):
        n = {"point_mass": 1, "gaussian": 2, "uniform": 2}.get(self.family)
        if n is None:
            raise ModelError(f"unknown initial law {self.family!r}")
        if len(self.params) != n:
            raise ModelError(f"{self.family} takes {n} parameters, got {len(self.params)}")
        if self.family == "gaussian" and self.params[1] < 0:
            raise ModelError("gaussian std must be >= 0")
        if self.family == "uniform" and not self.params[0] < self.params[1]:
            raise ModelError("uniform law needs a < b")

    @property
    def symmetric(self) -> bool:
        if self.family == "point_mass":
            return self.params[0] == 0
        if self.family == "gaussian":
            return self.params[0] == 0
        return self.params[0] == -self.params[1]

    @property
    def mean(self) -> float:
        if self.family == "uniform":
            return 0.5 * (self.params[0] + self.params[1])
        return float(self.params[0])

    @property
    def variance(self) -> float:
        if self.family == "point_mass":
            return 0.0
        if self.family == "gaussian":
            return float(self.params[1]) ** 2
        return (self.params[1] - self.params[0]) ** 2 / 12.0

    def support(self):
        if self.family == "point_mass":
            return (self.params[0], self.params[0])
        if self.family == "uniform":
            return tuple(self.params)
        if self.params[1] == 0:
            return (self.params[0], self.params[0])
        return (-math.inf, math.inf)

    def check_model(self, model: ModelSpec):
        if model.drift == "S":
            lo, hi = self.support()
            if not (-model.A < lo and hi < model.A):
                raise ModelError("S-model initial law must be supported strictly inside (-A, A)")

    def sample(self, key, stream0, n, backend=None) -> np.ndarray:
        """Draw ``n`` initial values from streams ``stream0..stream0+n-1``."""
        if self.family == "point_mass":
            return np.full(n, float(self.params[0]))
        if self.family == "gaussian":
            z = rng.normals(key, stream0, n, 1, backend=backend)[:, 0]
            return self.params[0] + self.params[1] * z
        u = rng.uniforms(key, stream0, n, 1, backend=backend)[:, 0]
        return self.params[0] + (self.params[1] - self.params[0]) * u


@dataclass
class TrajectoryBatch:
    """Sample paths ``X`` (P x (L+1)) and the Brownian increments ``dW`` (P x L)."""

    X: np.ndarray
    dW: np.ndarray
    seed: int
    clamps: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def P(self) -> int:
        return self.X.shape[0]


def drift(model: ModelSpec, x):
    """Drift g(x); raises DomainError for S-model points with |x| >= A."""
    x = np.asarray(x, dtype=np.float64)
    if model.drift == "H":
        out = -model.alpha * x
    else:
        if np.any(np.abs(x) >= model.A):
            raise DomainError(f"S-model drift undefined for |x| >= A = {model.A}")
        out = -2.0 * model.k * x / (model.A * model.A - x * x)
    return out[()] if out.ndim == 0 else out


def activation(model: ModelSpec, x):
    x = np.asarray(x, dtype=np.float64)
    y = x * model.act_gain if model.act_gain != 1.0 else x
    name = model.activation
    if name == "sigmoid01":
        out = 0.5 * (1.0 + np.tanh(y))
    elif name == "tanh":
        out = np.tanh(y)
    elif name == "identity":
        out = y.copy()
    elif name == "relu":
        out = np.maximum(y, 0.0)
    else:
        out = np.ones_like(y)
    if model.act_scale != 1.0:
        out = out * model.act_scale
    return out[()] if out.ndim == 0 else out


def check_clamps(clamps, steps):
    if steps and clamps > MAX_CLAMP_FRACTION * steps:
        raise BoundaryExitError(clamps, steps)


def euler(model: ModelSpec, grid: TimeGrid, x0, drive, noise, backend=None):
    """Explicit Euler-Maruyama with a deterministic per-step drive.

    ``X[p, l+1] = X[p, l] + (g(X[p, l]) + drive[l]) dt + noise[p, l]``, with
    the S-model clamp applied to steps leaving ``A (1 - 1e-6)``.
    """
    k = _backend.get(backend)
    X, clamps = k.euler_paths(np.asarray(x0, dtype=np.float64),
                              np.asarray(drive, dtype=np.float64),
                              noise, model.kind, float(model.alpha),
                              float(model.A), float(model.k), float(grid.dt))
    return X, int(clamps)


def brownian_increments(key, grid: TimeGrid, stream0, n, backend=None):
    return rng.normals(key, stream0, n, grid.L, backend=backend) * math.sqrt(grid.dt)


def simulate_uncoupled(model: ModelSpec, grid: TimeGrid, law: InitialLaw, P: int, seed: int,
                       backend=None) -> TrajectoryBatch:
    """P independent Euler paths of ``dY = g(Y) dt + lam dB``."""
    if P < 1:
        raise ModelError("P must be >= 1")
    law.check_model(model)
    x0 = law.sample(rng.derive_key(seed, rng.INIT, 0), 0, P, backend=backend)
    dW = brownian_increments(rng.derive_key(seed, rng.NOISE, 0), grid, 0, P, backend=backend)
    X, clamps = euler(model, grid, x0, np.zeros(grid.L), model.lam * dW, backend=backend)
    if model.drift == "S":
        check_clamps(clamps, P * grid.L)
    return TrajectoryBatch(X=X, dW=dW, seed=seed, clamps=clamps)


__all__ = [
    "ACTIVATIONS", "BOUNDARY_MARGIN", "BoundaryExitError", "DomainError", "InitialLaw",
    "ModelError", "ModelSpec", "TimeGrid", "TrajectoryBatch", "activation", "drift",
    "euler", "simulate_uncoupled",
]
