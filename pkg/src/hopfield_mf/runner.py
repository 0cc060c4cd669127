"""Experiment driver: flat configs, CSV artifacts and run comparison."""

from __future__ import annotations

import hashlib
import json
import math
import os
import shutil
import tempfile
import time
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import __version__, _backend
from .f1 import mean_f1, simulate_annealed_f1, var_f1
from .fixed_point import SolverConfig, solve_fixed_point
from .kernel_ops import ktilde_family, write_kernel_csv
from .model import ACTIVATIONS, InitialLaw, ModelError, ModelSpec, TimeGrid, activation
from .network import empirical_stats, sample_weights_bernoulli, sample_weights_gaussian, \
    simulate_network

MODES = ("meanfield", "network", "f1-oracle", "compare")
OUTPUT_FILES = ("m.csv", "K.csv", "Ktt.csv", "ktilde_final.csv", "sample_paths.csv",
                "xstats.csv")


class ConfigError(ValueError):
    """A config key is unknown or has an invalid value."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class ComparisonError(ValueError):
    """The two runs cannot be compared (grid mismatch, missing files)."""


@dataclass
class ExperimentConfig:
    mode: str = "meanfield"
    drift: str = "H"
    activation: str = "sigmoid01"
    J: float = 1.0
    sigma: float = 1.0
    lam: float = 1.0
    alpha: float = 1.0
    A: float = 2.0
    k: float = 1.0
    T: float = 10.0
    dt: float = 0.04
    init: str = "point_mass:0"
    P: int = 100_000
    n_iters: int = 10
    seed: int = 0
    fresh_noise: bool = True
    N: int = 1000
    weights: str = "gaussian"
    p: float = 0.25
    weight_seed: int = 1
    storage: str = "auto"
    n_keep: int = 4
    run_a: str = ""
    run_b: str = ""
    multiplier: float = 3.0
    min_fraction: float = 1.0
    out: str = ""

    def model(self):
        return ModelSpec(drift=self.drift, activation=self.activation, J=self.J, sigma=self.sigma,
                         lam=self.lam, alpha=self.alpha, A=self.A, k=self.k)

    def grid(self):
        return TimeGrid(self.T, self.dt)

    def law(self):
        return parse_law(self.init)


def parse_law(text):
    """``point_mass:x0``, ``gaussian:mean,std`` or ``uniform:a,b``."""
    family, _, rest = text.partition(":")
    try:
        params = tuple(float(v) for v in rest.split(",")) if rest else ()
    except ValueError:
        raise ModelError(f"bad initial-law parameters {rest!r}") from None
    return InitialLaw(family.strip(), params)


def _coerce(name, typ, raw):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if typ is bool or typ == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if typ is int or typ == "int":
            return int(float(raw)) if float(raw).is_integer() else int(raw)
        if typ is float or typ == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(name, f"cannot parse {raw!r} as {typ}") from None
    return raw


def read_config_file(path):
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {n}", f"expected key = value, got {line!r}")
            key, val = line.split("=", 1)
            out[key.strip()] = val.strip()
    return out


def build_config(values) -> ExperimentConfig:
    """Validate a flat mapping before any compute; errors name the key."""
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    kw = {}
    for key, raw in values.items():
        if key not in types:
            raise ConfigError(key, "unknown key")
        kw[key] = _coerce(key, types[key], raw)
    cfg = ExperimentConfig(**kw)
    if cfg.mode not in MODES:
        raise ConfigError("mode", f"must be one of {MODES}")
    if cfg.mode == "compare":
        for key in ("run_a", "run_b"):
            if not getattr(cfg, key):
                raise ConfigError(key, "required in compare mode")
        if not cfg.multiplier > 0:
            raise ConfigError("multiplier", "must be positive")
        if not 0 < cfg.min_fraction <= 1:
            raise ConfigError("min_fraction", "must lie in (0, 1]")
        return cfg
    _check_model_keys(cfg)
    try:
        cfg.law().check_model(cfg.model())
    except ModelError as exc:
        raise ConfigError("init", str(exc)) from None
    if cfg.P < 100:
        raise ConfigError("P", "must be >= 100")
    if cfg.n_iters < 1:
        raise ConfigError("n_iters", "must be >= 1")
    if cfg.N < 2:
        raise ConfigError("N", "must be >= 2")
    if cfg.weights not in ("gaussian", "bernoulli"):
        raise ConfigError("weights", "must be gaussian or bernoulli")
    if cfg.weights == "bernoulli" and not 0 < cfg.p < 1:
        raise ConfigError("p", "must lie in (0, 1)")
    if cfg.n_keep < 0:
        raise ConfigError("n_keep", "must be >= 0")
    if cfg.mode == "f1-oracle" and cfg.activation != "constant_one":
        raise ConfigError("activation", "f1-oracle mode needs activation = constant_one")
    if cfg.mode == "f1-oracle" and (cfg.drift != "H" or cfg.alpha != 1.0):
        raise ConfigError("alpha", "f1-oracle mode needs the H-model with alpha = 1")
    return cfg


def _check_model_keys(cfg):
    if cfg.drift not in ("H", "S"):
        raise ConfigError("drift", "must be H or S")
    if cfg.activation not in ACTIVATIONS:
        raise ConfigError("activation", f"must be one of {ACTIVATIONS}")
    if not cfg.sigma > 0:
        raise ConfigError("sigma", "must be positive")
    if cfg.lam == 0 or not math.isfinite(cfg.lam):
        raise ConfigError("lam", "must be a nonzero real")
    if cfg.drift == "H" and not cfg.alpha > 0:
        raise ConfigError("alpha", "must be positive")
    if cfg.drift == "S":
        if not cfg.A > 1:
            raise ConfigError("A", "must exceed 1")
        if cfg.k not in (1, 2, 4):
            raise ConfigError("k", "must be 1, 2 or 4")
        if cfg.activation != "identity":
            raise ConfigError("activation", "S-model requires identity")
    if not cfg.T > 0:
        raise ConfigError("T", "must be positive")
    if not cfg.dt > 0:
        raise ConfigError("dt", "must be positive")
    try:
        cfg.grid()
    except ModelError as exc:
        raise ConfigError("dt", str(exc)) from None


# -- artifacts ----------------------------------------------------------------

def _fmt(v):
    return f"{v:.17g}"


def write_columns(path, header, columns):
    cols = [np.asarray(c, dtype=np.float64) for c in columns]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_columns(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {h: data[:, i] for i, h in enumerate(header)}


def blob_hash(data: bytes) -> str:
    """Git blob id of ``data``."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


@dataclass
class RunResult:
    """Everything written by one run, in the shared CSV schema."""

    t: np.ndarray
    m: np.ndarray
    se_m: np.ndarray
    K: np.ndarray
    se_K: np.ndarray
    x_mean: np.ndarray
    se_x_mean: np.ndarray
    x_var: np.ndarray
    se_x_var: np.ndarray
    ktilde: np.ndarray
    paths: np.ndarray
    dt: float
    diagnostics: dict


def _write_result(res: RunResult, model: ModelSpec, outdir):
    t = res.t
    write_columns(os.path.join(outdir, "m.csv"), ("t", "m", "se"), (t, res.m, res.se_m))
    write_kernel_csv(os.path.join(outdir, "K.csv"), res.K, res.dt)
    ktt, se = np.diagonal(res.K), np.diagonal(res.se_K)
    write_columns(os.path.join(outdir, "Ktt.csv"), ("t", "Ktt", "se", "lower", "upper"),
                  (t, ktt, se, ktt - 2 * se, ktt + 2 * se))
    write_kernel_csv(os.path.join(outdir, "ktilde_final.csv"), res.ktilde, res.dt)
    header, cols = ["t"], [t]
    for i, x in enumerate(res.paths):
        header += [f"x{i}", f"f{i}"]
        cols += [x, activation(model, x)]
    write_columns(os.path.join(outdir, "sample_paths.csv"), header, cols)
    write_columns(os.path.join(outdir, "xstats.csv"),
                  ("t", "x_mean", "se_x_mean", "x_var", "se_x_var"),
                  (t, res.x_mean, res.se_x_mean, res.x_var, res.se_x_var))


def _ktilde_rows(K, cfg):
    grid = cfg.grid()
    return ktilde_family(K, grid.L, cfg.lam, grid.dt).rows


def _run_meanfield(cfg):
    grid, model = cfg.grid(), cfg.model()
    sc = SolverConfig(model=model, grid=grid, law=cfg.law(), P=cfg.P, n_iters=cfg.n_iters,
                      seed=cfg.seed, fresh_noise=cfg.fresh_noise, n_keep=cfg.n_keep)
    state, diag = solve_fixed_point(sc)
    d = diag.as_dict()
    d.update(outside_guarantees=model.outside_guarantees, iterations=state.iteration)
    paths = state.paths if state.paths is not None else np.empty((0, grid.L + 1))
    return RunResult(t=grid.times, m=state.m, se_m=state.se_m, K=state.K, se_K=state.se_K,
                     x_mean=state.x_mean, se_x_mean=state.se_x_mean, x_var=state.x_var,
                     se_x_var=state.se_x_var, ktilde=state.ktilde.rows, paths=paths,
                     dt=grid.dt, diagnostics=d)


def _run_network(cfg):
    grid, model = cfg.grid(), cfg.model()
    if cfg.weights == "gaussian":
        W = sample_weights_gaussian(cfg.N, cfg.J, cfg.sigma, cfg.weight_seed, storage=cfg.storage)
    else:
        W = sample_weights_bernoulli(cfg.N, cfg.J, cfg.sigma, cfg.p, cfg.weight_seed,
                                     storage=cfg.storage)
    t0 = time.perf_counter()
    batch = simulate_network(model, W, grid, cfg.law(), cfg.seed)
    st = empirical_stats(batch, model)
    d = {"clamps": batch.clamps, "storage": W.storage, "sim_time": time.perf_counter() - t0,
         "outside_guarantees": model.outside_guarantees}
    return RunResult(t=grid.times, m=st.m, se_m=st.se_m, K=st.K, se_K=st.se_K,
                     x_mean=st.x_mean, se_x_mean=st.se_x_mean, x_var=st.x_var,
                     se_x_var=st.se_x_var, ktilde=_ktilde_rows(st.K, cfg),
                     paths=batch.X[: cfg.n_keep], dt=grid.dt, diagnostics=d)


def _run_f1_oracle(cfg):
    grid, law = cfg.grid(), cfg.law()
    t, n = grid.times, grid.L + 1
    zeros = np.zeros(n)
    K = np.full((n, n), cfg.sigma**2)
    keep = max(cfg.n_keep, 1)
    paths = simulate_annealed_f1(cfg.J, cfg.sigma, cfg.lam, grid, law, keep, cfg.seed).X
    return RunResult(t=t, m=np.ones(n), se_m=zeros, K=K, se_K=np.zeros((n, n)),
                     x_mean=mean_f1(t, cfg.J, law.mean), se_x_mean=zeros,
                     x_var=var_f1(t, cfg.sigma**2, law.variance, cfg.lam), se_x_var=zeros,
                     ktilde=_ktilde_rows(K, cfg), paths=paths[: cfg.n_keep], dt=grid.dt,
                     diagnostics={})


_RUNNERS = {"meanfield": _run_meanfield, "network": _run_network, "f1-oracle": _run_f1_oracle}


def _manifest(cfg, outdir, wall, diagnostics):
    files = {}
    for name in OUTPUT_FILES:
        with open(os.path.join(outdir, name), "rb") as fh:
            files[name] = blob_hash(fh.read())
    combined = "".join(f"{files[k]} {k}\n" for k in sorted(files)).encode()
    return {
        "config": asdict(cfg),
        "files": files,
        "content_hash": blob_hash(combined),
        "wall_time": wall,
        "diagnostics": diagnostics,
        "version": __version__,
        "backend": _backend.kernels.backend_name,
    }


def _stage(outdir):
    outdir = os.path.abspath(outdir)
    parent = os.path.dirname(outdir)
    os.makedirs(parent, exist_ok=True)
    return outdir, tempfile.mkdtemp(prefix=".staging-", dir=parent)


def _publish(stage, outdir):
    if os.path.isdir(outdir):
        shutil.rmtree(outdir)
    os.replace(stage, outdir)


def run_experiment(cfg: ExperimentConfig, outdir=None):
    """Run ``cfg`` and write its artifacts; returns the manifest dict.

    Files are written to a staging directory next to ``outdir`` and moved
    into place only after the manifest is written, so a failed run leaves
    nothing behind.
    """
    outdir = outdir or cfg.out
    if not outdir:
        raise ConfigError("out", "output directory required")
    if cfg.mode == "compare":
        return compare_runs(cfg.run_a, cfg.run_b, cfg.multiplier, cfg.min_fraction, outdir=outdir)
    outdir, stage = _stage(outdir)
    try:
        t0 = time.perf_counter()
        res = _RUNNERS[cfg.mode](cfg)
        _write_result(res, cfg.model(), stage)
        manifest = _manifest(cfg, stage, time.perf_counter() - t0, res.diagnostics)
        with open(os.path.join(stage, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
        _publish(stage, outdir)
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        raise
    return manifest


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


# -- comparison ----------------------------------------------------------------

_SERIES = (("m.csv", "m", "se"), ("Ktt.csv", "Ktt", "se"),
           ("xstats.csv", "x_mean", "se_x_mean"), ("xstats.csv", "x_var", "se_x_var"))


def compare_runs(dir_a, dir_b, multiplier=3.0, min_fraction=1.0, outdir=None):
    """Per-series sup and L2 differences and the fraction of grid points
    inside ``multiplier`` combined standard errors.

    A series passes when that fraction is at least ``min_fraction``.  Points
    where both runs report zero error need an exact match up to 1e-12.
    Writes ``report.txt`` and ``report.json`` to ``outdir`` when given.
    """
    series = {}
    for fname, col, secol in _SERIES:
        try:
            a = read_columns(os.path.join(dir_a, fname))
            b = read_columns(os.path.join(dir_b, fname))
        except OSError as exc:
            raise ComparisonError(str(exc)) from None
        if a["t"].shape != b["t"].shape or not np.allclose(a["t"], b["t"], rtol=0, atol=1e-12):
            raise ComparisonError(f"{fname}: time grids differ")
        dt = float(a["t"][1] - a["t"][0]) if a["t"].size > 1 else 1.0
        diff = np.abs(a[col] - b[col])
        band = multiplier * np.hypot(a[secol], b[secol])
        ok = diff <= np.maximum(band, 1e-12)
        frac = float(np.mean(ok))
        series[col] = {
            "sup": float(diff.max()),
            "l2": float(math.sqrt(dt * np.sum(diff * diff))),
            "fraction_within": frac,
            "worst_t": float(a["t"][int(np.argmax(diff - band))]),
            "passed": bool(frac >= min_fraction),
        }
    report = {"run_a": os.path.abspath(dir_a), "run_b": os.path.abspath(dir_b),
              "multiplier": multiplier, "min_fraction": min_fraction, "series": series,
              "passed": all(s["passed"] for s in series.values())}
    if outdir:
        os.makedirs(outdir, exist_ok=True)
        with open(os.path.join(outdir, "report.json"), "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(os.path.join(outdir, "report.txt"), "w") as fh:
            fh.write(format_report(report))
    return report


def format_report(report):
    lines = [f"compare {report['run_a']} vs {report['run_b']} "
             f"(x{report['multiplier']:g} SE, need {report['min_fraction']:.0%})"]
    for name, s in report["series"].items():
        lines.append(f"  {name:7s} sup={s['sup']:.3e} l2={s['l2']:.3e} "
                     f"within={s['fraction_within']:.1%} {'PASS' if s['passed'] else 'FAIL'}")
    lines.append("PASS" if report["passed"] else "FAIL")
    return "\n".join(lines) + "\n"
