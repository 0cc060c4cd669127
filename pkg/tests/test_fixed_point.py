import math

import numpy as np
import pytest

from hopfield_mf import fixed_point as fp
from hopfield_mf.kernel_ops import NotPSDError, hs_norm, trace_norm
from hopfield_mf.model import InitialLaw, ModelError, ModelSpec, TimeGrid


def cfg(model=None, T=2.0, dt=0.02, P=4000, **kw):
    return fp.SolverConfig(model=model or ModelSpec(J=1.0), grid=TimeGrid(T, dt), P=P, **kw)


def state_like(c, m, K):
    n = c.grid.L + 1
    return fp.FixedPointState(grid=c.grid, m=m, K=K, se_m=np.zeros(n), se_K=np.zeros((n, n)))


def test_config_validation():
    with pytest.raises(ModelError):
        cfg(P=99)
    with pytest.raises(ModelError):
        cfg(n_iters=0)
    s = ModelSpec(drift="S", activation="identity", A=2.0)
    with pytest.raises(ModelError):
        cfg(model=s, law=InitialLaw("gaussian", (0.0, 1.0)))


def test_constant_activation_map_is_constant():
    c = cfg(model=ModelSpec(activation="constant_one", J=1.0, sigma=1.5), P=500)
    n = c.grid.L + 1
    r = np.random.default_rng(0).normal(size=(n, 3))
    new = fp.lambda_step(state_like(c, np.full(n, 0.3), r @ r.T), c)
    assert np.all(new.m == 1.0) and np.all(new.K == 2.25)
    assert np.all(new.se_m == 0.0) and np.all(new.se_K == 0.0)
    state, diag = fp.solve_fixed_point(fp.SolverConfig(c.model, c.grid, P=500, n_iters=3))
    assert diag.distance == [0.0, 0.0, 0.0]


def test_distance_examples():
    c = cfg(T=2.0, dt=0.01)
    n = c.grid.L + 1
    r = np.random.default_rng(1)
    K = r.normal(size=(n, n))
    a = state_like(c, np.zeros(n), K)
    assert fp.distance(a, a) == 0.0
    b = state_like(c, np.ones(n), K)
    assert fp.distance(a, b) == pytest.approx(math.sqrt(2.0), rel=1e-12)
    m2, K2 = r.normal(size=n), r.normal(size=(n, n))
    b = state_like(c, m2, K2)
    l = 150
    hand = 0.0
    for j in range(l):
        hand += c.grid.dt * m2[j] ** 2
        for i in range(l):
            hand += c.grid.dt**2 * (K[i, j] - K2[i, j]) ** 2
    assert fp.distance(a, b, upto=l) == pytest.approx(math.sqrt(hand), rel=1e-12)


def test_state_shape_and_symmetry():
    c = cfg(model=ModelSpec(J=1.0, sigma=1.3), P=3000)
    s1 = fp.lambda_step(fp.initial_state(c), c)
    L = c.grid.L
    assert s1.m.shape == (L + 1,) and s1.K.shape == (L + 1, L + 1)
    assert np.array_equal(s1.K, s1.K.T)
    assert np.all(np.diag(s1.K) >= 0)
    # bounded activation: trace norm at most sigma^2 C^2 T
    assert trace_norm(s1.K, c.grid.dt, L) <= 1.3**2 * c.grid.horizon + 1e-8
    assert hs_norm(s1.K, c.grid.dt, L) <= trace_norm(s1.K, c.grid.dt, L) + 1e-8
    assert s1.paths.shape == (c.n_keep, L + 1)
    assert s1.ktilde.rows.shape == (L, L)


def test_uncoupled_second_moment_matches_plain_simulation():
    # J = 0 and zero input kernel: the map reduces to independent OU paths
    P, T, dt = 10_000, 2.0, 0.02
    c = cfg(model=ModelSpec(J=0.0), T=T, dt=dt, P=P, seed=5)
    n = c.grid.L + 1
    new = fp.lambda_step(state_like(c, np.zeros(n), np.zeros((n, n))), c)
    r = np.random.default_rng(123)
    x = np.zeros(P)
    F2 = [(0.5 * (1 + np.tanh(x))) ** 2]
    for _ in range(c.grid.L):
        x = x - x * dt + r.normal(scale=math.sqrt(dt), size=P)
        F2.append((0.5 * (1 + np.tanh(x))) ** 2)
    F2 = np.array(F2)
    ref, se_ref = F2.mean(axis=1), F2.std(axis=1, ddof=1) / math.sqrt(P)
    pooled = np.hypot(new.se_Ktt, se_ref)
    assert np.all(np.abs(new.Ktt - ref)[1:] <= 3 * pooled[1:])
    assert new.Ktt[0] == 0.25


def test_standard_error_scales_with_p():
    m = ModelSpec(J=1.0)
    a = fp.initial_state(cfg(model=m, P=4000, seed=1))
    b = fp.initial_state(cfg(model=m, P=8000, seed=2))
    ratio = np.median(b.se_m[1:] / a.se_m[1:])
    assert 0.6 <= ratio <= 0.85


def test_s_model_symmetric_law_gives_zero_mean():
    m = ModelSpec(drift="S", activation="identity", A=2.0, k=2, J=1.0)
    c = cfg(model=m, T=1.0, dt=0.01, P=20_000, law=InitialLaw("uniform", (-1.0, 1.0)), seed=3)
    new = fp.lambda_step(fp.initial_state(c), c)
    assert np.all(np.abs(new.m[1:]) <= 3 * new.se_m[1:])


def test_worker_count_does_not_change_results(monkeypatch):
    c = cfg(P=5000, chunk=700, seed=9)
    monkeypatch.setenv("HOPFIELD_MF_WORKERS", "1")
    a = fp.lambda_step(fp.initial_state(c), c)
    monkeypatch.setenv("HOPFIELD_MF_WORKERS", "3")
    b = fp.lambda_step(fp.initial_state(c), c)
    assert a.K.tobytes() == b.K.tobytes() and a.m.tobytes() == b.m.tobytes()


def test_chunking_changes_only_rounding():
    a = fp.initial_state(cfg(P=5000, chunk=700, seed=9))
    b = fp.initial_state(cfg(P=5000, chunk=5000, seed=9))
    np.testing.assert_allclose(a.K, b.K, rtol=1e-12, atol=1e-14)


def test_fresh_noise_flag():
    base = dict(P=2000, seed=4)
    fresh = cfg(**base)
    crn = cfg(fresh_noise=False, **base)
    s0 = fp.initial_state(fresh)
    f1 = fp.lambda_step(s0, fresh, iteration=1)
    f2 = fp.lambda_step(s0, fresh, iteration=2)
    c1 = fp.lambda_step(s0, crn, iteration=1)
    c2 = fp.lambda_step(s0, crn, iteration=2)
    assert not np.array_equal(f1.m, f2.m)
    assert np.array_equal(c1.m, c2.m)


def test_lambda_rescaling_route():
    # X/lam solves the lam = 1 problem with f(lam x)/lam; K scales by lam^2
    lam = 2.0
    a = cfg(model=ModelSpec(J=1.0, lam=lam), P=2000, n_iters=3, seed=6)
    b = cfg(model=ModelSpec(J=1.0, lam=1.0, act_gain=lam, act_scale=1 / lam), P=2000, n_iters=3,
            seed=6)
    sa, _ = fp.solve_fixed_point(a)
    sb, _ = fp.solve_fixed_point(b)
    np.testing.assert_allclose(sa.K, lam**2 * sb.K, rtol=1e-8)
    np.testing.assert_allclose(sa.m, lam * sb.m, rtol=1e-8)


def test_not_psd_input_rejected():
    c = cfg(P=500)
    n = c.grid.L + 1
    K = np.zeros((n, n))
    K[0, 0] = -1.0
    K[1, 1] = 1.0
    with pytest.raises(NotPSDError):
        fp.lambda_step(state_like(c, np.zeros(n), K), c)


def test_non_finite_paths_abort():
    c = cfg(P=200)
    with pytest.raises(FloatingPointError, match="trajectory 0, step 1"):
        fp._simulate(c, draw=0, drive=np.full(c.grid.L, np.inf))
    n = c.grid.L + 1
    with pytest.raises(FloatingPointError, match="non-finite"):
        fp.lambda_step(state_like(c, np.zeros(n), np.full((n, n), np.inf)), c)


def test_divergence_guard(monkeypatch):
    c = cfg(P=200, n_iters=8)
    calls = {"n": 0}

    def growing(state, config, iteration=None):
        calls["n"] += 1
        return fp.FixedPointState(grid=state.grid, m=state.m + 10.0**calls["n"], K=state.K,
                                  se_m=state.se_m, se_K=state.se_K,
                                  iteration=state.iteration + 1)

    monkeypatch.setattr(fp, "lambda_step", growing)
    with pytest.raises(fp.DivergenceError):
        fp.solve_fixed_point(c)
    assert calls["n"] == 4


def test_diagnostics_recorded():
    c = cfg(P=1000, n_iters=3)
    seen = []
    state, diag = fp.solve_fixed_point(c, callback=lambda s, d: seen.append(s.iteration))
    assert seen == [1, 2, 3] and state.iteration == 3
    d = diag.as_dict()
    assert all(len(d[k]) == 3 for k in ("distance", "dm_sup", "dK_sup", "clamps", "wall_time"))
    assert d["total_time"] >= sum(d["wall_time"])
