import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hopfield_mf import rng
from hopfield_mf.f1 import var_c_f1
from hopfield_mf.kernel_ops import ktilde_family, resolvent
from hopfield_mf.volterra import (path_values, reconstruct_p_brownian, solve_increments,
                                  solve_resolvent_form, tilde_noise)


def noise(seed, P, L, dt):
    return rng.normals(rng.derive_key(seed, rng.NOISE), 0, P, L) * math.sqrt(dt)


def test_trivial_kernels():
    dt, L = 0.01, 100
    dW = noise(0, 3, L, dt)
    zero = np.zeros((L, L))
    np.testing.assert_array_equal(solve_increments(zero, dW, dt), dW)
    B = path_values(solve_increments(zero, dW, dt, c=np.ones(L)))
    t = np.arange(L + 1) * dt
    np.testing.assert_allclose(B, path_values(dW) + t, atol=1e-12)
    np.testing.assert_allclose(solve_resolvent_form(zero, dW, dt, c=np.ones(L)),
                               dW + dt, atol=1e-15)


def test_diagonal_is_ignored():
    dt, L = 0.05, 30
    kappa = np.tril(np.random.default_rng(1).normal(size=(L, L)))
    dW = noise(1, 1, L, dt)[0]
    np.testing.assert_array_equal(solve_increments(kappa, dW, dt),
                                  solve_increments(np.tril(kappa, -1), dW, dt))


def test_forward_substitution_by_hand():
    dt = 0.1
    kappa = np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [1.0, -1.0, 0.0]])
    dW = np.array([1.0, 0.5, -0.2])
    c = np.array([0.0, 1.0, 2.0])
    b0 = 1.0
    b1 = 0.5 + 0.1 + 0.1 * 2.0 * b0
    b2 = -0.2 + 0.2 + 0.1 * (1.0 * b0 - 1.0 * b1)
    np.testing.assert_allclose(solve_increments(kappa, dW, dt, c), [b0, b1, b2], rtol=1e-15)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), L=st.integers(2, 120), scale=st.floats(0.0, 3.0),
       dt=st.floats(1e-3, 0.1))
def test_routes_agree(seed, L, scale, dt):
    r = np.random.default_rng(seed)
    kappa = np.tril(r.normal(scale=scale, size=(L, L)), -1)
    dW = r.normal(scale=math.sqrt(dt), size=(5, L))
    c = r.normal(size=L)
    a = solve_increments(kappa, dW, dt, c)
    b = solve_resolvent_form(kappa, dW, dt, c)
    assert np.max(np.abs(a - b)) <= 1e-10 * max(1.0, np.max(np.abs(a)))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), L=st.integers(2, 80))
def test_affine_in_noise_and_drift(seed, L):
    r = np.random.default_rng(seed)
    dt = 0.02
    kappa = np.tril(r.normal(size=(L, L)), -1)
    dW, c = r.normal(size=L), r.normal(size=L)
    joint = solve_increments(kappa, dW, dt, c)
    split = solve_increments(kappa, dW, dt) + solve_increments(kappa, np.zeros(L), dt, c)
    np.testing.assert_allclose(joint, split, atol=1e-12)


def test_tilde_noise_is_causal_sum():
    kappa = np.arange(16.0).reshape(4, 4)
    dW = np.array([1.0, 2.0, 3.0, 4.0])
    np.testing.assert_allclose(tilde_noise(kappa, dW), [0.0, 4.0, 8 + 18, 12 + 26 + 42])


def test_f1_interaction_noise_variance():
    # C_t = lam W_t + (dt/lam^2) sum Ktilde dC has variance t (lam^2 + sigma^2 t)
    dt, L, P = 0.01, 200, 100_000
    fam = ktilde_family(np.ones((L, L)), L, 1.0, dt)
    dC = solve_increments(fam.kappa(), noise(7, P, L, dt), dt)
    C = path_values(dC)
    t = np.arange(L + 1) * dt
    v = C.var(axis=0, ddof=1)
    se = v * math.sqrt(2.0 / (P - 1))
    err = np.abs(v - var_c_f1(t, 1.0, 1.0))
    # Euler bias of the discrete family is O(dt)
    assert np.all(err[1:] <= 3 * se[1:] + 2 * dt * t[1:] * (1 + t[1:]))
    mean = C.mean(axis=0)
    assert np.all(np.abs(mean[1:]) <= 3 * np.sqrt(v[1:] / P))


def test_f1_exact_solution_strong_error():
    # exact solution C_t = (1 + t) int_0^t dW/(1 + s) on the same noise
    errs = []
    for L in (100, 200, 400):
        dt = 2.0 / L
        fine = noise(3, 200, 400, 2.0 / 400)
        dW = fine.reshape(200, L, -1).sum(axis=2)
        fam = ktilde_family(np.ones((L, L)), L, 1.0, dt)
        C = path_values(solve_resolvent_form(fam.kappa(), dW, dt))
        t = np.arange(L + 1) * dt
        # reference from the finest grid
        tf = np.arange(401) * (2.0 / 400)
        I = np.concatenate([np.zeros((200, 1)), np.cumsum(fine / (1 + tf[:-1]), axis=1)], axis=1)
        exact = ((1 + tf) * I)[:, :: 400 // L]
        errs.append(np.sqrt(np.mean((C - exact) ** 2)))
        assert C.shape == exact.shape and t[-1] == pytest.approx(2.0)
    assert errs[-1] < errs[0]
    assert errs[-1] < 0.05


def test_resolvent_route_accepts_precomputed_H():
    dt, L = 0.02, 50
    fam = ktilde_family(np.ones((L, L)), L, 1.0, dt)
    dW = noise(2, 4, L, dt)
    H = resolvent(fam.kappa(), dt)
    np.testing.assert_array_equal(solve_resolvent_form(fam.kappa(), dW, dt, H=H),
                                  solve_resolvent_form(fam.kappa(), dW, dt))


def test_reconstruct_p_brownian():
    dt = 0.1
    dC = np.array([0.3, -0.1, 0.2])
    np.testing.assert_array_equal(reconstruct_p_brownian(dC, np.zeros(3), 1.0, dt), dC)
    B = path_values(reconstruct_p_brownian(np.zeros(3), np.full(3, 2.0), 4.0, dt))
    np.testing.assert_allclose(B, 2.0 * np.arange(4) * dt / 4.0)
    np.testing.assert_allclose(reconstruct_p_brownian(dC, np.ones(3), 2.0, dt), (dt + dC) / 2)
    with pytest.raises(ValueError):
        reconstruct_p_brownian(dC, np.zeros(3), 0.0, dt)
