import math

import numpy as np
import pytest
from scipy import stats

from hopfield_mf.model import (BoundaryExitError, InitialLaw, ModelError, ModelSpec, TimeGrid,
                               activation, simulate_uncoupled)
from hopfield_mf.network import (WeightMatrix, empirical_stats, sample_weights_bernoulli,
                                 sample_weights_gaussian, simulate_network)

# p = 1/4, J = sigma = 1, N = 4: 1/4 -/+ (1/2) sqrt(1/3) (1, 3)
BER_LO = 0.25 - 0.5 * math.sqrt(1 / 3)
BER_HI = 0.25 + 1.5 * math.sqrt(1 / 3)


def test_gaussian_grand_mean():
    N = 10_000
    W = sample_weights_gaussian(N, 0.0, 1.0, seed=2, storage="regen")
    mean, var = W.entry_moments()
    assert abs(mean) <= 3 / N**1.5
    assert var == pytest.approx(1 / N, rel=5 * math.sqrt(2) / N)


def test_gaussian_degenerate_and_deterministic():
    W = sample_weights_gaussian(50, 2.0, 1e-12, seed=0).to_dense()
    np.testing.assert_allclose(W, 2.0 / 50, atol=1e-11)
    a = sample_weights_gaussian(64, 1.0, 1.0, seed=7).to_dense()
    b = sample_weights_gaussian(64, 1.0, 1.0, seed=7).to_dense()
    c = sample_weights_gaussian(64, 1.0, 1.0, seed=8).to_dense()
    assert a.tobytes() == b.tobytes() and not np.array_equal(a, c)


def test_regenerated_rows_match_stored():
    N = 300
    dense = sample_weights_gaussian(N, 1.0, 1.0, seed=3, storage="dense")
    regen = sample_weights_gaussian(N, 1.0, 1.0, seed=3, storage="regen")
    assert regen.dense is None
    np.testing.assert_array_equal(regen.rows(10, 20), dense.dense[10:20])
    f = np.random.default_rng(0).random(N)
    np.testing.assert_allclose(regen.matvec(f), dense.matvec(f), rtol=0, atol=1e-13)
    assert sample_weights_gaussian(N, 1, 1, 3, dense_limit=100).storage == "regen"


def test_bernoulli_two_point_values():
    W = sample_weights_bernoulli(4, 1.0, 1.0, 0.25, seed=1)
    assert W.support() == pytest.approx((BER_LO, BER_HI), abs=1e-15)
    lo, hi = BER_LO, BER_HI
    # exact moments of the two-point law
    assert 0.75 * lo + 0.25 * hi == pytest.approx(0.25, abs=1e-15)
    assert 0.75 * lo**2 + 0.25 * hi**2 - 0.0625 == pytest.approx(0.25, abs=1e-15)
    vals = np.unique(W.to_dense())
    assert set(np.round(vals, 12)) <= {round(lo, 12), round(hi, 12)}


def test_bernoulli_moments_and_storage():
    N = 1000
    W = sample_weights_bernoulli(N, 1.0, 1.0, 0.25, seed=5, storage="sparse")
    mean, var = W.entry_moments()
    assert var == pytest.approx(1 / N, rel=0.01)
    assert mean == pytest.approx(1 / N, abs=5 * math.sqrt(var / N**2))
    D = sample_weights_bernoulli(N, 1.0, 1.0, 0.25, seed=5, storage="dense")
    f = np.random.default_rng(1).random(N)
    np.testing.assert_allclose(W.matvec(f), D.matvec(f), atol=1e-12)
    np.testing.assert_array_equal(W.to_dense(), D.dense)
    assert W.pattern.nnz == pytest.approx(0.25 * N * N, rel=0.01)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_bernoulli_rejects_p(p):
    with pytest.raises(ModelError):
        sample_weights_bernoulli(10, 1.0, 1.0, p, seed=0)


def test_single_neuron_matches_uncoupled():
    W = WeightMatrix(N=1, J=0.0, sigma=1.0, sampler="gaussian", seed=0, storage="dense",
                     dense=np.zeros((1, 1)))
    grid = TimeGrid(3.0, 0.01)
    for model, law in [(ModelSpec(), InitialLaw("gaussian", (0.0, 1.0))),
                       (ModelSpec(drift="S", activation="identity", k=2),
                        InitialLaw("uniform", (-1.0, 1.0)))]:
        a = simulate_network(model, W, grid, law, seed=4)
        b = simulate_uncoupled(model, grid, law, 1, seed=4)
        assert a.X.tobytes() == b.X.tobytes()


def test_constant_activation_quenched_means():
    N, T = 400, 6.0
    W = sample_weights_gaussian(N, 1.0, 1.0, seed=9)
    grid = TimeGrid(T, 0.01)
    x0 = 0.5
    b = simulate_network(ModelSpec(activation="constant_one", J=1.0), W, grid,
                         InitialLaw("point_mass", (x0,)), seed=2)
    S = W.dense.sum(axis=1)
    t = grid.times
    # per-neuron deterministic part, up to O(dt) Euler bias
    expected = S[:, None] * (1 - np.exp(-t)) + x0 * np.exp(-t)
    resid = (b.X - expected).mean(axis=0)
    se = np.sqrt((1 - np.exp(-2 * t)) / 2 / N)
    assert np.all(np.abs(resid)[1:] <= 3 * se[1:] + 0.01)
    # grand mean follows J + (x0 - J) e^{-t}
    st = empirical_stats(b, ModelSpec(activation="identity"))
    grand = 1.0 + (x0 - 1.0) * np.exp(-t)
    assert np.all(np.abs(st.m - grand)[1:] <= 3 * st.se_m[1:] + 0.01)


def test_constant_activation_stationary_variance():
    N = 4000
    W = sample_weights_gaussian(N, 1.0, 1.0, seed=11)
    grid = TimeGrid(8.0, 0.01)
    b = simulate_network(ModelSpec(activation="constant_one", J=1.0), W, grid, seed=6)
    st = empirical_stats(b, ModelSpec(activation="identity"))
    # sigma^2 + lam^2 / 2 with the Euler factor 1/(1 - dt/2) on the noise part
    target = 1.0 + 0.5 / (1 - 0.005)
    assert abs(st.x_var[-1] - target) <= 3 * st.se_x_var[-1]


def test_empirical_stats_examples():
    grid = TimeGrid(1.0, 0.1)
    W = sample_weights_gaussian(20, 1.0, 1.5, seed=0)
    b = simulate_network(ModelSpec(activation="constant_one", sigma=1.5), W, grid, seed=0)
    st = empirical_stats(b, ModelSpec(activation="constant_one", sigma=1.5))
    assert np.all(st.m == 1.0) and np.all(st.K == 2.25)
    one = b.__class__(X=b.X[:1], dW=b.dW[:1], seed=0)
    model = ModelSpec(sigma=1.5)
    st1 = empirical_stats(one, model)
    f = activation(model, one.X[0])
    np.testing.assert_allclose(st1.K, 2.25 * np.outer(f, f), rtol=1e-15)
    assert np.array_equal(st1.K, st1.K.T)


def test_exchangeable_marginals():
    # relabelling neurons leaves the law of X(T) unchanged (diagnostic level)
    N = 500
    grid = TimeGrid(2.0, 0.02)
    W = sample_weights_gaussian(N, 1.0, 1.0, seed=1)
    perm = np.random.default_rng(0).permutation(N)
    Wp = WeightMatrix(N=N, J=1.0, sigma=1.0, sampler="gaussian", seed=1, storage="dense",
                      dense=W.dense[np.ix_(perm, perm)])
    a = simulate_network(ModelSpec(J=1.0), W, grid, seed=3).X[:, -1]
    b = simulate_network(ModelSpec(J=1.0), Wp, grid, seed=3).X[:, -1]
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_network_s_model_boundary_policy():
    W = sample_weights_gaussian(50, 1.0, 1.0, seed=0)
    m = ModelSpec(drift="S", activation="identity", A=1.05, k=1, J=1.0)
    with pytest.raises(BoundaryExitError):
        simulate_network(m, W, TimeGrid(2.0, 0.2), InitialLaw("uniform", (-1.0, 1.0)), seed=0)
