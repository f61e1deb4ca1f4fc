import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import random_natural
from dysarar import errors
from dysarar.score import (MappingBounds, NaturalParams, ScoreConfig,
                           TildeParams, fisher_information_mc, inverse_map,
                           jacobian, log_likelihood_t, map_params,
                           natural_vector, scaled_score, score_natural)
from dysarar.simlab import random_weight_matrix
from dysarar.weights import WeightMatrix


def tp(values, n):
    return TildeParams(values=np.asarray(values, dtype=float), n_units=n)


def test_map_logistic_midpoint(bounds):
    nat = map_params(tp([0.0, 0.0, 0.0, 0.0], n=2), bounds)
    assert nat.rho == pytest.approx(0.0, abs=1e-15)
    assert nat.lam == pytest.approx(0.0, abs=1e-15)
    assert_allclose(nat.sigma, 1.0)


def test_map_saturates_at_upper_bound(bounds):
    nat = map_params(tp([20.0, 0.0, 0.0, 0.0], n=2), bounds)
    assert nat.rho == pytest.approx(bounds.rho_high, abs=1e-8)
    assert nat.rho < bounds.rho_high  # exclusive: the image is the open interval


def test_map_inverse_bijection(bounds):
    rng = np.random.default_rng(3)
    for _ in range(50):
        n, k = int(rng.integers(1, 5)), int(rng.integers(0, 4))
        t = tp(rng.normal(scale=2.0, size=n + k + 2), n=n)
        back = inverse_map(map_params(t, bounds), bounds)
        assert np.abs(back.values - t.values).max() < 1e-10


def test_jacobian_values_at_origin(bounds):
    j = np.diag(jacobian(tp([0.0, 0.0, 0.5, 0.0, 0.0], n=2), bounds))
    assert j[0] == pytest.approx(0.5 * (1 - 1e-6), rel=1e-9)  # (U-L)/4
    assert j[2] == 1.0
    assert j[3] == pytest.approx(2.0)  # d sigma^2 / d sigma~ at sigma~ = 0


def test_jacobian_matches_finite_differences(bounds):
    rng = np.random.default_rng(4)
    for _ in range(25):
        n, k = int(rng.integers(1, 5)), int(rng.integers(0, 3))
        d = n + k + 2
        t = tp(rng.normal(size=d), n=n)
        jac = jacobian(t, bounds)
        h = 1e-6
        fd = np.zeros((d, d))
        for i in range(d):
            e = np.zeros(d)
            e[i] = h
            up = natural_vector(map_params(tp(t.values + e, n), bounds))
            dn = natural_vector(map_params(tp(t.values - e, n), bounds))
            fd[:, i] = (up - dn) / (2 * h)
        assert np.allclose(jac, fd, rtol=1e-8, atol=1e-8)


def test_llk_standard_normal_mode(swap2):
    theta = NaturalParams(rho=0.0, lam=0.0, beta=np.zeros(1), sigma=np.ones(2))
    x = np.zeros((2, 1))
    assert log_likelihood_t(np.zeros(2), x, theta, swap2, swap2) == pytest.approx(
        -np.log(2 * np.pi))
    assert log_likelihood_t(np.array([1.0, 2.0]), x, theta, swap2, swap2) == pytest.approx(
        -np.log(2 * np.pi) - 2.5)


def test_llk_matches_dense_gaussian_oracle():
    from scipy.stats import multivariate_normal

    rng = np.random.default_rng(5)
    for _ in range(30):
        n, k = 4, 2
        w1 = random_weight_matrix(n, 0.8, int(rng.integers(1 << 30)))
        w2 = random_weight_matrix(n, 0.8, int(rng.integers(1 << 30)))
        theta = random_natural(rng, n, k)
        x = rng.normal(size=(n, k))
        y = rng.normal(size=n)
        a_inv = np.linalg.inv(np.eye(n) - theta.rho * w1.values)
        b_inv = np.linalg.inv(np.eye(n) - theta.lam * w2.values)
        cov = a_inv @ b_inv @ np.diag(theta.sigma**2) @ b_inv.T @ a_inv.T
        oracle = multivariate_normal(mean=a_inv @ x @ theta.beta, cov=cov).logpdf(y)
        assert log_likelihood_t(y, x, theta, w1, w2) == pytest.approx(oracle, abs=1e-10)


def test_llk_invariant_under_unit_relabeling():
    rng = np.random.default_rng(6)
    n, k = 5, 2
    w1 = random_weight_matrix(n, 0.8, 10)
    w2 = random_weight_matrix(n, 0.8, 11)
    theta = random_natural(rng, n, k)
    x = rng.normal(size=(n, k))
    y = rng.normal(size=n)
    base = log_likelihood_t(y, x, theta, w1, w2)
    for _ in range(5):
        perm = rng.permutation(n)
        theta_p = NaturalParams(rho=theta.rho, lam=theta.lam, beta=theta.beta,
                                sigma=theta.sigma[perm])
        w1_p = WeightMatrix(w1.values[np.ix_(perm, perm)])
        w2_p = WeightMatrix(w2.values[np.ix_(perm, perm)])
        assert log_likelihood_t(y[perm], x[perm], theta_p, w1_p, w2_p) == pytest.approx(
            base, abs=1e-10)


def test_score_rho_quadratic_form(swap2):
    theta = NaturalParams(rho=0.0, lam=0.0, beta=np.zeros(1), sigma=np.ones(2))
    g = score_natural(np.array([1.0, 2.0]), np.zeros((2, 1)), theta, swap2, swap2)
    assert g[0] == pytest.approx(4.0)  # y'W1y with zero trace correction


def test_score_sigma_vanishes_at_unit_residual(swap2):
    # residual equals sigma: r_j = 1, sigma_j = 1 -> score zero
    theta = NaturalParams(rho=0.0, lam=0.0, beta=np.zeros(1), sigma=np.ones(2))
    g = score_natural(np.ones(2), np.zeros((2, 1)), theta, swap2, swap2)
    assert_allclose(g[2:], 0.0, atol=1e-15)


def test_score_beta_zero_when_x_zero(swap2):
    rng = np.random.default_rng(8)
    theta = random_natural(rng, 2, 2)
    g = score_natural(rng.normal(size=2), np.zeros((2, 2)), theta, swap2, swap2)
    assert_allclose(g[2:4], 0.0, atol=1e-15)


def test_score_matches_finite_differences():
    rng = np.random.default_rng(9)
    for _ in range(40):
        n = int(rng.integers(2, 6))
        k = int(rng.integers(0, 4))
        w1 = random_weight_matrix(n, 0.8, int(rng.integers(1 << 30)))
        w2 = random_weight_matrix(n, 0.8, int(rng.integers(1 << 30)))
        theta = random_natural(rng, n, k, rho_scale=0.7, lam_scale=0.7)
        x = rng.normal(size=(n, k))
        y = rng.normal(size=n)
        g = score_natural(y, x, theta, w1, w2)
        v0 = natural_vector(theta)
        for i in range(len(v0)):
            h = 1e-6 * max(1.0, abs(v0[i]))
            e = np.zeros(len(v0))
            e[i] = h

            def rebuild(v):
                return NaturalParams(rho=v[0], lam=v[1], beta=v[2:2 + k],
                                     sigma=np.sqrt(v[2 + k:]))

            fd = (log_likelihood_t(y, x, rebuild(v0 + e), w1, w2)
                  - log_likelihood_t(y, x, rebuild(v0 - e), w1, w2)) / (2 * h)
            assert g[i] == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_scaled_score_identity_scaling(swap2, bounds):
    rng = np.random.default_rng(10)
    t = tp(rng.normal(size=5), n=2)
    y = rng.normal(size=2)
    x = rng.normal(size=(2, 1))
    cfg = ScoreConfig(score_clip=None)
    s = scaled_score(y, x, t, bounds, cfg, swap2, swap2)
    theta = map_params(t, bounds)
    expected = np.diag(jacobian(t, bounds)) * score_natural(y, x, theta, swap2, swap2)
    assert_allclose(s, expected, atol=1e-12)


def test_scaled_score_rho_example(swap2, bounds):
    t = tp([0.0, 0.0, 0.0, 0.0, 0.0], n=2)
    s = scaled_score(np.array([1.0, 2.0]), np.zeros((2, 1)), t, bounds,
                     ScoreConfig(score_clip=None), swap2, swap2)
    assert s[0] == pytest.approx(2.0, rel=1e-5)  # jacobian 0.5 times grad 4


def test_scaled_score_clipping(swap2, bounds):
    t = tp([0.0, 0.0, 0.0, 0.0, 0.0], n=2)
    y = np.array([30.0, -30.0])  # huge residuals push sigma scores far above 10
    raw = scaled_score(y, np.zeros((2, 1)), t, bounds, ScoreConfig(score_clip=None),
                       swap2, swap2)
    assert raw.max() > 10.0
    clipped = scaled_score(y, np.zeros((2, 1)), t, bounds, ScoreConfig(score_clip=10.0),
                           swap2, swap2)
    assert clipped.max() == pytest.approx(10.0)
    assert clipped.min() >= -10.0


def test_scaled_score_matches_tilde_finite_differences(bounds):
    rng = np.random.default_rng(12)
    n, k = 3, 1
    w1 = random_weight_matrix(n, 0.9, 21)
    w2 = random_weight_matrix(n, 0.9, 22)
    for _ in range(20):
        t = tp(rng.normal(scale=0.5, size=n + k + 2), n=n)
        y = rng.normal(size=n)
        x = rng.normal(size=(n, k))
        s = scaled_score(y, x, t, bounds, ScoreConfig(score_clip=None), w1, w2)
        for i in range(n + k + 2):
            e = np.zeros(n + k + 2)
            e[i] = 1e-6
            fd = (log_likelihood_t(y, x, map_params(tp(t.values + e, n), bounds), w1, w2)
                  - log_likelihood_t(y, x, map_params(tp(t.values - e, n), bounds), w1, w2)) / 2e-6
            assert s[i] == pytest.approx(fd, rel=1e-5, abs=1e-6)


def test_fisher_information_symmetric_psd(w_pair_4):
    w1, w2 = w_pair_4
    rng = np.random.default_rng(13)
    theta = random_natural(rng, 4, 1)
    x = rng.normal(size=(4, 1))
    info = fisher_information_mc(theta, x, w1, w2, draws=60, seed=0)
    assert np.abs(info - info.T).max() < 1e-12
    assert np.linalg.eigvalsh(info).min() > -1e-10


def test_fisher_information_sigma_diagonal(swap2):
    # Var(d llk / d sigma^2) = Var(-1/2 + eps^2/2) = 1/2 at sigma = 1
    theta = NaturalParams(rho=0.0, lam=0.0, beta=np.empty(0), sigma=np.ones(2))
    info = fisher_information_mc(theta, np.empty((2, 0)), swap2, swap2,
                                 draws=40000, seed=1)
    assert info[2, 2] == pytest.approx(0.5, rel=0.05)
    assert info[3, 3] == pytest.approx(0.5, rel=0.05)


def test_fisher_information_beta_block(swap2):
    rng = np.random.default_rng(14)
    theta = NaturalParams(rho=0.0, lam=0.4, beta=np.array([1.0, -0.5]),
                          sigma=np.array([0.8, 1.3]))
    x = rng.normal(size=(2, 2))
    info = fisher_information_mc(theta, x, swap2, swap2, draws=40000, seed=2)
    b = np.eye(2) - 0.4 * swap2.values
    expected = x.T @ b.T @ np.diag(theta.sigma**-2) @ b @ x
    assert_allclose(info[2:4, 2:4], expected, rtol=0.05)


def test_scaled_score_with_information_scaling_finite(w_pair_4, bounds):
    w1, w2 = w_pair_4
    rng = np.random.default_rng(15)
    t = tp(rng.normal(scale=0.3, size=4 + 1 + 2), n=4)
    y = rng.normal(size=4)
    x = rng.normal(size=(4, 1))
    for gamma in (-0.5, -1.0):
        cfg = ScoreConfig(gamma=gamma, fim_draws=50, fim_seed=3)
        s = scaled_score(y, x, t, bounds, cfg, w1, w2)
        assert np.all(np.isfinite(s))


def test_score_config_validation():
    with pytest.raises(errors.InputError):
        ScoreConfig(gamma=0.3)
    with pytest.raises(errors.InputError):
        ScoreConfig(score_clip=-1.0)
    with pytest.raises(errors.InputError):
        ScoreConfig(fim_draws=1)
