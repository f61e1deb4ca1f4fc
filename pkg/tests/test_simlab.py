import numpy as np
import pytest
from numpy.testing import assert_allclose

from dysarar import errors
from dysarar.estimation import FitOptions
from dysarar.simlab import (DEFAULT_REGRESSOR_COV, FiniteSampleConfig,
                            SSararConfig, filtering_experiment,
                            finite_sample_experiment, gen_regressors,
                            random_weight_matrix, simulate_ssarar_params,
                            table2_spec, table2_truth)

TINY_FIT = FitOptions(n_starts=1, simplex_iters=50, compute_se=False)


def test_ssarar_constant_when_degenerate():
    cfg = SSararConfig(t_len=50, phi=0.0, u=0.0)
    path = simulate_ssarar_params(cfg, seed=0)
    assert_allclose(path, np.tile(cfg.mu, (50, 1)))


def test_ssarar_stationary_variance():
    cfg = SSararConfig(t_len=200_000, phi=0.99, u=0.01)
    path = simulate_ssarar_params(cfg, seed=1)
    target = cfg.u / (1 - cfg.phi**2)
    emp = path[1000:].var(axis=0)
    assert np.all(np.abs(emp / target - 1.0) < 0.25)  # long-memory AR(1), loose


def test_ssarar_ergodic_mean():
    cfg = SSararConfig(t_len=100_000, phi=0.9, u=0.01)
    path = simulate_ssarar_params(cfg, seed=2)
    sd_mean = np.sqrt(cfg.u / (1 - cfg.phi**2))
    # effective sample size scaled by (1+phi)/(1-phi) autocorrelation factor
    se = sd_mean * np.sqrt((1 + cfg.phi) / (1 - cfg.phi) / path.shape[0])
    assert np.all(np.abs(path.mean(axis=0) - cfg.mu) < 4 * se)


def test_default_regressor_covariance_is_pd():
    eig = np.linalg.eigvalsh(DEFAULT_REGRESSOR_COV)
    assert eig.min() > 0.0


def test_gen_regressors_constant_column():
    cfg = SSararConfig(t_len=500)
    x = gen_regressors(cfg, seed=3)
    assert x.shape == (500, 4, 2)
    assert np.all(x[:, :, 0] == 1.0)


def test_gen_regressors_identity_covariance():
    cfg = SSararConfig(t_len=20_000, v=np.eye(4))
    x = gen_regressors(cfg, seed=4)
    corr = np.corrcoef(x[:, :, 1], rowvar=False)
    off = corr[~np.eye(4, dtype=bool)]
    assert np.abs(off).max() < 3.0 / np.sqrt(cfg.t_len)


def test_gen_regressors_default_pairwise_correlation():
    cfg = SSararConfig(t_len=40_000)
    x = gen_regressors(cfg, seed=5)
    corr = np.corrcoef(x[:, :, 1], rowvar=False)
    se = 1.0 / np.sqrt(cfg.t_len)
    assert abs(corr[1, 0] - 0.3) < 3 * se
    assert abs(corr[2, 0] - 0.4) < 3 * se


def test_gen_regressors_rejects_non_pd():
    v = np.full((4, 4), 1.0)
    v[0, 1] = v[1, 0] = 2.0
    cfg = SSararConfig(t_len=10, v=v)
    with pytest.raises(errors.NonPDCovariance):
        gen_regressors(cfg, seed=0)


def test_table2_truth_matches_spec_layout():
    spec = table2_spec()
    truth = table2_truth(spec)
    assert truth.kappa[0] == 0.9
    assert truth.f[1] == 0.04
    assert truth.r[2] == 0.982
    assert spec.n_free_params == 24


def test_finite_sample_requires_distinct_weights():
    spec = table2_spec()
    w = random_weight_matrix(6, 0.8, 0)
    cfg = FiniteSampleConfig(truth=table2_truth(spec), spec=spec,
                             t_lens=(200,), n_replications=2)
    with pytest.raises(errors.InputError):
        finite_sample_experiment(cfg, w, w)


def test_finite_sample_smoke_and_m1_sd_unavailable():
    spec = table2_spec()
    w1 = random_weight_matrix(6, 0.8, 1)
    w2 = random_weight_matrix(6, 0.8, 2)
    cfg = FiniteSampleConfig(truth=table2_truth(spec), spec=spec,
                             t_lens=(300,), n_replications=1, seed=9)
    rep = finite_sample_experiment(cfg, w1, w2, fit_options=TINY_FIT)
    assert rep.estimates[300].shape == (1, 24)
    assert np.all(np.isnan(rep.sd[300]))
    assert_allclose(rep.mean[300], rep.estimates[300][0])
    assert len(rep.coefficient_names) == 24


def test_filtering_experiment_single_replication_median_is_path():
    cfg = SSararConfig(t_len=200, n_replications=1)
    rep = filtering_experiment(cfg, [0.990], seed=6, fit_options=TINY_FIT)
    chart = rep.fancharts[0.990]
    assert_allclose(chart[..., 0], chart[..., 1])  # q10 == median for B=1
    assert_allclose(chart[..., 1], chart[..., 2])
    assert rep.rel_mse[0] == pytest.approx(np.ones(8))


def test_filtering_experiment_quantiles_ordered_and_sigma_positive():
    cfg = SSararConfig(t_len=200, n_replications=3)
    rep = filtering_experiment(cfg, [0.900, 0.990], seed=7, fit_options=TINY_FIT,
                               workers=2)
    for phi, chart in rep.fancharts.items():
        assert np.all(chart[..., 0] <= chart[..., 1] + 1e-12)
        assert np.all(chart[..., 1] <= chart[..., 2] + 1e-12)
        assert np.all(chart[:, 4:, :3] > 0.0)  # filtered sigma paths positive
    assert rep.mse.shape == (2, 8)


def test_filtering_experiment_requires_reference_phi():
    cfg = SSararConfig(t_len=100, n_replications=1)
    with pytest.raises(errors.InputError):
        filtering_experiment(cfg, [0.5], seed=0, reference_phi=0.99)
