import numpy as np
import pytest
from numpy.testing import assert_allclose

from dysarar import errors
from dysarar.econweights import (IndicatorPanel, build_weight_matrix,
                                 indicator_weight_matrix, sensitivity_grid,
                                 spearman_matrix)
from dysarar.estimation import FitOptions
from dysarar.model import ModelSpec


def panel_from(values, label="test"):
    return IndicatorPanel(label=label, values=np.asarray(values, dtype=float))


def test_spearman_identical_columns():
    rng = np.random.default_rng(0)
    col = rng.normal(size=50)
    corr = spearman_matrix(panel_from(np.column_stack([col, col])))
    assert corr[0, 1] == pytest.approx(1.0)


def test_spearman_reversed_columns():
    rng = np.random.default_rng(1)
    col = rng.normal(size=50)
    corr = spearman_matrix(panel_from(np.column_stack([col, -col])))
    assert corr[0, 1] == pytest.approx(-1.0)


def test_spearman_monotone_transform_invariance():
    rng = np.random.default_rng(2)
    values = rng.normal(size=(80, 4))
    base = spearman_matrix(panel_from(values))
    transformed = values.copy()
    transformed[:, 0] = np.exp(values[:, 0])
    transformed[:, 1] = values[:, 1] ** 3
    transformed[:, 2] = np.arctan(values[:, 2]) * 5 + 1
    assert_allclose(spearman_matrix(panel_from(transformed)), base, atol=1e-12)


def test_spearman_rejects_constant_column():
    values = np.random.default_rng(3).normal(size=(30, 3))
    values[:, 1] = 2.0
    with pytest.raises(errors.ConstantColumn):
        spearman_matrix(panel_from(values))


def test_spearman_needs_three_rows():
    with pytest.raises(errors.InputError):
        spearman_matrix(panel_from(np.array([[1.0, 2.0], [2.0, 1.0]])))


def test_weights_two_units_perfect_correlation():
    w = build_weight_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    assert_allclose(w.values, [[0.0, 1.0], [1.0, 0.0]])


def test_weights_equal_correlations_give_uniform():
    corr = np.full((3, 3), 0.3)
    np.fill_diagonal(corr, 1.0)
    w = build_weight_matrix(corr)
    expected = np.full((3, 3), 0.5)
    np.fill_diagonal(expected, 0.0)
    assert_allclose(w.values, expected, atol=1e-15)


def test_weights_match_exponential_kernel_formula():
    rng = np.random.default_rng(4)
    for _ in range(10):
        n = int(rng.integers(3, 8))
        corr = _random_correlation(rng, n)
        w = build_weight_matrix(corr)
        d = np.sqrt(2.0 * (1.0 - corr))
        kernel = np.exp(-d)
        np.fill_diagonal(kernel, 0.0)
        assert_allclose(w.values, kernel / kernel.sum(axis=1, keepdims=True),
                        atol=1e-14)
        # the metric at correlation 0.5 is exactly one
        pair = np.full((2, 2), 0.5)
        np.fill_diagonal(pair, 1.0)
        assert np.sqrt(2 * (1 - pair[0, 1])) == pytest.approx(1.0)


def _random_correlation(rng, n):
    a = rng.normal(size=(n, n + 3))
    c = np.corrcoef(a)
    np.fill_diagonal(c, 1.0)
    return c


def test_weight_monotone_in_correlation():
    rng = np.random.default_rng(5)
    for _ in range(30):
        n = int(rng.integers(3, 7))
        corr = _random_correlation(rng, n)
        w = build_weight_matrix(corr)
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    if i != j and i != k and corr[i, j] > corr[i, k] + 1e-12:
                        assert w.values[i, j] > w.values[i, k]


def test_weights_anticorrelation_stays_finite():
    corr = np.array([[1.0, -1.0], [-1.0, 1.0]])
    w = build_weight_matrix(corr)
    assert_allclose(w.values, [[0.0, 1.0], [1.0, 0.0]])


def test_build_weight_matrix_validation():
    with pytest.raises(errors.InputError):
        build_weight_matrix(np.array([[1.0, 0.4], [0.1, 1.0]]))  # asymmetric
    with pytest.raises(errors.InputError):
        build_weight_matrix(np.array([[0.9, 0.1], [0.1, 1.0]]))  # diagonal
    with pytest.raises(errors.InputError):
        build_weight_matrix(np.array([[1.0, 1.4], [1.4, 1.0]]))  # out of range


def test_sensitivity_grid_identical_panels_symmetric():
    rng = np.random.default_rng(6)
    values = rng.normal(size=(300, 3))
    y = rng.standard_normal((250, 3))
    panels = [panel_from(values, "a"), panel_from(values.copy(), "b")]
    spec = ModelSpec.dynamic("sar", 3, 0, sigma_cross="homo", sigma_dynamic="shared")
    grid = sensitivity_grid(panels, y, None, spec,
                            options=FitOptions(n_starts=1, simplex_iters=50,
                                               compute_se=False))
    assert np.isnan(grid.llk[0, 0]) and np.isnan(grid.llk[1, 1])
    assert grid.llk[0, 1] == pytest.approx(grid.llk[1, 0], abs=1e-4)
    assert not grid.errors


def test_sensitivity_grid_needs_two_panels():
    with pytest.raises(errors.InputError):
        sensitivity_grid([panel_from(np.random.default_rng(0).normal(size=(30, 3)))],
                         None, None, ModelSpec.dynamic("sar", 3, 0))


def test_indicator_weight_matrix_is_valid():
    rng = np.random.default_rng(7)
    for seed in range(5):
        values = np.random.default_rng(seed).normal(size=(100, 5))
        w = indicator_weight_matrix(panel_from(values))
        assert np.all(np.diag(w.values) == 0.0)
        assert_allclose(w.values.sum(axis=1), 1.0, atol=1e-12)
