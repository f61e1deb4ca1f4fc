import numpy as np
import pytest
from numpy.testing import assert_allclose

from dysarar import errors
from dysarar.simlab import random_weight_matrix
from dysarar.weights import (WeightMatrix, load_weight_csv, row_normalize,
                             save_weight_csv)


def test_row_normalize_single_neighbor():
    w = row_normalize(np.array([[0.0, 2.0], [3.0, 0.0]]))
    assert_allclose(w.values, [[0.0, 1.0], [1.0, 0.0]])


def test_row_normalize_symmetric_triple():
    w = row_normalize(np.ones((3, 3)) - np.eye(3))
    expected = np.full((3, 3), 0.5)
    np.fill_diagonal(expected, 0.0)
    assert_allclose(w.values, expected)


def test_row_normalize_zero_row():
    with pytest.raises(errors.ZeroRow):
        row_normalize(np.array([[0.0, 0.0], [1.0, 0.0]]))


def test_row_normalize_rejects_negative():
    with pytest.raises(errors.NegativeEntry):
        row_normalize(np.array([[0.0, -1.0], [1.0, 0.0]]))


def test_row_normalize_rejects_diagonal():
    with pytest.raises(errors.NonzeroDiagonal):
        row_normalize(np.array([[0.5, 1.0], [1.0, 0.0]]))


def test_row_normalize_idempotent():
    rng = np.random.default_rng(0)
    for _ in range(25):
        n = rng.integers(2, 8)
        raw = rng.random((n, n)) + 0.01
        np.fill_diagonal(raw, 0.0)
        w = row_normalize(raw)
        again = row_normalize(w.values)
        assert np.abs(again.values - w.values).max() < 1e-14


def test_spectral_radius_permutation(swap2):
    assert swap2.spectral_radius() == pytest.approx(1.0)


def test_spectral_radius_row_stochastic_is_one():
    # row sums of one force a unit eigenvalue and bound the radius
    rng = np.random.default_rng(1)
    for _ in range(20):
        n = int(rng.integers(2, 9))
        raw = rng.random((n, n)) + 1e-3
        np.fill_diagonal(raw, 0.0)
        w = row_normalize(raw)
        assert w.spectral_radius() == pytest.approx(1.0, abs=1e-12)


def test_spectral_radius_cached(swap2):
    first = swap2.spectral_radius()
    assert swap2._spectral_radius == first
    assert swap2.spectral_radius() is not None


def test_validation_row_sums():
    with pytest.raises(errors.NotRowStandardized):
        WeightMatrix(np.array([[0.0, 0.5], [0.5, 0.0]]))


def test_random_weight_matrix_real_spectrum():
    for seed in range(10):
        w = random_weight_matrix(6, 0.7, seed)
        assert np.all(np.diag(w.values) == 0.0)
        assert_allclose(w.values.sum(axis=1), 1.0, atol=1e-12)
        eig = np.linalg.eigvals(w.values)
        assert np.abs(eig.imag).max() < 1e-10


def test_random_weight_matrix_deterministic():
    a = random_weight_matrix(5, 0.6, 42)
    b = random_weight_matrix(5, 0.6, 42)
    assert np.array_equal(a.values, b.values)


def test_random_weight_matrix_retry_exhausted():
    with pytest.raises(errors.RetryExhausted):
        random_weight_matrix(2, 1e-12, seed=0, max_retries=3)


def test_csv_roundtrip(tmp_path):
    w = random_weight_matrix(5, 0.8, 3)
    path = tmp_path / "w.csv"
    save_weight_csv(path, w)
    back = load_weight_csv(path)
    assert np.array_equal(back.values, w.values)


def test_eigen_interval():
    w = random_weight_matrix(6, 0.9, 0)
    lo, hi = w.eigen_interval()
    assert lo < -1.0 + 1e-9 or lo < 0.0
    assert hi == pytest.approx(1.0, abs=1e-10)
