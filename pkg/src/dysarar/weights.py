"""Row-standardized spatial weight matrices.

A valid weight matrix has an exactly zero diagonal, nonnegative entries and
rows summing to one. Row standardization pins the largest real eigenvalue at
+1, so autoregressive parameters in (-1, 1) keep the spatial operators
nonsingular.
"""

from __future__ import annotations

import numpy as np

from . import errors

ROW_SUM_TOL = 1e-12


class WeightMatrix:
    """Immutable row-standardized N x N spatial structure.

    Parameters
    ----------
    weights : ndarray
        Already row-standardized matrix; validated on construction. Use
        :func:`row_normalize` to build one from raw neighbor weights.
    """

    def __init__(self, weights: np.ndarray):
        w = np.asarray(weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise errors.DimensionMismatch(f"weight matrix must be square, got {w.shape}")
        if np.any(np.diag(w) != 0.0):
            raise errors.NonzeroDiagonal("diagonal entries must be exactly zero")
        if np.any(w < 0.0):
            raise errors.NegativeEntry("weights must be nonnegative")
        if np.any(w > 1.0):
            raise errors.NotRowStandardized("entries above 1 cannot occur in a row-standardized matrix")
        rows = w.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > ROW_SUM_TOL):
            raise errors.NotRowStandardized(
                f"row sums deviate from 1 by up to {np.abs(rows - 1.0).max():.3e}"
            )
        w = w.copy()
        w.flags.writeable = False
        self._w = w
        self._spectral_radius: float | None = None

    @property
    def n(self) -> int:
        return self._w.shape[0]

    @property
    def values(self) -> np.ndarray:
        return self._w

    def spectral_radius(self) -> float:
        """Largest eigenvalue modulus; cached after the first computation."""
        if self._spectral_radius is None:
            eig = np.linalg.eigvals(self._w)
            self._spectral_radius = float(np.abs(eig).max()) if eig.size else 0.0
        return self._spectral_radius

    def eigen_interval(self) -> tuple[float, float]:
        """(1/omega_min, 1/omega_max) for matrices with real spectra.

        Only meaningful when the matrix is similar to a symmetric one (e.g.
        built by symmetrizing before normalization); imaginary parts are
        checked and rejected.
        """
        eig = np.linalg.eigvals(self._w)
        if np.abs(eig.imag).max() > 1e-8:
            raise errors.InputError("eigen interval requires a real spectrum")
        lo = eig.real.min()
        hi = eig.real.max()
        if lo >= 0.0 or hi <= 0.0:
            raise errors.InputError("eigen interval requires omega_min < 0 < omega_max")
        return 1.0 / lo, 1.0 / hi

    def __eq__(self, other) -> bool:
        return isinstance(other, WeightMatrix) and np.array_equal(self._w, other._w)

    def __repr__(self) -> str:
        return f"WeightMatrix(n={self.n})"


def row_normalize(raw: np.ndarray) -> WeightMatrix:
    """Divide each row of a raw nonnegative neighbor matrix by its sum.

    Raises
    ------
    NonzeroDiagonal, NegativeEntry, ZeroRow
        When the raw matrix violates the preconditions.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[0] != raw.shape[1]:
        raise errors.DimensionMismatch(f"weight matrix must be square, got {raw.shape}")
    if np.any(np.diag(raw) != 0.0):
        raise errors.NonzeroDiagonal("diagonal entries must be exactly zero")
    if np.any(raw < 0.0):
        raise errors.NegativeEntry("weights must be nonnegative")
    sums = raw.sum(axis=1)
    dead = np.flatnonzero(sums == 0.0)
    if dead.size:
        raise errors.ZeroRow(f"units {dead.tolist()} have no neighbors")
    return WeightMatrix(raw / sums[:, None])


def load_weight_csv(path) -> WeightMatrix:
    """Read a headerless N x N CSV into a validated WeightMatrix."""
    try:
        raw = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise errors.NonNumericCell(f"{path}: {exc}") from exc
    return WeightMatrix(raw)


def save_weight_csv(path, w: WeightMatrix) -> None:
    np.savetxt(path, w.values, delimiter=",", fmt="%.17g")
