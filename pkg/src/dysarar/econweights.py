"""Economically defined spatial weights from financial-indicator panels.

Concordance between units is measured by Spearman rank correlation of an
indicator (market capitalization, price-to-book, dividend yield, ...);
the distance d_ij = sqrt(2 (1 - rho^s_ij)) feeds an exponential kernel whose
row sums already normalize to one.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import errors
from .estimation import FitOptions, fit_mle
from .model import ModelSpec
from .weights import WeightMatrix


@dataclass(frozen=True, eq=False)
class IndicatorPanel:
    """Labeled T x N panel of one financial indicator."""

    label: str
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise errors.DimensionMismatch("indicator panel must be (T, n)")
        object.__setattr__(self, "values", v)

    @property
    def n_units(self) -> int:
        return self.values.shape[1]


def spearman_matrix(panel: IndicatorPanel) -> np.ndarray:
    """Pairwise Spearman correlations (average ranks for ties)."""
    v = panel.values
    if v.shape[0] < 3:
        raise errors.InputError("need at least 3 observations per column")
    if np.any(v.max(axis=0) == v.min(axis=0)):
        bad = np.flatnonzero(v.max(axis=0) == v.min(axis=0)).tolist()
        raise errors.ConstantColumn(f"columns {bad} are constant in panel {panel.label!r}")
    ranks = stats.rankdata(v, axis=0)
    corr = np.corrcoef(ranks, rowvar=False)
    np.fill_diagonal(corr, 1.0)
    return 0.5 * (corr + corr.T)


def build_weight_matrix(corr: np.ndarray) -> WeightMatrix:
    """Exponential-kernel weights w_ij = exp(-d_ij) / sum_k exp(-d_ik), zero diagonal."""
    corr = np.asarray(corr, dtype=float)
    n = corr.shape[0]
    if corr.ndim != 2 or corr.shape != (n, n):
        raise errors.DimensionMismatch("correlation matrix must be square")
    if np.max(np.abs(corr - corr.T)) > 1e-10:
        raise errors.InputError("correlation matrix must be symmetric")
    if np.any(np.abs(np.diag(corr) - 1.0) > 1e-10):
        raise errors.InputError("correlation matrix must have a unit diagonal")
    if np.any(np.abs(corr) > 1.0 + 1e-12):
        raise errors.InputError("correlation entries must lie in [-1, 1]")
    d = np.sqrt(2.0 * np.clip(1.0 - corr, 0.0, None))
    kernel = np.exp(-d)
    np.fill_diagonal(kernel, 0.0)
    w = kernel / kernel.sum(axis=1, keepdims=True)
    np.fill_diagonal(w, 0.0)
    return WeightMatrix(w)


def indicator_weight_matrix(panel: IndicatorPanel) -> WeightMatrix:
    """Convenience: Spearman correlations then the exponential kernel."""
    return build_weight_matrix(spearman_matrix(panel))


@dataclass(frozen=True, eq=False)
class SensitivityGrid:
    """Optimum log-likelihoods for ordered (W1-indicator, W2-indicator) pairs."""

    labels: list
    llk: np.ndarray     # (p, p), nan on the excluded diagonal and failed cells
    errors: dict        # (i, j) -> message for failed cells


def _sensitivity_cell(args):
    y, x, spec, w1, w2, options, i, j = args
    try:
        fit = fit_mle(y, x, spec, w1, w2, options)
        return i, j, fit.total_llk, None
    except errors.DysararError as exc:
        return i, j, np.nan, f"{type(exc).__name__}: {exc}"


def sensitivity_grid(panels: list[IndicatorPanel], y, x, spec: ModelSpec,
                     options: FitOptions | None = None,
                     workers: int = 1) -> SensitivityGrid:
    """Fit the spec for every ordered pair of distinct indicators.

    The diagonal (same indicator for both matrices) is excluded; per-cell
    failures are recorded in-cell and the grid continues.
    """
    if len(panels) < 2:
        raise errors.InputError("need at least two indicator panels")
    options = options or FitOptions().light()
    mats = [indicator_weight_matrix(p) for p in panels]
    p = len(panels)
    tasks = []
    for i in range(p):
        for j in range(p):
            if i != j:
                tasks.append((y, x, spec, mats[i], mats[j], options, i, j))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sensitivity_cell, tasks))
    else:
        results = [_sensitivity_cell(t) for t in tasks]
    llk = np.full((p, p), np.nan)
    cell_errors = {}
    for i, j, value, err in results:
        llk[i, j] = value
        if err is not None:
            cell_errors[(i, j)] = err
    return SensitivityGrid(labels=[pn.label for pn in panels], llk=llk,
                           errors=cell_errors)
