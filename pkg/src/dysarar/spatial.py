"""Dense spatial-operator algebra: A/B construction, log-determinants,
reduced-form moments and covariance decompositions.

Everything here is a pure function of its inputs and sized for dense work at
tens of units; no sparse paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import errors
from .weights import WeightMatrix

SYMMETRY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SpatialOperators:
    """A_t = I - rho W1 and B_t = I - lambda W2 with their log-determinants."""

    a: np.ndarray
    b: np.ndarray
    log_det_a: float
    log_det_b: float


@dataclass(frozen=True, eq=False)
class CovarianceDecomposition:
    """Total (Omega), error-implied (Omega*) and cross-sectional (Sigma) covariances.

    ``sigma_cross`` holds the diagonal variances sigma_j^2.
    """

    omega_total: np.ndarray
    omega_error: np.ndarray
    sigma_cross: np.ndarray


def _logdet(m: np.ndarray) -> float:
    sign, logdet = np.linalg.slogdet(m)
    if sign <= 0.0 or not np.isfinite(logdet):
        raise errors.SingularOperator("operator factorization found a non-positive determinant")
    return float(logdet)


def check_stability(rho: float, lam: float, w1: WeightMatrix, w2: WeightMatrix) -> None:
    """Raise UnstableParameter unless |rho|*tau(W1) < 1 and |lambda|*tau(W2) < 1."""
    if abs(rho) * w1.spectral_radius() >= 1.0:
        raise errors.UnstableParameter(f"rho={rho} outside the stable interval for W1")
    if abs(lam) * w2.spectral_radius() >= 1.0:
        raise errors.UnstableParameter(f"lambda={lam} outside the stable interval for W2")


def build_operators(rho: float, lam: float, w1: WeightMatrix, w2: WeightMatrix) -> SpatialOperators:
    """Construct A = I - rho W1, B = I - lambda W2 and their log-determinants.

    Log-determinants come from LU factorization (via slogdet); explicit
    inverses are never formed.
    """
    check_stability(rho, lam, w1, w2)
    n = w1.n
    eye = np.eye(n)
    a = eye - rho * w1.values
    b = eye - lam * w2.values
    return SpatialOperators(a=a, b=b, log_det_a=_logdet(a), log_det_b=_logdet(b))


def conditional_moments(theta, x: np.ndarray, w1: WeightMatrix, w2: WeightMatrix):
    """Conditional mean A^{-1} X beta and the covariance decomposition.

    Returns ``(mean, CovarianceDecomposition)`` where
    Omega = A^{-1} B^{-1} Sigma B^{-T} A^{-T} and Omega* = B^{-1} Sigma B^{-T},
    assembled from linear solves of the square-root factor.
    """
    ops = build_operators(theta.rho, theta.lam, w1, w2)
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != w1.n:
        raise errors.DimensionMismatch(f"x must be (n, k), got {x.shape}")
    xb = x @ theta.beta if x.shape[1] else np.zeros(w1.n)
    mean = np.linalg.solve(ops.a, xb)

    half = np.linalg.solve(ops.b, np.diag(theta.sigma))
    omega_error = half @ half.T
    half_total = np.linalg.solve(ops.a, half)
    omega_total = half_total @ half_total.T
    return mean, CovarianceDecomposition(
        omega_total=omega_total,
        omega_error=omega_error,
        sigma_cross=theta.sigma**2,
    )


def neumann_expansion(rho: float, w: WeightMatrix, order: int) -> np.ndarray:
    """Partial sum of the spillover series: sum_{k=0..order} rho^k W^k.

    Converges to (I - rho W)^{-1} as the order grows whenever
    |rho| * tau(W) < 1; each power adds one more ring of neighbors.
    """
    if order < 0:
        raise errors.InputError("order must be nonnegative")
    n = w.n
    total = np.eye(n)
    term = np.eye(n)
    for _ in range(order):
        term = rho * (term @ w.values)
        total += term
    return total
