"""Likelihood, mapping function, Jacobian and analytic score for one period.

The time-varying parameter vector theta_t = (rho, lambda, beta', sigma_j^2)
lives in a constrained set; its unconstrained image theta~ is what the
recursion updates. The mapping is a modified logistic for rho and lambda,
the identity for beta, and sigma = exp(sigma~) so that the natural sigma
coordinate of the score is the variance sigma^2.

This module is the readable numpy reference route; the filtering kernels in
:mod:`dysarar.kernels` re-derive the same quantities with hand-rolled
algebra, and the two are cross-checked in the test-suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import errors
from .spatial import build_operators
from .weights import WeightMatrix

LN_2PI = float(np.log(2.0 * np.pi))

BOUNDS_MARGIN = 1e-6


@dataclass(frozen=True)
class MappingBounds:
    """Open intervals the logistic maps rho~ and lambda~ into."""

    rho_low: float = -1.0 + BOUNDS_MARGIN
    rho_high: float = 1.0 - BOUNDS_MARGIN
    lambda_low: float = -1.0 + BOUNDS_MARGIN
    lambda_high: float = 1.0 - BOUNDS_MARGIN

    def __post_init__(self):
        if not (self.rho_low < self.rho_high and self.lambda_low < self.lambda_high):
            raise errors.InputError("mapping bounds must satisfy low < high")

    @classmethod
    def from_eigenvalues(cls, w1: WeightMatrix, w2: WeightMatrix,
                         margin: float = BOUNDS_MARGIN) -> "MappingBounds":
        """Widen intervals to (1/omega_min, 1/omega_max) of each W.

        Available for real-spectrum matrices only; the default row-standardized
        interval (-1, 1) is used everywhere unless explicitly overridden.
        """
        r_lo, r_hi = w1.eigen_interval()
        l_lo, l_hi = w2.eigen_interval()
        return cls(r_lo + margin, r_hi - margin, l_lo + margin, l_hi - margin)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.rho_low, self.rho_high, self.lambda_low, self.lambda_high)


@dataclass(frozen=True)
class ScoreConfig:
    """Scaled-score settings: information exponent, clipping, MC draws."""

    gamma: float = 0.0
    score_clip: float | None = 10.0
    fim_draws: int = 100
    fim_seed: int = 0

    def __post_init__(self):
        if self.gamma not in (0.0, -0.5, -1.0):
            raise errors.InputError("gamma must be one of 0, -1/2, -1")
        if self.score_clip is not None and self.score_clip <= 0.0:
            raise errors.InputError("score_clip must be positive or None")
        if self.fim_draws < 2:
            raise errors.InputError("fim_draws must be at least 2")


@dataclass(frozen=True, eq=False)
class NaturalParams:
    """One period's parameters on the natural scale; sigma holds standard deviations."""

    rho: float
    lam: float
    beta: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "beta", np.atleast_1d(np.asarray(self.beta, dtype=float)))
        object.__setattr__(self, "sigma", np.atleast_1d(np.asarray(self.sigma, dtype=float)))
        if np.any(self.sigma <= 0.0):
            raise errors.InputError("sigma must be strictly positive")

    @property
    def n_units(self) -> int:
        return self.sigma.shape[0]

    @property
    def n_regressors(self) -> int:
        return self.beta.shape[0]


@dataclass(frozen=True, eq=False)
class TildeParams:
    """Unconstrained parameter vector ordered (rho~, lambda~, beta~, sigma~)."""

    values: np.ndarray
    n_units: int

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.ndim != 1:
            raise errors.DimensionMismatch("tilde values must be a vector")
        if self.values.shape[0] < self.n_units + 2:
            raise errors.DimensionMismatch("tilde vector shorter than n_units + 2")
        if not np.all(np.isfinite(self.values)):
            raise errors.InputError("tilde values must be finite")

    @property
    def n_regressors(self) -> int:
        return self.values.shape[0] - self.n_units - 2


def _sigmoid(z):
    out = np.empty_like(np.asarray(z, dtype=float))
    z = np.asarray(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def map_params(tilde: TildeParams, bounds: MappingBounds) -> NaturalParams:
    """Mapping h: unconstrained vector to (rho, lambda, beta, sigma)."""
    v = tilde.values
    k = tilde.n_regressors
    rho = bounds.rho_low + (bounds.rho_high - bounds.rho_low) * float(_sigmoid(v[0]))
    lam = bounds.lambda_low + (bounds.lambda_high - bounds.lambda_low) * float(_sigmoid(v[1]))
    return NaturalParams(rho=rho, lam=lam, beta=v[2:2 + k].copy(), sigma=np.exp(v[2 + k:]))


def inverse_map(params: NaturalParams, bounds: MappingBounds) -> TildeParams:
    """Exact inverse of :func:`map_params` (logit / identity / log)."""
    def logit(x, lo, hi):
        p = (x - lo) / (hi - lo)
        if not 0.0 < p < 1.0:
            raise errors.InputError(f"value {x} outside the open interval ({lo}, {hi})")
        return float(np.log(p / (1.0 - p)))

    vals = np.concatenate((
        [logit(params.rho, bounds.rho_low, bounds.rho_high),
         logit(params.lam, bounds.lambda_low, bounds.lambda_high)],
        params.beta,
        np.log(params.sigma),
    ))
    return TildeParams(values=vals, n_units=params.n_units)


def natural_vector(params: NaturalParams) -> np.ndarray:
    """theta as a flat vector (rho, lambda, beta, sigma^2) -- variance scale."""
    return np.concatenate(([params.rho, params.lam], params.beta, params.sigma**2))


def jacobian(tilde: TildeParams, bounds: MappingBounds) -> np.ndarray:
    """Diagonal Jacobian of the mapping, d theta / d theta~.

    The sigma block is d sigma^2 / d sigma~ = 2 exp(2 sigma~); the beta block
    is the identity.
    """
    v = tilde.values
    k = tilde.n_regressors
    diag = np.ones_like(v)
    s = float(_sigmoid(v[0]))
    diag[0] = (bounds.rho_high - bounds.rho_low) * s * (1.0 - s)
    s = float(_sigmoid(v[1]))
    diag[1] = (bounds.lambda_high - bounds.lambda_low) * s * (1.0 - s)
    diag[2 + k:] = 2.0 * np.exp(2.0 * v[2 + k:])
    return np.diag(diag)


def log_likelihood_t(y: np.ndarray, x: np.ndarray, theta: NaturalParams,
                     w1: WeightMatrix, w2: WeightMatrix) -> float:
    """Exact Gaussian log-density of one cross-section.

    -(N/2) ln 2pi - (1/2) ln|Sigma| + ln|B| + ln|A| - (1/2) nu'nu with
    nu = Sigma^{-1/2} B (A y - X beta); identical to the dense multivariate
    normal density with mean A^{-1} X beta and covariance Omega_t.
    """
    y = np.asarray(y, dtype=float)
    n = theta.n_units
    ops = build_operators(theta.rho, theta.lam, w1, w2)
    res = ops.a @ y - (x @ theta.beta if theta.n_regressors else 0.0)
    nu = (ops.b @ res) / theta.sigma
    return float(
        -0.5 * n * LN_2PI
        - np.sum(np.log(theta.sigma))
        + ops.log_det_b
        + ops.log_det_a
        - 0.5 * nu @ nu
    )


def score_natural(y: np.ndarray, x: np.ndarray, theta: NaturalParams,
                  w1: WeightMatrix, w2: WeightMatrix) -> np.ndarray:
    """Analytic score of the conditional density w.r.t. (rho, lambda, beta, sigma^2)."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    k = theta.n_regressors
    ops = build_operators(theta.rho, theta.lam, w1, w2)
    sig2 = theta.sigma**2

    xb = x @ theta.beta if k else np.zeros(theta.n_units)
    res = ops.a @ y - xb
    r = ops.b @ res
    sinv_r = r / sig2

    w1y = w1.values @ y
    grad_rho = sinv_r @ (ops.b @ w1y) - np.trace(np.linalg.solve(ops.a, w1.values))
    grad_lam = sinv_r @ (w2.values @ res) - np.trace(np.linalg.solve(ops.b, w2.values))
    grad_beta = x.T @ (ops.b.T @ sinv_r) if k else np.empty(0)
    grad_sig2 = (r**2 / sig2 - 1.0) / (2.0 * sig2)
    return np.concatenate(([grad_rho, grad_lam], grad_beta, grad_sig2))


def fisher_information_mc(theta: NaturalParams, x: np.ndarray,
                          w1: WeightMatrix, w2: WeightMatrix,
                          draws: int, seed) -> np.ndarray:
    """Monte Carlo Fisher information: average outer product of simulated scores.

    Symmetric PSD by construction and deterministic given the seed.
    """
    if draws < 2:
        raise errors.InputError("draws must be at least 2")
    rng = np.random.default_rng(seed)
    mean, decomp = _moments(theta, x, w1, w2)
    chol = np.linalg.cholesky(decomp.omega_total)
    d = theta.n_units + theta.n_regressors + 2
    info = np.zeros((d, d))
    for _ in range(draws):
        y = mean + chol @ rng.standard_normal(theta.n_units)
        g = score_natural(y, x, theta, w1, w2)
        info += np.outer(g, g)
    return info / draws


def _moments(theta, x, w1, w2):
    from .spatial import conditional_moments

    return conditional_moments(theta, x, w1, w2)


def scaled_score(y: np.ndarray, x: np.ndarray, tilde: TildeParams,
                 bounds: MappingBounds, config: ScoreConfig,
                 w1: WeightMatrix, w2: WeightMatrix) -> np.ndarray:
    """Scaled score in tilde coordinates: I~(theta~)^gamma J' grad.

    gamma = 0 reduces to J' grad exactly. For gamma in {-1/2, -1} the
    information matrix is Monte Carlo estimated and powered through a
    symmetric eigendecomposition with a 1e-10 eigenvalue floor.
    """
    theta = map_params(tilde, bounds)
    grad = score_natural(y, x, theta, w1, w2)
    jac = np.diag(jacobian(tilde, bounds))
    s = jac * grad
    if config.gamma != 0.0:
        info = fisher_information_mc(theta, x, w1, w2, config.fim_draws, config.fim_seed)
        info_tilde = (jac[:, None] * info) * jac[None, :]
        vals, vecs = np.linalg.eigh(0.5 * (info_tilde + info_tilde.T))
        if vals.max() <= 0.0:
            raise errors.NonInvertibleInformation("information matrix numerically singular")
        vals = np.maximum(vals, 1e-10)
        s = vecs @ (vals**config.gamma * (vecs.T @ s))
    if config.score_clip is not None:
        s = np.clip(s, -config.score_clip, config.score_clip)
    return s
