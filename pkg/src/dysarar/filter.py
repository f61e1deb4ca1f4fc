"""The score-driven recursion: filtering, one-step forecasting and simulation.

theta~_{t+1} = (I - R) kappa + F s~_t + R theta~_t, initialized at
theta~_1 = kappa (the unconditional mean of the recursion). Each pass is
strictly sequential in t; distinct passes share no mutable state and can run
concurrently.

The default gamma = 0 path runs through the compiled kernels; gamma != 0
(information-scaled scores) runs a plain numpy loop since every step then
needs a Monte Carlo information estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import errors, kernels
from .model import CoefficientVector, ModelSpec, validate_coefficients
from .score import (MappingBounds, NaturalParams, TildeParams, map_params,
                    scaled_score)
from .spatial import CovarianceDecomposition, conditional_moments
from .weights import WeightMatrix


@dataclass(frozen=True, eq=False)
class FilterOutput:
    """All per-period paths produced by one filtering pass.

    ``natural_path`` columns follow the layout (rho, lambda, beta_1..k,
    sigma_1..n) with sigma on the standard-deviation scale. On numerical
    breakdown ``failed_at`` holds the first bad period, ``total_llk`` is -inf
    and rows from ``failed_at`` on are nan.
    """

    tilde_path: np.ndarray
    natural_path: np.ndarray
    scores: np.ndarray
    llk_contributions: np.ndarray
    total_llk: float
    residual_path: np.ndarray
    n_units: int
    n_regressors: int
    failed_at: int | None = None

    @property
    def t_obs(self) -> int:
        return self.tilde_path.shape[0]

    @property
    def ok(self) -> bool:
        return self.failed_at is None

    def natural_at(self, t: int) -> NaturalParams:
        row = self.natural_path[t]
        k = self.n_regressors
        return NaturalParams(rho=row[0], lam=row[1], beta=row[2:2 + k],
                             sigma=row[2 + k:])

    def column_names(self) -> list[str]:
        names = ["rho", "lambda"]
        names += [f"beta_{j + 1}" for j in range(self.n_regressors)]
        names += [f"sigma_{j + 1}" for j in range(self.n_units)]
        return names


def _check_filter_inputs(y, x, coeffs, spec, w1, w2):
    y = np.ascontiguousarray(y, dtype=float)
    if y.ndim != 2:
        raise errors.DimensionMismatch(f"y must be (T, n), got {y.shape}")
    t_len, n = y.shape
    if n != spec.n_units:
        raise errors.DimensionMismatch(f"y has {n} units, spec expects {spec.n_units}")
    if t_len < 1:
        raise errors.DimensionMismatch("need at least one observation")
    if x is None:
        x = np.zeros((t_len, n, spec.n_regressors))
    x = np.ascontiguousarray(x, dtype=float)
    if x.shape != (t_len, n, spec.n_regressors):
        raise errors.DimensionMismatch(
            f"x must be (T, n, k) = {(t_len, n, spec.n_regressors)}, got {x.shape}")
    if w1.n != n or w2.n != n:
        raise errors.DimensionMismatch("weight matrices do not match the panel width")
    validate_coefficients(coeffs, spec)
    return y, x


def _natural_from_tilde(tilde: np.ndarray, spec: ModelSpec) -> np.ndarray:
    """Vectorized mapping of a (T, d) tilde path, honoring off modes."""
    b = spec.bounds
    k = spec.n_regressors
    out = np.empty_like(tilde)
    # breakdown rows may hold arbitrarily large tilde values; inf is fine there
    with np.errstate(over="ignore"):
        sig = 1.0 / (1.0 + np.exp(-np.clip(tilde[:, 0], -700, 700)))
        out[:, 0] = 0.0 if spec.rho_mode == "off" else b.rho_low + (b.rho_high - b.rho_low) * sig
        sig = 1.0 / (1.0 + np.exp(-np.clip(tilde[:, 1], -700, 700)))
        out[:, 1] = 0.0 if spec.lambda_mode == "off" else b.lambda_low + (b.lambda_high - b.lambda_low) * sig
        out[:, 2:2 + k] = 0.0 if spec.beta_mode == "off" else tilde[:, 2:2 + k]
        out[:, 2 + k:] = np.exp(tilde[:, 2 + k:])
    return out


def filter_pass(y: np.ndarray, x: np.ndarray | None, coeffs: CoefficientVector,
                spec: ModelSpec, w1: WeightMatrix, w2: WeightMatrix) -> FilterOutput:
    """Run the score-driven filter over a panel.

    ``x[t]`` must be known at t-1 (lagged regressors). A non-finite score or
    likelihood at any period flags the output and sets the total to -inf
    instead of raising, so optimizers treat the point as infeasible.
    """
    y, x = _check_filter_inputs(y, x, coeffs, spec, w1, w2)
    clip = np.inf if spec.score.score_clip is None else spec.score.score_clip
    if spec.score.gamma == 0.0:
        tilde, scores, llks, nus, bad_t = kernels._filter_loop(
            y, x, w1.values, w2.values,
            coeffs.kappa, coeffs.f, coeffs.r,
            spec.rho_mode == "off", spec.lambda_mode == "off", spec.beta_mode == "off",
            *spec.bounds.as_tuple(), clip,
        )
    else:
        tilde, scores, llks, nus, bad_t = _filter_loop_scaled(y, x, coeffs, spec, w1, w2)
    return _assemble_output(tilde, scores, llks, nus, int(bad_t), spec)


def _assemble_output(tilde, scores, llks, nus, bad_t, spec) -> FilterOutput:
    failed_at = None if bad_t < 0 else bad_t
    if failed_at is not None:
        llks[failed_at:] = np.nan
        scores[failed_at:] = np.nan
        nus[failed_at:] = np.nan
        tilde[failed_at + 1:] = np.nan
        total = -np.inf
    else:
        total = float(llks.sum())
    return FilterOutput(
        tilde_path=tilde,
        natural_path=_natural_from_tilde(tilde, spec),
        scores=scores,
        llk_contributions=llks,
        total_llk=total,
        residual_path=nus,
        n_units=spec.n_units,
        n_regressors=spec.n_regressors,
        failed_at=failed_at,
    )


def _filter_loop_scaled(y, x, coeffs, spec, w1, w2):
    """Numpy filter loop for gamma != 0 (MC-scaled scores, seeded per period)."""
    t_len = y.shape[0]
    d = spec.dim
    upd = coeffs.update
    tilde = np.zeros((t_len, d))
    scores = np.zeros((t_len, d))
    llks = np.zeros(t_len)
    nus = np.zeros((t_len, y.shape[1]))
    seeds = np.random.SeedSequence(spec.score.fim_seed).spawn(t_len)
    cur = coeffs.kappa.copy()
    from .score import log_likelihood_t
    for t in range(t_len):
        tilde[t] = cur
        tp = TildeParams(values=cur.copy(), n_units=spec.n_units)
        theta = _apply_off_modes(map_params(tp, spec.bounds), spec)
        try:
            llks[t] = log_likelihood_t(y[t], x[t], theta, w1, w2)
            cfg = spec.score
            s = scaled_score(y[t], x[t], tp, spec.bounds, _reseed(cfg, seeds[t]), w1, w2)
        except (errors.NumericalError, errors.UnstableParameter, np.linalg.LinAlgError):
            return tilde, scores, llks, nus, t
        s = np.where(upd, s, 0.0)
        if not (np.isfinite(llks[t]) and np.all(np.isfinite(s))):
            return tilde, scores, llks, nus, t
        scores[t] = s
        nus[t] = _nu_residual(y[t], x[t], theta, w1, w2)
        cur = (1.0 - coeffs.r) * coeffs.kappa + coeffs.f * s + coeffs.r * cur
        if not np.all(np.isfinite(cur)):
            return tilde, scores, llks, nus, t
    return tilde, scores, llks, nus, -1


def _reseed(cfg, seed_seq):
    from dataclasses import replace

    return replace(cfg, fim_seed=seed_seq)


def _apply_off_modes(theta: NaturalParams, spec: ModelSpec) -> NaturalParams:
    rho = 0.0 if spec.rho_mode == "off" else theta.rho
    lam = 0.0 if spec.lambda_mode == "off" else theta.lam
    beta = np.zeros_like(theta.beta) if spec.beta_mode == "off" else theta.beta
    return NaturalParams(rho=rho, lam=lam, beta=beta, sigma=theta.sigma)


def _nu_residual(yt, xt, theta, w1, w2):
    from .spatial import build_operators

    ops = build_operators(theta.rho, theta.lam, w1, w2)
    res = ops.a @ yt - (xt @ theta.beta if theta.n_regressors else 0.0)
    return (ops.b @ res) / theta.sigma


def update_step(tilde_t: TildeParams, scaled_score_t: np.ndarray,
                coeffs: CoefficientVector) -> TildeParams:
    """One recursion update; entries with ``update`` False pass through."""
    s = np.asarray(scaled_score_t, dtype=float)
    if s.shape != tilde_t.values.shape or coeffs.dim != s.shape[0]:
        raise errors.DimensionMismatch("score/coefficient dimensions disagree")
    nxt = (1.0 - coeffs.r) * coeffs.kappa + coeffs.f * s + coeffs.r * tilde_t.values
    nxt = np.where(coeffs.update, nxt, tilde_t.values)
    return TildeParams(values=nxt, n_units=tilde_t.n_units)


def forecast_one_step(output: FilterOutput, coeffs: CoefficientVector,
                      spec: ModelSpec, x_next: np.ndarray | None,
                      w1: WeightMatrix, w2: WeightMatrix):
    """Advance the recursion once past the sample and return (mu_hat, Omega_hat).

    ``x_next`` must already be known at time T (the regressor convention lags
    by one period).
    """
    if not output.ok:
        raise errors.NumericalBreakdown("cannot forecast from a failed filter pass")
    last = TildeParams(values=output.tilde_path[-1].copy(), n_units=spec.n_units)
    nxt = update_step(last, output.scores[-1], coeffs)
    theta = _apply_off_modes(map_params(nxt, spec.bounds), spec)
    if x_next is None:
        x_next = np.zeros((spec.n_units, spec.n_regressors))
    x_next = np.asarray(x_next, dtype=float)
    if x_next.shape != (spec.n_units, spec.n_regressors):
        raise errors.DimensionMismatch(
            f"x_next must be (n, k) = {(spec.n_units, spec.n_regressors)}, got {x_next.shape}")
    return conditional_moments(theta, x_next, w1, w2)


def simulate_path(natural_path: np.ndarray, x: np.ndarray | None,
                  w1: WeightMatrix, w2: WeightMatrix, seed) -> np.ndarray:
    """Draw y_t = A_t^{-1}(X_t beta_t + B_t^{-1} eps_t) along a given parameter path.

    ``natural_path`` is (T, n+k+2) on the natural scale (sigma as standard
    deviations). Deterministic given the seed.
    """
    nat = np.ascontiguousarray(natural_path, dtype=float)
    if nat.ndim != 2:
        raise errors.DimensionMismatch("natural_path must be (T, d)")
    t_len = nat.shape[0]
    n = w1.n
    k = nat.shape[1] - n - 2
    if k < 0:
        raise errors.DimensionMismatch("natural_path narrower than n + 2")
    if x is None:
        x = np.zeros((t_len, n, k))
    x = np.ascontiguousarray(x, dtype=float)
    if x.shape != (t_len, n, k):
        raise errors.DimensionMismatch(f"x must be {(t_len, n, k)}, got {x.shape}")
    tau1, tau2 = w1.spectral_radius(), w2.spectral_radius()
    if np.any(np.abs(nat[:, 0]) * tau1 >= 1.0) or np.any(np.abs(nat[:, 1]) * tau2 >= 1.0):
        raise errors.UnstableParameter("path leaves the stable parameter region")
    eps = np.random.default_rng(seed).standard_normal((t_len, n))
    y, bad_t = kernels._simulate_exog_loop(nat, x, w1.values, w2.values, eps)
    if bad_t >= 0:
        raise errors.SingularOperator(f"operator factorization failed at t={bad_t}")
    return y


def simulate_filter(coeffs: CoefficientVector, spec: ModelSpec,
                    x: np.ndarray | None, w1: WeightMatrix, w2: WeightMatrix,
                    t_len: int, seed) -> tuple[np.ndarray, FilterOutput]:
    """Co-simulate the observation-driven model itself for ``t_len`` periods.

    Each y_t is drawn from the conditional density at the current tilde
    vector, which then advances on the drawn observation's scaled score.
    Returns the panel and the realized paths as a FilterOutput.
    """
    if spec.score.gamma != 0.0:
        raise errors.InputError("co-simulation supports gamma = 0 only")
    if x is None:
        x = np.zeros((t_len, spec.n_units, spec.n_regressors))
    x = np.ascontiguousarray(x, dtype=float)
    if x.shape != (t_len, spec.n_units, spec.n_regressors):
        raise errors.DimensionMismatch(
            f"x must be {(t_len, spec.n_units, spec.n_regressors)}, got {x.shape}")
    validate_coefficients(coeffs, spec)
    clip = np.inf if spec.score.score_clip is None else spec.score.score_clip
    eps = np.random.default_rng(seed).standard_normal((t_len, spec.n_units))
    y, tilde, scores, llks, nus, bad_t = kernels._simulate_filter_loop(
        x, w1.values, w2.values,
        coeffs.kappa, coeffs.f, coeffs.r,
        spec.rho_mode == "off", spec.lambda_mode == "off", spec.beta_mode == "off",
        *spec.bounds.as_tuple(), clip, eps,
    )
    if bad_t >= 0:
        raise errors.NumericalBreakdown(f"co-simulation broke down at t={bad_t}")
    return y, _assemble_output(tilde, scores, llks, nus, int(bad_t), spec)
