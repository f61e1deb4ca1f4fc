"""Mean-variance allocation driven by the model's one-step forecasts,
backtest statistics, risk-share decomposition and fee-based comparison.

Conventions shared with the reference tables: annualization uses 252 periods,
statistics are in percent, VaR is a fixed order statistic (no interpolation),
turnover sums absolute changes of the stored target weights so a constant
allocation scores exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import errors
from .estimation import FitOptions, fit_mle
from .filter import filter_pass, forecast_one_step
from .model import CoefficientVector, ModelSpec
from .spatial import build_operators
from .weights import WeightMatrix

TRADING_DAYS = 252


@dataclass(frozen=True)
class BacktestConfig:
    """Rolling one-step-ahead design: window lengths and refit cadence."""

    in_sample_len: int = 2013
    out_sample_len: int = 1500
    refit_interval: int = 100
    risk_free: float = 0.0

    def __post_init__(self):
        if self.in_sample_len < 2 or self.out_sample_len < 1:
            raise errors.InputError("window lengths must be positive")
        if self.refit_interval < 1:
            raise errors.InputError("refit_interval must be at least 1")


@dataclass(frozen=True)
class FeeConfig:
    """Power-utility comparison: U(x) = x^(1-upsilon) / (1-upsilon)."""

    upsilon: float = 7.0
    search_interval: tuple = (-0.5, 0.5)

    def __post_init__(self):
        if self.upsilon <= 1.0:
            raise errors.InputError("upsilon must exceed 1")
        lo, hi = self.search_interval
        if not lo < hi:
            raise errors.InputError("search interval must satisfy lo < hi")


@dataclass(frozen=True, eq=False)
class BacktestReport:
    """Weights path, realized portfolio returns and summary statistics.

    Percent statistics: annualized mean/SD, extreme per-period returns, VaR
    and expected shortfall at 5%. ``sharpe`` is None when the SD is zero.
    """

    weights_path: np.ndarray
    portfolio_returns: np.ndarray
    ann_mean: float
    ann_sd: float
    max_loss: float
    max_gain: float
    sharpe: float | None
    var5: float
    es5: float
    turnover: float
    n_refits: int = 0
    n_fallbacks: int = 0


@dataclass(frozen=True, eq=False)
class RiskShares:
    """Per-period decomposition of each unit's conditional standard deviation."""

    sigma_y: np.ndarray
    sigma_eps: np.ndarray
    sys_share: np.ndarray


def tangency_weights(mu_hat: np.ndarray, omega_hat: np.ndarray) -> np.ndarray:
    """w = Omega^{-1} mu / 1'Omega^{-1} mu; short positions permitted."""
    mu_hat = np.asarray(mu_hat, dtype=float)
    omega_hat = np.asarray(omega_hat, dtype=float)
    try:
        chol = np.linalg.cholesky(0.5 * (omega_hat + omega_hat.T))
    except np.linalg.LinAlgError as exc:
        raise errors.SingularCovariance("forecast covariance not positive definite") from exc
    z = np.linalg.solve(chol, mu_hat)
    raw = np.linalg.solve(chol.T, z)
    denom = raw.sum()
    if abs(denom) < 1e-12:
        raise errors.DegenerateNormalizer("1'Omega^{-1}mu is numerically zero")
    return raw / denom


def backtest_metrics(returns: np.ndarray, weights_path: np.ndarray,
                     n_refits: int = 0, n_fallbacks: int = 0) -> BacktestReport:
    """Summary statistics of a realized strategy.

    VaR5 is the ceil(0.05 S)-th smallest return; ES5 averages returns at or
    below it; turnover is 100/(S-1) * sum_t sum_i |w_{i,t} - w_{i,t-1}|.
    """
    returns = np.asarray(returns, dtype=float)
    weights_path = np.asarray(weights_path, dtype=float)
    s = returns.shape[0]
    if s < 2:
        raise errors.InputError("need at least two returns")
    if weights_path.shape[0] != s:
        raise errors.DimensionMismatch("weights path length must match returns")
    mean = returns.mean()
    sd = 0.0 if np.ptp(returns) == 0.0 else returns.std(ddof=1)
    ann_mean = TRADING_DAYS * mean * 100.0
    ann_sd = math.sqrt(TRADING_DAYS) * sd * 100.0
    sharpe = None if ann_sd == 0.0 else ann_mean / ann_sd
    k = math.ceil(0.05 * s)
    srt = np.sort(returns)
    var5 = srt[k - 1]
    es5 = srt[srt <= var5].mean()
    turnover = 100.0 / (s - 1) * np.abs(np.diff(weights_path, axis=0)).sum()
    return BacktestReport(
        weights_path=weights_path, portfolio_returns=returns,
        ann_mean=float(ann_mean), ann_sd=float(ann_sd),
        max_loss=float(returns.min() * 100.0), max_gain=float(returns.max() * 100.0),
        sharpe=None if sharpe is None else float(sharpe),
        var5=float(var5 * 100.0), es5=float(es5 * 100.0),
        turnover=float(turnover), n_refits=n_refits, n_fallbacks=n_fallbacks,
    )


def equal_weight_strategy(y: np.ndarray) -> BacktestReport:
    """The 1/N benchmark: constant weights, zero turnover by construction."""
    y = np.asarray(y, dtype=float)
    s, n = y.shape
    weights = np.full((s, n), 1.0 / n)
    return backtest_metrics(y.mean(axis=1), weights)


def rolling_backtest(y: np.ndarray, x: np.ndarray | None, spec: ModelSpec,
                     w1: WeightMatrix, w2: WeightMatrix, cfg: BacktestConfig,
                     fit_options: FitOptions | None = None) -> BacktestReport:
    """Rolling one-step-ahead tangency strategy.

    Fits on the first in-sample window, then for each out-of-sample target
    filters over the current fixed-length moving window, forecasts (mu, Omega)
    and allocates. Coefficients are refit every ``refit_interval`` targets on
    the moving window; weight matrices stay fixed. A failed origin reuses the
    previous weights (first origin: equal weights) and is counted.
    """
    y = np.asarray(y, dtype=float)
    t_total, n = y.shape
    f_len, s_len = cfg.in_sample_len, cfg.out_sample_len
    if f_len + s_len > t_total:
        raise errors.InputError(
            f"in_sample_len + out_sample_len = {f_len + s_len} exceeds panel length {t_total}")
    if x is None:
        x = np.zeros((t_total, n, spec.n_regressors))
    x = np.asarray(x, dtype=float)
    options = fit_options or FitOptions().light()

    weights = np.empty((s_len, n))
    returns = np.empty(s_len)
    prev_w = np.full(n, 1.0 / n)
    coeffs: CoefficientVector | None = None
    n_refits = 0
    n_fallbacks = 0
    warm: tuple = ()
    for s in range(s_len):
        target = f_len + s
        lo = target - f_len
        if s % cfg.refit_interval == 0:
            try:
                fit = fit_mle(y[lo:target], x[lo:target], spec, w1, w2,
                              replace(options, compute_se=False, extra_starts=warm))
                coeffs = fit.coeffs
                warm = (coeffs,)
                n_refits += 1
            except errors.DysararError:
                pass
        w_t = prev_w
        if coeffs is not None:
            try:
                out = filter_pass(y[lo:target], x[lo:target], coeffs, spec, w1, w2)
                if out.ok:
                    mu_hat, decomp = forecast_one_step(out, coeffs, spec, x[target], w1, w2)
                    w_t = tangency_weights(mu_hat, decomp.omega_total)
                else:
                    n_fallbacks += 1
            except errors.DysararError:
                n_fallbacks += 1
        else:
            n_fallbacks += 1
        weights[s] = w_t
        returns[s] = w_t @ y[target]
        prev_w = w_t
    return backtest_metrics(returns, weights, n_refits=n_refits, n_fallbacks=n_fallbacks)


def risk_shares(filter_output, w1: WeightMatrix, w2: WeightMatrix) -> RiskShares:
    """Systemic share of each unit's risk: (sigma^y - sigma^eps) / sigma^y.

    sigma^y is the square root of diag(Omega_t), sigma^eps the cross-sectional
    standard deviation; the difference is the part of total risk induced by
    spatial dependence.
    """
    nat = filter_output.natural_path
    t_len = nat.shape[0]
    n = filter_output.n_units
    k = filter_output.n_regressors
    sigma_y = np.empty((t_len, n))
    sigma_eps = np.empty((t_len, n))
    for t in range(t_len):
        rho, lam = nat[t, 0], nat[t, 1]
        sig = nat[t, 2 + k:]
        ops = build_operators(rho, lam, w1, w2)
        half = np.linalg.solve(ops.b @ ops.a, np.diag(sig))
        sigma_y[t] = np.sqrt((half**2).sum(axis=1))
        sigma_eps[t] = sig
    return RiskShares(sigma_y=sigma_y, sigma_eps=sigma_eps,
                      sys_share=(sigma_y - sigma_eps) / sigma_y)


def _mean_utility(wealth: np.ndarray, upsilon: float) -> float:
    return float(np.mean(wealth ** (1.0 - upsilon)) / (1.0 - upsilon))


def management_fee(returns_a: np.ndarray, returns_b: np.ndarray,
                   fee_cfg: FeeConfig) -> float:
    """Per-period fee making the investor indifferent between two strategies.

    Solves mean U(1 + r_A) = mean U(1 + r_B - fee) by bisection; the right
    side is strictly decreasing in the fee, so the root is unique. Positive
    fee: the investor pays to switch from A to B.
    """
    ra = np.asarray(returns_a, dtype=float)
    rb = np.asarray(returns_b, dtype=float)
    if ra.shape != rb.shape or ra.ndim != 1:
        raise errors.DimensionMismatch("return streams must be equal-length vectors")
    lo, hi = fee_cfg.search_interval
    if np.min(1.0 + ra) <= 0.0 or np.min(1.0 + rb) - hi <= 0.0:
        raise errors.DomainViolation("power utility needs positive wealth over the interval")
    target = _mean_utility(1.0 + ra, fee_cfg.upsilon)

    def g(theta: float) -> float:
        return _mean_utility(1.0 + rb - theta, fee_cfg.upsilon) - target

    g_lo, g_hi = g(lo), g(hi)
    if g_lo == 0.0:
        return lo
    if g_hi == 0.0:
        return hi
    if g_lo < 0.0 or g_hi > 0.0:
        raise errors.NoRootInInterval(
            f"no sign change over [{lo}, {hi}] (g({lo})={g_lo:.3e}, g({hi})={g_hi:.3e})")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g_mid = g(mid)
        if g_mid == 0.0 or (hi - lo) < 1e-15:
            return mid
        if g_mid > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def annualized_fee_pct(fee_per_period: float) -> float:
    """Fee on the annualized percent scale used for reporting."""
    return fee_per_period * TRADING_DAYS * 100.0


def block_bootstrap_pvalue(returns_a: np.ndarray, returns_b: np.ndarray,
                           fee_cfg: FeeConfig, block_len: int | None = None,
                           n_boot: int = 1000, seed=None) -> float:
    """Two-sided moving-block bootstrap p-value for H0: fee = 0.

    Blocks resample the paired series jointly, preserving the dependence
    between strategies; failed resamples are dropped. Default block length is
    round(S^(1/3)).
    """
    ra = np.asarray(returns_a, dtype=float)
    rb = np.asarray(returns_b, dtype=float)
    if ra.shape != rb.shape or ra.ndim != 1:
        raise errors.DimensionMismatch("return streams must be equal-length vectors")
    s = ra.shape[0]
    if block_len is None:
        block_len = max(1, round(s ** (1.0 / 3.0)))
    if block_len < 1 or block_len > s:
        raise errors.InputError("block_len must be in [1, S]")
    if n_boot < 100:
        raise errors.InputError("n_boot must be at least 100")
    rng = np.random.default_rng(seed)
    n_blocks = math.ceil(s / block_len)
    fees = []
    n_dropped = 0
    for _ in range(n_boot):
        starts = rng.integers(0, s - block_len + 1, size=n_blocks)
        idx = (starts[:, None] + np.arange(block_len)[None, :]).ravel()[:s]
        try:
            fees.append(management_fee(ra[idx], rb[idx], fee_cfg))
        except errors.DysararError:
            n_dropped += 1
    if len(fees) < n_boot // 2:
        raise errors.ExcessiveFailures(f"{n_dropped}/{n_boot} resamples failed")
    fees = np.asarray(fees)
    p = 2.0 * min(np.mean(fees <= 0.0), np.mean(fees >= 0.0))
    return float(min(p, 1.0))
