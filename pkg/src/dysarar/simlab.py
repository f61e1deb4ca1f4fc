"""Data-generating processes and the two Monte Carlo experiment harnesses.

The first experiment checks how well the score-driven filter tracks a latent
stochastic parameter path (an S-SARAR process: the tilde vector follows a
Gaussian AR(1)); the second measures finite-sample properties of the ML
estimator when the data come from the observation-driven model itself.

Replications draw independent substreams spawned from one seed, so parallel
and serial runs produce identical summaries. Failed replications are dropped
and counted; a failure rate above MAX_FAILURE_RATE aborts the harness.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import errors
from .estimation import FitOptions, _packed_to_natural, fit_mle, pack_free
from .filter import _natural_from_tilde, filter_pass, simulate_filter, simulate_path
from .model import CoefficientVector, ModelSpec
from .weights import WeightMatrix, row_normalize

MAX_FAILURE_RATE = 0.05


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)

# Regressor covariance for the 4-unit experiment; pairwise entries from the
# experiment design, symmetrized where the two triangles disagreed.
DEFAULT_REGRESSOR_COV = np.array([
    [1.00, 0.30, 0.40, 0.10],
    [0.30, 1.00, 0.40, 0.35],
    [0.40, 0.40, 1.00, 0.35],
    [0.10, 0.35, 0.35, 1.00],
])

SSARAR_MU = np.array([0.010, -0.004, 1.000, 2.000, 0.986, 0.944, 0.289, -0.421])


@dataclass(frozen=True, eq=False)
class SSararConfig:
    """Latent-autoregression experiment configuration (defaults: N=4, K=2)."""

    n_units: int = 4
    n_regressors: int = 2
    mu: np.ndarray = field(default_factory=lambda: SSARAR_MU.copy())
    phi: float = 0.99
    u: float = 0.01
    v: np.ndarray | None = None
    t_len: int = 2000
    n_replications: int = 50
    w_density: float = 0.8

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))
        if self.mu.shape != (self.dim,):
            raise errors.DimensionMismatch(
                f"mu must have length {self.dim}, got {self.mu.shape}")
        if not 0.0 <= self.phi < 1.0:
            raise errors.InputError("phi must lie in [0, 1)")
        if self.u < 0.0:
            raise errors.InputError("u must be nonnegative")
        if self.v is not None:
            v = np.asarray(self.v, dtype=float)
            if v.shape != (self.n_units, self.n_units):
                raise errors.DimensionMismatch("v must be (n_units, n_units)")
            object.__setattr__(self, "v", v)

    @property
    def dim(self) -> int:
        return self.n_units + self.n_regressors + 2

    def regressor_cov(self) -> np.ndarray:
        if self.v is not None:
            return self.v
        if self.n_units == 4:
            return DEFAULT_REGRESSOR_COV.copy()
        return np.eye(self.n_units)


def simulate_ssarar_params(cfg: SSararConfig, seed) -> np.ndarray:
    """Latent tilde path: theta~_t = (I - Phi) mu + Phi theta~_{t-1} + zeta_t."""
    rng = np.random.default_rng(seed)
    d = cfg.dim
    path = np.empty((cfg.t_len, d))
    cur = cfg.mu.copy()
    scale = math.sqrt(cfg.u)
    for t in range(cfg.t_len):
        cur = (1.0 - cfg.phi) * cfg.mu + cfg.phi * cur + scale * rng.standard_normal(d)
        path[t] = cur
    return path


def gen_regressors(cfg: SSararConfig, seed) -> np.ndarray:
    """Regressors: a constant column plus correlated Gaussian columns.

    Each stochastic column is an independent N(0, V) draw per period, already
    aligned so that x[t] is in the information set at t-1.
    """
    if cfg.n_regressors < 1:
        raise errors.InputError("need at least the constant column")
    v = cfg.regressor_cov()
    try:
        chol = np.linalg.cholesky(v)
    except np.linalg.LinAlgError as exc:
        raise errors.NonPDCovariance("regressor covariance is not positive definite") from exc
    rng = np.random.default_rng(seed)
    x = np.empty((cfg.t_len, cfg.n_units, cfg.n_regressors))
    x[:, :, 0] = 1.0
    for j in range(1, cfg.n_regressors):
        x[:, :, j] = rng.standard_normal((cfg.t_len, cfg.n_units)) @ chol.T
    return x


def random_weight_matrix(n: int, density: float = 0.8, seed=None,
                         max_retries: int = 100) -> WeightMatrix:
    """Random symmetric zero-diagonal structure, then row-normalized.

    Pre-normalization symmetry makes the normalized matrix similar to a
    symmetric one, so all eigenvalues are real. Regenerates on zero rows.
    """
    if n < 2:
        raise errors.InputError("need at least two units")
    if not 0.0 < density <= 1.0:
        raise errors.InputError("density must be in (0, 1]")
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        upper = np.triu((rng.random((n, n)) < density) * rng.random((n, n)), k=1)
        raw = upper + upper.T
        if np.all(raw.sum(axis=1) > 0.0):
            return row_normalize(raw)
    raise errors.RetryExhausted(
        f"no zero-row-free draw in {max_retries} tries at density {density}")


# -- filtering experiment -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class FilteringReport:
    """Per-parameter tracking accuracy of the filter across latent persistence levels."""

    phis: list
    reference_phi: float
    param_names: list
    mse: np.ndarray            # (len(phis), d)
    rel_mse: np.ndarray        # mse / mse at the reference phi
    band_coverage: np.ndarray  # share of periods with truth inside the 10-90% band
    fancharts: dict            # phi -> (t, d, 4) stack [q10, q50, q90, truth]
    n_failed: dict


def _filtering_rep(args):
    y, x, spec, w, options = args
    try:
        fit = fit_mle(y, x, spec, w, w, options)
        out = filter_pass(y, x, fit.coeffs, spec, w, w)
        if not out.ok:
            return None
        return out.natural_path
    except errors.DysararError:
        return None


def filtering_experiment(cfg: SSararConfig, phis, seed,
                         fit_options: FitOptions | None = None,
                         workers: int = 1,
                         reference_phi: float = 0.990) -> FilteringReport:
    """Fit the score-driven model to panels from latent S-SARAR paths.

    One latent path and one weight matrix per phi level (common random
    numbers across levels); B panels share the regressors. Reports pointwise
    fan-chart quantiles and the MSE of the median filtered path against the
    true one, relative to the reference phi row.
    """
    phis = list(phis)
    if reference_phi not in phis:
        raise errors.InputError(f"reference phi {reference_phi} must be among {phis}")
    options = fit_options or FitOptions().light()
    b = cfg.n_replications

    ss = _seed_sequence(seed)
    w_seed, zeta_seed, x_seed, *panel_seeds = ss.spawn(3 + b)
    w = random_weight_matrix(cfg.n_units, cfg.w_density, w_seed)
    x = gen_regressors(cfg, x_seed)
    spec = ModelSpec.dynamic("sarar", cfg.n_units, cfg.n_regressors)

    mse = np.empty((len(phis), cfg.dim))
    coverage = np.empty((len(phis), cfg.dim))
    fancharts = {}
    n_failed = {}
    for p_idx, phi in enumerate(phis):
        tilde_true = simulate_ssarar_params(replace(cfg, phi=phi), zeta_seed)
        nat_true = _natural_from_tilde(tilde_true, spec)
        tasks = []
        for b_idx in range(b):
            y = simulate_path(nat_true, x, w, w, panel_seeds[b_idx])
            tasks.append((y, x, spec, w, options))
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_filtering_rep, tasks))
        else:
            results = [_filtering_rep(t) for t in tasks]
        kept = [r for r in results if r is not None]
        n_failed[phi] = b - len(kept)
        _check_failures(n_failed[phi], b)
        stack = np.stack(kept)                      # (B_ok, T, d)
        q10, q50, q90 = np.quantile(stack, [0.10, 0.50, 0.90], axis=0)
        mse[p_idx] = np.mean((q50 - nat_true) ** 2, axis=0)
        coverage[p_idx] = np.mean((nat_true >= q10) & (nat_true <= q90), axis=0)
        fancharts[phi] = np.stack([q10, q50, q90, nat_true], axis=-1)

    ref = mse[phis.index(reference_phi)]
    names = ["rho", "lambda"]
    names += [f"beta_{j + 1}" for j in range(cfg.n_regressors)]
    names += [f"sigma_{j + 1}" for j in range(cfg.n_units)]
    return FilteringReport(
        phis=phis, reference_phi=reference_phi, param_names=names,
        mse=mse, rel_mse=mse / ref, band_coverage=coverage,
        fancharts=fancharts, n_failed=n_failed,
    )


def _check_failures(failed: int, total: int) -> None:
    if failed > MAX_FAILURE_RATE * total:
        raise errors.ExcessiveFailures(
            f"{failed}/{total} replications failed (limit {MAX_FAILURE_RATE:.0%})")


# -- finite-sample experiment --------------------------------------------------

def table2_spec(**kwargs) -> ModelSpec:
    """The 6-unit, no-regressor specification of the finite-sample study."""
    return ModelSpec.dynamic("sarar", 6, 0, **kwargs)


def table2_truth(spec: ModelSpec | None = None) -> CoefficientVector:
    """True coefficient values of the finite-sample study."""
    spec = spec or table2_spec()
    if (spec.n_units, spec.n_regressors) != (6, 0):
        raise errors.InputError("reference truth is defined for n_units=6, no regressors")
    kappa = np.array([0.90, 0.20, -0.08, -0.30, 0.40, 0.20, 0.10, 0.15])
    f = np.array([0.03, 0.04, 0.08, 0.09, 0.07, 0.05, 0.03, 0.06])
    r = np.array([0.984, 0.986, 0.982, 0.976, 0.988, 0.990, 0.978, 0.980])
    return CoefficientVector.for_spec(spec, kappa=kappa, f=f, r=r)


@dataclass(frozen=True, eq=False)
class FiniteSampleConfig:
    """Monte Carlo design for the ML finite-sample study."""

    truth: CoefficientVector
    spec: ModelSpec
    t_lens: tuple = (1000,)
    n_replications: int = 100
    seed: object = 0

    def __post_init__(self):
        if self.truth.dim != self.spec.dim:
            raise errors.DimensionMismatch("truth does not match the spec dimension")
        if self.n_replications < 1:
            raise errors.InputError("need at least one replication")


@dataclass(frozen=True, eq=False)
class FiniteSampleReport:
    coefficient_names: list
    truth: np.ndarray
    t_lens: tuple
    mean: dict    # t_len -> (p,) Monte Carlo means
    sd: dict      # t_len -> (p,) standard deviations (nan when M == 1)
    mse: dict     # t_len -> (p,) mean squared errors vs truth
    n_failed: dict
    estimates: dict  # t_len -> (M_ok, p) raw estimates


def _finite_sample_rep(args):
    truth, spec, w1, w2, t_len, child_seed, options = args
    try:
        y, _ = simulate_filter(truth, spec, None, w1, w2, t_len, child_seed)
        fit = fit_mle(y, None, spec, w1, w2, options)
        return _packed_to_natural(pack_free(fit.coeffs, spec), spec)
    except errors.DysararError:
        return None


def finite_sample_experiment(cfg: FiniteSampleConfig, w1: WeightMatrix,
                             w2: WeightMatrix,
                             fit_options: FitOptions | None = None,
                             workers: int = 1) -> FiniteSampleReport:
    """Simulate the observation-driven model at the truth and re-estimate.

    With no regressors the two weight matrices must differ (identification).
    Reports Mean, SD and MSE per coefficient for each sample length.
    """
    spec = cfg.spec
    if spec.n_regressors == 0 and np.allclose(w1.values, w2.values):
        raise errors.InputError("with no regressors, w1 and w2 must differ")
    options = fit_options or FitOptions().light()
    truth_nat = _packed_to_natural(pack_free(cfg.truth, spec), spec)
    names = spec.coefficient_names()

    mean, sd, mse, n_failed, estimates = {}, {}, {}, {}, {}
    ss = _seed_sequence(cfg.seed)
    for t_len in cfg.t_lens:
        children = ss.spawn(cfg.n_replications)
        tasks = [(cfg.truth, spec, w1, w2, t_len, child, options) for child in children]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_finite_sample_rep, tasks))
        else:
            results = [_finite_sample_rep(t) for t in tasks]
        kept = [r for r in results if r is not None]
        n_failed[t_len] = cfg.n_replications - len(kept)
        _check_failures(n_failed[t_len], cfg.n_replications)
        est = np.stack(kept)
        estimates[t_len] = est
        mean[t_len] = est.mean(axis=0)
        sd[t_len] = est.std(axis=0, ddof=1) if est.shape[0] > 1 else np.full(est.shape[1], np.nan)
        mse[t_len] = np.mean((est - truth_nat) ** 2, axis=0)
    return FiniteSampleReport(
        coefficient_names=names, truth=truth_nat, t_lens=tuple(cfg.t_lens),
        mean=mean, sd=sd, mse=mse, n_failed=n_failed, estimates=estimates,
    )
