"""Maximum likelihood estimation of the recursion coefficients.

The free coefficients are packed into an unconstrained vector (persistence
entries pass through a scaled logistic onto (-1, 1)), explored briefly with a
simplex from each starting point and refined by quasi-Newton with numerical
gradients. The likelihood is smooth but multimodal in the (f, r) plane, hence
multiple starts.

Fits are internally sequential; the model grid runs independent fits in
parallel processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize, stats

from . import errors
from .filter import filter_pass
from .model import CoefficientVector, ModelSpec, validate_coefficients
from .weights import WeightMatrix


@dataclass(frozen=True)
class ConvergenceStatus:
    converged: bool
    iterations: int
    grad_norm: float
    message: str
    n_failed_starts: int = 0


@dataclass(frozen=True, eq=False)
class FitResult:
    """ML estimate with information criteria and optimizer diagnostics."""

    coeffs: CoefficientVector
    spec: ModelSpec
    total_llk: float
    n_free_params: int
    std_errors: np.ndarray | None
    aic: float
    bic: float
    convergence: ConvergenceStatus
    t_obs: int

    def coefficients(self) -> dict[str, float]:
        """Free coefficients by name (kappa_rho, f_rho, r_rho, ...)."""
        vec = pack_free(self.coeffs, self.spec)
        natural = _packed_to_natural(vec, self.spec)
        return dict(zip(self.spec.coefficient_names(), natural.tolist()))


@dataclass(frozen=True, eq=False)
class FitOptions:
    """Optimizer controls; defaults follow the estimation design."""

    n_starts: int = 3
    simplex_iters: int = 150
    max_iters: int = 2000
    tol: float = 1e-9
    compute_se: bool = True
    extra_starts: tuple = ()
    se_step: float = 1e-4
    static_prestart: bool = True

    def __post_init__(self):
        if self.n_starts < 0:
            raise errors.InputError("n_starts must be nonnegative")

    def light(self) -> "FitOptions":
        """Harness profile: the static-prestart basin only, no standard errors."""
        return replace(self, n_starts=0, compute_se=False)


_START_PAIRS = ((0.01, 0.98), (0.05, 0.90), (0.01, 0.90), (0.05, 0.98), (0.02, 0.95))


# -- packing -----------------------------------------------------------------

def _r_to_unconstrained(r: np.ndarray) -> np.ndarray:
    return np.log((1.0 + r) / (1.0 - r))


def _r_from_unconstrained(x: np.ndarray) -> np.ndarray:
    # clamp so extreme optimizer excursions keep |r| < 1 rather than raising
    return np.clip(np.tanh(0.5 * x), -1.0 + 1e-10, 1.0 - 1e-10)


def pack_free(coeffs: CoefficientVector, spec: ModelSpec) -> np.ndarray:
    """Free coefficients as an unconstrained vector (kappa, f, r blocks).

    Shared groups are emitted once; r entries are mapped onto the real line.
    Exact inverse of :func:`unpack_free`.
    """
    validate_coefficients(coeffs, spec)
    kg = spec.kappa_groups()
    dg = spec.dynamic_groups()
    out = np.empty(len(kg) + 2 * len(dg))
    for i, g in enumerate(kg):
        out[i] = coeffs.kappa[g[0]]
    off = len(kg)
    for i, g in enumerate(dg):
        out[off + i] = coeffs.f[g[0]]
    off += len(dg)
    for i, g in enumerate(dg):
        out[off + i] = _r_to_unconstrained(coeffs.r[g[0]])
    return out


def unpack_free(vec: np.ndarray, spec: ModelSpec) -> CoefficientVector:
    """Rebuild full-length coefficient arrays from a packed vector."""
    vec = np.asarray(vec, dtype=float)
    kg = spec.kappa_groups()
    dg = spec.dynamic_groups()
    if vec.shape != (len(kg) + 2 * len(dg),):
        raise errors.MaskMismatch(
            f"packed vector has length {vec.shape[0]}, spec needs {len(kg) + 2 * len(dg)}")
    d = spec.dim
    kappa = np.zeros(d)
    f = np.zeros(d)
    r = np.zeros(d)
    for i, g in enumerate(kg):
        kappa[g] = vec[i]
    off = len(kg)
    for i, g in enumerate(dg):
        f[g] = vec[off + i]
    off += len(dg)
    for i, g in enumerate(dg):
        r[g] = _r_from_unconstrained(vec[off + i])
    return CoefficientVector(kappa=kappa, f=f, r=r, update=spec.update_mask())


def _packed_to_natural(vec: np.ndarray, spec: ModelSpec) -> np.ndarray:
    """Packed vector with r entries back on the (-1, 1) scale."""
    n_k = len(spec.kappa_groups())
    n_d = len(spec.dynamic_groups())
    out = vec.copy()
    out[n_k + n_d:] = _r_from_unconstrained(vec[n_k + n_d:])
    return out


# -- objective and starting points -------------------------------------------

def _neg_llk(vec, y, x, spec, w1, w2):
    coeffs = unpack_free(vec, spec)
    out = filter_pass(y, x, coeffs, spec, w1, w2)
    return np.inf if not np.isfinite(out.total_llk) else -out.total_llk


def _tilde_of(value: float, lo: float, hi: float) -> float:
    p = (value - lo) / (hi - lo)
    return math.log(p / (1.0 - p))


def default_starts(y: np.ndarray, x: np.ndarray | None, spec: ModelSpec,
                   n_starts: int) -> list[CoefficientVector]:
    """Sample-moment starting points: kappa from data scale, (f, r) from a grid."""
    y = np.asarray(y, dtype=float)
    d = spec.dim
    k = spec.n_regressors
    kappa = np.zeros(d)
    if spec.rho_mode != "off":
        kappa[0] = _tilde_of(0.2, spec.bounds.rho_low, spec.bounds.rho_high)
    if spec.lambda_mode != "off":
        kappa[1] = _tilde_of(0.2, spec.bounds.lambda_low, spec.bounds.lambda_high)
    if spec.beta_mode != "off" and x is not None and k:
        xs = np.asarray(x, dtype=float).reshape(-1, k)
        beta0, *_ = np.linalg.lstsq(xs, y.reshape(-1), rcond=None)
        kappa[spec.beta_slice] = beta0
    with np.errstate(invalid="ignore"):
        sds = np.log(np.maximum(y.std(axis=0, ddof=1), 1e-8))
    if spec.sigma_cross == "homo":
        kappa[spec.sigma_slice] = sds.mean()
    else:
        kappa[spec.sigma_slice] = sds

    dyn = np.zeros(d, dtype=bool)
    for g in spec.dynamic_groups():
        dyn[g] = True
    starts = []
    for i in range(n_starts):
        f0, r0 = _START_PAIRS[i % len(_START_PAIRS)]
        f = np.where(dyn, f0, 0.0)
        r = np.where(dyn, r0, 0.0)
        starts.append(CoefficientVector(kappa=kappa.copy(), f=f, r=r,
                                        update=spec.update_mask()))
    return starts


# -- fitting -----------------------------------------------------------------

STALL_TOL = 1e-3  # llk units a simplex polish must gain to signal a stalled line search
MAX_REFINE_ROUNDS = 4


def _simplex(obj, v0, maxiter):
    return optimize.minimize(obj, v0, method="Nelder-Mead",
                             options={"maxiter": maxiter, "adaptive": True,
                                      "xatol": 1e-3, "fatol": 1e-3})


def _explore_then_refine(obj, v0, options: FitOptions):
    """Short simplex exploration, quasi-Newton refinement, stall recovery.

    L-BFGS-B with numerical gradients occasionally terminates on a plateau far
    from the optimum; a simplex polish wiggles off it, after which refinement
    restarts with a fresh Hessian approximation.
    """
    if options.simplex_iters > 0:
        explore = _simplex(obj, v0, options.simplex_iters)
        if np.isfinite(explore.fun):
            v0 = explore.x
    res = None
    for _ in range(MAX_REFINE_ROUNDS):
        res = optimize.minimize(
            obj, v0, method="L-BFGS-B",
            options={"maxiter": options.max_iters, "ftol": options.tol,
                     "gtol": 1e-7, "maxfun": 10 * options.max_iters * max(1, len(v0))})
        if not np.isfinite(res.fun) or options.simplex_iters == 0:
            break
        polish = _simplex(obj, res.x, options.simplex_iters)
        if polish.fun < res.fun - STALL_TOL:
            v0 = polish.x
        else:
            break
    return res


def _static_prestart(y, x, spec: ModelSpec, w1, w2,
                     options: FitOptions) -> CoefficientVector | None:
    """Seed kappa from the static counterpart's ML levels.

    The dynamic likelihood has a local mode that trades spatial dependence
    against inflated variances; starting the level coefficients at the static
    model's optimum reliably places the search in the right basin.
    """
    try:
        static_spec = ModelSpec.static(spec.family, spec.n_units, spec.n_regressors,
                                       sigma_cross=spec.sigma_cross,
                                       bounds=spec.bounds, score=spec.score)
        sfit = fit_mle(y, x, static_spec, w1, w2,
                       replace(options, n_starts=1, compute_se=False,
                               extra_starts=(), static_prestart=False))
    except errors.DysararError:
        return None
    f0, r0 = _START_PAIRS[0]
    dyn = np.zeros(spec.dim, dtype=bool)
    for g in spec.dynamic_groups():
        dyn[g] = True
    return CoefficientVector(kappa=sfit.coeffs.kappa.copy(),
                             f=np.where(dyn, f0, 0.0), r=np.where(dyn, r0, 0.0),
                             update=spec.update_mask())


def fit_mle(y: np.ndarray, x: np.ndarray | None, spec: ModelSpec,
            w1: WeightMatrix, w2: WeightMatrix,
            options: FitOptions | None = None) -> FitResult:
    """Maximize the filtered log-likelihood over the free coefficient vector.

    Starting points: the static counterpart's fitted levels (see
    ``_static_prestart``), any caller-provided coefficient vectors, and
    moment-based starts. Each runs a short Nelder-Mead exploration, is
    refined with L-BFGS-B (numerical gradients) plus stall recovery, and the
    best finite optimum wins.

    Raises
    ------
    NoFiniteStart
        If every starting point yields a -inf likelihood.
    """
    options = options or FitOptions()
    y = np.asarray(y, dtype=float)
    t_obs = y.shape[0]
    if t_obs <= spec.n_free_params:
        raise errors.InputError(
            f"T={t_obs} must exceed the {spec.n_free_params} free parameters")

    starts = list(options.extra_starts) + default_starts(y, x, spec, options.n_starts)
    if options.static_prestart and spec.dynamic_groups():
        prestart = _static_prestart(y, x, spec, w1, w2, options)
        if prestart is not None:
            starts.insert(0, prestart)
    if not starts:
        starts = default_starts(y, x, spec, 1)
    obj = lambda v: _neg_llk(v, y, x, spec, w1, w2)

    best = None
    n_failed = 0
    for start in starts:
        v0 = pack_free(start, spec)
        if not np.isfinite(obj(v0)):
            n_failed += 1
            continue
        res = _explore_then_refine(obj, v0, options)
        if res is None or not np.isfinite(res.fun):
            n_failed += 1
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise errors.NoFiniteStart("all starting points produced -inf likelihood")

    coeffs = unpack_free(best.x, spec)
    llk = -float(best.fun)
    n_free = spec.n_free_params
    aic, bic = information_criteria(llk, n_free, t_obs)
    status = ConvergenceStatus(
        converged=bool(best.success),
        iterations=int(best.nit),
        grad_norm=float(np.max(np.abs(best.jac))) if best.jac is not None else np.nan,
        message=str(best.message),
        n_failed_starts=n_failed,
    )
    fit = FitResult(coeffs=coeffs, spec=spec, total_llk=llk, n_free_params=n_free,
                    std_errors=None, aic=aic, bic=bic, convergence=status, t_obs=t_obs)
    if options.compute_se:
        se = standard_errors(fit, y, x, spec, w1, w2, step=options.se_step)
        fit = replace(fit, std_errors=se)
    return fit


def standard_errors(fit: FitResult, y, x, spec: ModelSpec,
                    w1: WeightMatrix, w2: WeightMatrix,
                    step: float = 1e-4) -> np.ndarray | None:
    """Inverse negative Hessian standard errors on the natural coefficient scale.

    Central second differences of the total log-likelihood at the packed
    optimum; the delta method rescales the persistence entries back from the
    unconstrained parametrization. Returns None (the unavailable flag) when
    the Hessian is not negative definite -- numbers are never fabricated.
    """
    v0 = pack_free(fit.coeffs, spec)
    p = v0.shape[0]
    llk = lambda v: -_neg_llk(v, y, x, spec, w1, w2)
    h = step * np.maximum(1.0, np.abs(v0))
    f0 = llk(v0)
    if not np.isfinite(f0):
        return None
    hess = np.empty((p, p))
    for i in range(p):
        ei = np.zeros(p)
        ei[i] = h[i]
        fpp = llk(v0 + ei)
        fmm = llk(v0 - ei)
        hess[i, i] = (fpp - 2.0 * f0 + fmm) / h[i] ** 2
        for j in range(i + 1, p):
            ej = np.zeros(p)
            ej[j] = h[j]
            fp_p = llk(v0 + ei + ej)
            fp_m = llk(v0 + ei - ej)
            fm_p = llk(v0 - ei + ej)
            fm_m = llk(v0 - ei - ej)
            hess[i, j] = hess[j, i] = (fp_p - fp_m - fm_p + fm_m) / (4.0 * h[i] * h[j])
    if not np.all(np.isfinite(hess)):
        return None
    neg = -hess
    try:
        cov = np.linalg.inv(neg)
    except np.linalg.LinAlgError:
        return None
    diag = np.diag(cov)
    if np.any(diag <= 0.0) or np.any(np.linalg.eigvalsh(0.5 * (neg + neg.T)) <= 0.0):
        return None
    se = np.sqrt(diag)
    n_k = len(spec.kappa_groups())
    n_d = len(spec.dynamic_groups())
    r_nat = _r_from_unconstrained(v0[n_k + n_d:])
    se[n_k + n_d:] *= 0.5 * (1.0 - r_nat**2)
    return se


# -- criteria and tests -------------------------------------------------------

def information_criteria(llk: float, n_params: int, t_obs: int) -> tuple[float, float]:
    """AIC = 2 Np - 2 LLK and BIC = Np ln(T) - 2 LLK."""
    if t_obs < 1:
        raise errors.InputError("t_obs must be at least 1")
    aic = 2.0 * n_params - 2.0 * llk
    bic = n_params * math.log(t_obs) - 2.0 * llk
    return aic, bic


def lr_test(llk_unrestricted: float, llk_restricted: float, df: int) -> tuple[float, float]:
    """Likelihood-ratio statistic and chi-square p-value.

    Raises NegativeStatistic when the unrestricted likelihood falls below the
    restricted one beyond tolerance (a failed restricted fit).
    """
    if df < 1:
        raise errors.InputError("df must be positive")
    diff = llk_unrestricted - llk_restricted
    if diff < -1e-6:
        raise errors.NegativeStatistic(
            f"unrestricted llk {llk_unrestricted} below restricted {llk_restricted}")
    stat = max(2.0 * diff, 0.0)
    return stat, float(stats.chi2.sf(stat, df))


# -- model grid ---------------------------------------------------------------

@dataclass(frozen=True)
class GridRow:
    label: str
    aic: float
    bic: float
    n_free_params: int
    llk: float
    converged: bool
    error: str | None = None


def spec_grid(n_units: int, n_regressors: int = 0, **kwargs) -> list[ModelSpec]:
    """The 20-specification taxonomy: 8 static + 12 dynamic nested models."""
    specs = []
    for family in ("ols", "sar", "sae", "sarar"):
        for cross in ("homo", "hetero"):
            specs.append(ModelSpec.static(family, n_units, n_regressors,
                                          sigma_cross=cross, **kwargs))
    for family in ("ols", "sar", "sae", "sarar"):
        for dyn, cross in (("shared", "homo"), ("individual", "hetero"), ("shared", "hetero")):
            specs.append(ModelSpec.dynamic(family, n_units, n_regressors,
                                           sigma_dynamic=dyn, sigma_cross=cross, **kwargs))
    return specs


def _fit_grid_cell(args):
    y, x, spec, w1, w2, options = args
    try:
        fit = fit_mle(y, x, spec, w1, w2, options)
        return GridRow(label=spec.label, aic=fit.aic, bic=fit.bic,
                       n_free_params=fit.n_free_params, llk=fit.total_llk,
                       converged=fit.convergence.converged)
    except errors.DysararError as exc:
        return GridRow(label=spec.label, aic=np.nan, bic=np.nan,
                       n_free_params=spec.n_free_params, llk=np.nan,
                       converged=False, error=f"{type(exc).__name__}: {exc}")


def model_grid(y, x, w1: WeightMatrix, w2: WeightMatrix,
               specs: list[ModelSpec], options: FitOptions | None = None,
               workers: int = 1) -> list[GridRow]:
    """Fit every spec and rank rows by BIC; per-spec failures stay in-row."""
    if not specs:
        raise errors.InputError("spec list must be nonempty")
    if options is None:
        options = FitOptions().light()
    tasks = [(y, x, spec, w1, w2, options) for spec in specs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_fit_grid_cell, tasks))
    else:
        rows = [_fit_grid_cell(t) for t in tasks]
    return sorted(rows, key=lambda r: (math.isnan(r.bic), r.bic))
