"""Model specification: nesting flags, heteroskedasticity classes and the
static coefficient vector of the recursion.

A specification fixes, per parameter block, whether it is switched off,
held static, or score-driven, plus how the sigma block shares coefficients
across units:

* ``sigma_cross``   'homo'   -> one kappa_sigma shared by all units (CHo)
* ``sigma_dynamic`` 'shared' -> one (f_sigma, r_sigma) pair shared     (DHo)
* ``sigma_time``    'static' -> f_sigma = r_sigma = 0                  (THo)

The free-parameter arithmetic follows these sharing rules; the familiar
model families arise as OLS (both spatial blocks off), SAR (lambda off),
SAE (rho off) and SARAR (both on).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import errors
from .score import MappingBounds, ScoreConfig

MODES = ("off", "static", "dynamic")

FAMILIES = {
    "ols": ("off", "off"),
    "sar": ("dynamic", "off"),
    "sae": ("off", "dynamic"),
    "sarar": ("dynamic", "dynamic"),
}


@dataclass(frozen=True)
class ModelSpec:
    """Complete description of one nested specification."""

    n_units: int
    n_regressors: int = 0
    rho_mode: str = "dynamic"
    lambda_mode: str = "dynamic"
    beta_mode: str = "dynamic"
    sigma_time: str = "dynamic"
    sigma_cross: str = "hetero"
    sigma_dynamic: str = "individual"
    bounds: MappingBounds = field(default_factory=MappingBounds)
    score: ScoreConfig = field(default_factory=ScoreConfig)

    def __post_init__(self):
        if self.n_units < 1:
            raise errors.InputError("n_units must be positive")
        if self.n_regressors < 0:
            raise errors.InputError("n_regressors must be nonnegative")
        for name in ("rho_mode", "lambda_mode", "beta_mode"):
            if getattr(self, name) not in MODES:
                raise errors.InputError(f"{name} must be one of {MODES}")
        if self.sigma_time not in ("static", "dynamic"):
            raise errors.InputError("sigma_time must be 'static' or 'dynamic'")
        if self.sigma_cross not in ("homo", "hetero"):
            raise errors.InputError("sigma_cross must be 'homo' or 'hetero'")
        if self.sigma_dynamic not in ("shared", "individual"):
            raise errors.InputError("sigma_dynamic must be 'shared' or 'individual'")
        if self.n_regressors == 0 and self.beta_mode != "off":
            object.__setattr__(self, "beta_mode", "off")

    # -- layout ---------------------------------------------------------

    @property
    def dim(self) -> int:
        """Length of the time-varying vector: n + k + 2."""
        return self.n_units + self.n_regressors + 2

    @property
    def sigma_slice(self) -> slice:
        return slice(2 + self.n_regressors, self.dim)

    @property
    def beta_slice(self) -> slice:
        return slice(2, 2 + self.n_regressors)

    # -- taxonomy ---------------------------------------------------------

    @property
    def family(self) -> str:
        rho_on = self.rho_mode != "off"
        lam_on = self.lambda_mode != "off"
        if rho_on and lam_on:
            return "sarar"
        if rho_on:
            return "sar"
        if lam_on:
            return "sae"
        return "ols"

    @property
    def is_dynamic(self) -> bool:
        return (self.sigma_time == "dynamic"
                or "dynamic" in (self.rho_mode, self.lambda_mode, self.beta_mode))

    @property
    def label(self) -> str:
        cross = "CHo" if self.sigma_cross == "homo" else "CHe"
        if not self.is_dynamic:
            return f"St{self.family.upper()}-{cross}"
        dyn = "DHo" if self.sigma_dynamic == "shared" or self.sigma_time == "static" else "DHe"
        return f"Dy{self.family.upper()}-{dyn}.{cross}"

    @classmethod
    def dynamic(cls, family: str, n_units: int, n_regressors: int = 0,
                sigma_dynamic: str = "individual", sigma_cross: str = "hetero",
                **kwargs) -> "ModelSpec":
        """Score-driven member of a family, e.g. ``dynamic('sarar', 18, 1)``."""
        try:
            rho_mode, lambda_mode = FAMILIES[family.lower()]
        except KeyError:
            raise errors.InputError(f"unknown family {family!r}") from None
        beta_mode = "dynamic" if n_regressors else "off"
        return cls(n_units=n_units, n_regressors=n_regressors,
                   rho_mode=rho_mode, lambda_mode=lambda_mode, beta_mode=beta_mode,
                   sigma_time="dynamic", sigma_cross=sigma_cross,
                   sigma_dynamic=sigma_dynamic, **kwargs)

    @classmethod
    def static(cls, family: str, n_units: int, n_regressors: int = 0,
               sigma_cross: str = "hetero", **kwargs) -> "ModelSpec":
        """Static member of a family: constant parameters, THo by construction."""
        try:
            rho_mode, lambda_mode = FAMILIES[family.lower()]
        except KeyError:
            raise errors.InputError(f"unknown family {family!r}") from None
        rho_mode = "static" if rho_mode == "dynamic" else "off"
        lambda_mode = "static" if lambda_mode == "dynamic" else "off"
        beta_mode = "static" if n_regressors else "off"
        return cls(n_units=n_units, n_regressors=n_regressors,
                   rho_mode=rho_mode, lambda_mode=lambda_mode, beta_mode=beta_mode,
                   sigma_time="static", sigma_cross=sigma_cross,
                   sigma_dynamic="shared", **kwargs)

    def with_static_spatial(self, rho: bool = False, lam: bool = False) -> "ModelSpec":
        """Restrict spatial blocks to constants (f = r = 0), keeping the rest."""
        changes = {}
        if rho:
            if self.rho_mode == "off":
                raise errors.InputError("rho is off; nothing to restrict")
            changes["rho_mode"] = "static"
        if lam:
            if self.lambda_mode == "off":
                raise errors.InputError("lambda is off; nothing to restrict")
            changes["lambda_mode"] = "static"
        return replace(self, **changes)

    # -- masks and counting ----------------------------------------------

    def update_mask(self) -> np.ndarray:
        """Entries the recursion actually evolves (off blocks excluded)."""
        mask = np.ones(self.dim, dtype=bool)
        mask[0] = self.rho_mode != "off"
        mask[1] = self.lambda_mode != "off"
        mask[self.beta_slice] = self.beta_mode != "off"
        return mask

    def kappa_groups(self) -> list[list[int]]:
        """Index groups sharing one kappa coefficient, in canonical order."""
        groups: list[list[int]] = []
        if self.rho_mode != "off":
            groups.append([0])
        if self.lambda_mode != "off":
            groups.append([1])
        if self.beta_mode != "off":
            groups.extend([[i] for i in range(2, 2 + self.n_regressors)])
        sig = list(range(2 + self.n_regressors, self.dim))
        if self.sigma_cross == "homo":
            groups.append(sig)
        else:
            groups.extend([[i] for i in sig])
        return groups

    def dynamic_groups(self) -> list[list[int]]:
        """Index groups sharing one (f, r) pair of coefficients."""
        groups: list[list[int]] = []
        if self.rho_mode == "dynamic":
            groups.append([0])
        if self.lambda_mode == "dynamic":
            groups.append([1])
        if self.beta_mode == "dynamic":
            groups.extend([[i] for i in range(2, 2 + self.n_regressors)])
        if self.sigma_time == "dynamic":
            sig = list(range(2 + self.n_regressors, self.dim))
            if self.sigma_dynamic == "shared":
                groups.append(sig)
            else:
                groups.extend([[i] for i in sig])
        return groups

    @property
    def n_free_params(self) -> int:
        return len(self.kappa_groups()) + 2 * len(self.dynamic_groups())

    def coefficient_names(self) -> list[str]:
        """Free-coefficient names in pack order (kappa block, f block, r block)."""
        def group_name(group: list[int]) -> str:
            i = group[0]
            if i == 0:
                return "rho"
            if i == 1:
                return "lambda"
            if i < 2 + self.n_regressors:
                return f"beta_{i - 1}"
            if len(group) > 1:
                return "sigma"
            return f"sigma_{i - 1 - self.n_regressors}"

        names = [f"kappa_{group_name(g)}" for g in self.kappa_groups()]
        names += [f"f_{group_name(g)}" for g in self.dynamic_groups()]
        names += [f"r_{group_name(g)}" for g in self.dynamic_groups()]
        return names


@dataclass(frozen=True, eq=False)
class CoefficientVector:
    """Static coefficients of the recursion: kappa, diag F, diag R.

    Arrays are full length (n + k + 2); sharing and off restrictions are a
    property of the spec, checked by :func:`validate_coefficients`. ``update``
    flags entries the recursion evolves; fixed entries pass through unchanged.
    """

    kappa: np.ndarray
    f: np.ndarray
    r: np.ndarray
    update: np.ndarray | None = None

    def __post_init__(self):
        for name in ("kappa", "f", "r"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (self.kappa.shape == self.f.shape == self.r.shape) or self.kappa.ndim != 1:
            raise errors.DimensionMismatch("kappa, f, r must be equal-length vectors")
        if np.any(np.abs(self.r) >= 1.0):
            raise errors.InputError("persistence entries must lie in (-1, 1)")
        if self.update is None:
            object.__setattr__(self, "update", np.ones(self.kappa.shape[0], dtype=bool))
        else:
            object.__setattr__(self, "update", np.asarray(self.update, dtype=bool))
            if self.update.shape != self.kappa.shape:
                raise errors.DimensionMismatch("update mask length mismatch")

    @property
    def dim(self) -> int:
        return self.kappa.shape[0]

    @classmethod
    def zeros(cls, spec: ModelSpec) -> "CoefficientVector":
        d = spec.dim
        return cls(kappa=np.zeros(d), f=np.zeros(d), r=np.zeros(d),
                   update=spec.update_mask())

    @classmethod
    def for_spec(cls, spec: ModelSpec, kappa, f, r) -> "CoefficientVector":
        """Build with the spec's update mask and validate the sharing pattern."""
        cv = cls(kappa=kappa, f=f, r=r, update=spec.update_mask())
        validate_coefficients(cv, spec)
        return cv


def validate_coefficients(coeffs: CoefficientVector, spec: ModelSpec,
                          tol: float = 1e-12) -> None:
    """Check a coefficient vector against a spec's fixing/sharing constraints."""
    if coeffs.dim != spec.dim:
        raise errors.DimensionMismatch(
            f"coefficient length {coeffs.dim} != spec dimension {spec.dim}")
    dyn = np.zeros(spec.dim, dtype=bool)
    for g in spec.dynamic_groups():
        dyn[g] = True
    for name, arr in (("f", coeffs.f), ("r", coeffs.r)):
        off_vals = arr[~dyn]
        if off_vals.size and np.max(np.abs(off_vals)) > tol:
            raise errors.MaskMismatch(f"{name} must be zero outside dynamic groups")
    for g in spec.kappa_groups():
        if len(g) > 1 and np.ptp(coeffs.kappa[g]) > tol:
            raise errors.MaskMismatch("kappa entries within a shared group must agree")
    for g in spec.dynamic_groups():
        if len(g) > 1 and (np.ptp(coeffs.f[g]) > tol or np.ptp(coeffs.r[g]) > tol):
            raise errors.MaskMismatch("f and r entries within a shared group must agree")
