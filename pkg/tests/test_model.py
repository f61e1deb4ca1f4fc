import numpy as np
import pytest

from dysarar import errors
from dysarar.estimation import spec_grid
from dysarar.model import CoefficientVector, ModelSpec, validate_coefficients


def test_full_sarar_param_count_matches_reference_grid():
    # dynamic rows of the 18-unit, one-regressor model-choice table
    assert ModelSpec.dynamic("sarar", 18, 1).n_free_params == 63
    assert ModelSpec.dynamic("sar", 18, 1).n_free_params == 60
    assert ModelSpec.dynamic("sae", 18, 1).n_free_params == 60
    assert ModelSpec.dynamic("ols", 18, 1).n_free_params == 57


def test_shared_sigma_param_counts():
    assert ModelSpec.dynamic("ols", 18, 1, sigma_dynamic="shared",
                             sigma_cross="homo").n_free_params == 6
    assert ModelSpec.dynamic("sar", 18, 1, sigma_dynamic="shared",
                             sigma_cross="homo").n_free_params == 9
    assert ModelSpec.dynamic("sarar", 18, 1, sigma_dynamic="shared",
                             sigma_cross="homo").n_free_params == 12
    # DHo with unit-specific kappa
    assert ModelSpec.dynamic("ols", 18, 1, sigma_dynamic="shared").n_free_params == 23
    assert ModelSpec.dynamic("sarar", 18, 1, sigma_dynamic="shared").n_free_params == 29


def test_static_param_counts():
    assert ModelSpec.static("ols", 18, 1, sigma_cross="homo").n_free_params == 2
    assert ModelSpec.static("sar", 18, 1, sigma_cross="homo").n_free_params == 3
    assert ModelSpec.static("sarar", 18, 1, sigma_cross="homo").n_free_params == 4
    # cross-heteroskedastic statics per the constraint arithmetic
    assert ModelSpec.static("ols", 18, 1).n_free_params == 19
    assert ModelSpec.static("sarar", 18, 1).n_free_params == 21


def test_spec_grid_has_twenty_unique_labels():
    specs = spec_grid(18, 1)
    labels = [s.label for s in specs]
    assert len(specs) == 20
    assert len(set(labels)) == 20
    assert "DySARAR-DHe.CHe" in labels
    assert "DySAE-DHo.CHe" in labels
    assert "StOLS-CHo" in labels


def test_labels():
    assert ModelSpec.dynamic("sarar", 6, 0).label == "DySARAR-DHe.CHe"
    assert ModelSpec.dynamic("ols", 4, 1, sigma_dynamic="shared",
                             sigma_cross="homo").label == "DyOLS-DHo.CHo"
    assert ModelSpec.static("sae", 4, 1, sigma_cross="homo").label == "StSAE-CHo"


def test_family_detection():
    assert ModelSpec.dynamic("sarar", 4, 0).family == "sarar"
    assert ModelSpec.dynamic("sar", 4, 0).family == "sar"
    assert ModelSpec.dynamic("sae", 4, 0).family == "sae"
    assert ModelSpec.dynamic("ols", 4, 1).family == "ols"


def test_off_modes_force_update_mask():
    spec = ModelSpec.dynamic("sae", 5, 2)
    mask = spec.update_mask()
    assert not mask[0] and mask[1]
    assert mask[2:].all()


def test_restriction_helper():
    spec = ModelSpec.dynamic("sarar", 6, 0)
    restricted = spec.with_static_spatial(rho=True, lam=True)
    assert restricted.rho_mode == "static" and restricted.lambda_mode == "static"
    assert spec.n_free_params - restricted.n_free_params == 4
    with pytest.raises(errors.InputError):
        ModelSpec.dynamic("sae", 6, 0).with_static_spatial(rho=True)


def test_validate_coefficients_sharing():
    spec = ModelSpec.dynamic("sarar", 3, 0, sigma_dynamic="shared", sigma_cross="homo")
    d = spec.dim
    kappa = np.zeros(d)
    f = np.full(d, 0.05)
    r = np.full(d, 0.9)
    CoefficientVector.for_spec(spec, kappa, f, r)

    bad_kappa = kappa.copy()
    bad_kappa[spec.sigma_slice] = [0.1, 0.2, 0.3]
    with pytest.raises(errors.MaskMismatch):
        CoefficientVector.for_spec(spec, bad_kappa, f, r)

    static = ModelSpec.static("sarar", 3, 0)
    with pytest.raises(errors.MaskMismatch):
        CoefficientVector.for_spec(static, kappa, f, r)  # f must vanish


def test_coefficient_vector_invariants():
    with pytest.raises(errors.InputError):
        CoefficientVector(kappa=np.zeros(3), f=np.zeros(3), r=np.array([0.5, 1.0, 0.0]))
    with pytest.raises(errors.DimensionMismatch):
        CoefficientVector(kappa=np.zeros(3), f=np.zeros(2), r=np.zeros(3))


def test_coefficient_names_layout():
    spec = ModelSpec.dynamic("sarar", 3, 1, sigma_dynamic="shared", sigma_cross="homo")
    names = spec.coefficient_names()
    assert names == [
        "kappa_rho", "kappa_lambda", "kappa_beta_1", "kappa_sigma",
        "f_rho", "f_lambda", "f_beta_1", "f_sigma",
        "r_rho", "r_lambda", "r_beta_1", "r_sigma",
    ]
    assert len(names) == spec.n_free_params


def test_zero_regressors_forces_beta_off():
    spec = ModelSpec.dynamic("sarar", 4, 0)
    assert spec.beta_mode == "off"
    assert spec.dim == 6
