"""Score-driven heteroskedastic DySARAR(1,1) spatio-temporal models.

Simulation, filtering, maximum likelihood estimation, nested-model selection
and a mean-variance portfolio backtester driven by the model's one-step-ahead
forecasts.
"""

__version__ = "0.1.0"

from . import errors
from .backend import backend_name
from .econweights import (IndicatorPanel, SensitivityGrid, build_weight_matrix,
                          indicator_weight_matrix, sensitivity_grid,
                          spearman_matrix)
from .estimation import (ConvergenceStatus, FitOptions, FitResult, GridRow,
                         fit_mle, information_criteria, lr_test, model_grid,
                         pack_free, spec_grid, standard_errors, unpack_free)
from .filter import (FilterOutput, filter_pass, forecast_one_step,
                     simulate_filter, simulate_path, update_step)
from .model import CoefficientVector, ModelSpec, validate_coefficients
from .portfolio import (BacktestConfig, BacktestReport, FeeConfig, RiskShares,
                        annualized_fee_pct, backtest_metrics,
                        block_bootstrap_pvalue, equal_weight_strategy,
                        management_fee, risk_shares, rolling_backtest,
                        tangency_weights)
from .score import (MappingBounds, NaturalParams, ScoreConfig, TildeParams,
                    fisher_information_mc, inverse_map, jacobian,
                    log_likelihood_t, map_params, natural_vector,
                    scaled_score, score_natural)
from .simlab import (FilteringReport, FiniteSampleConfig, FiniteSampleReport,
                     SSararConfig, filtering_experiment,
                     finite_sample_experiment, gen_regressors,
                     random_weight_matrix, simulate_ssarar_params, table2_spec,
                     table2_truth)
from .spatial import (CovarianceDecomposition, SpatialOperators,
                      build_operators, conditional_moments, neumann_expansion)
from .weights import WeightMatrix, load_weight_csv, row_normalize, save_weight_csv

__all__ = [name for name in dir() if not name.startswith("_")]
