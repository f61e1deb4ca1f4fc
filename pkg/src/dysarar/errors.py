"""Exception hierarchy shared across the package.

Input problems derive from :class:`InputError`, numerical failures during a
computation from :class:`NumericalError`. The CLI maps these onto distinct
exit codes.
"""


class DysararError(Exception):
    """Base class for all package exceptions."""


class InputError(DysararError, ValueError):
    """Malformed or inadmissible user input."""


class NumericalError(DysararError, ArithmeticError):
    """A computation broke down numerically."""


# -- weight matrices ---------------------------------------------------------

class ZeroRow(InputError):
    """A spatial unit has no neighbors (row of zeros before normalization)."""


class NegativeEntry(InputError):
    """Weight matrices must be nonnegative."""


class NonzeroDiagonal(InputError):
    """A unit may not be its own neighbor."""


class NotRowStandardized(InputError):
    """Rows of a weight matrix must sum to one."""


# -- spatial operators and likelihood ----------------------------------------

class UnstableParameter(InputError):
    """Autoregressive parameter outside the stable interval for this W."""


class SingularOperator(NumericalError):
    """I - rho*W (or I - lambda*W) is numerically singular."""


class NonInvertibleInformation(NumericalError):
    """Estimated information matrix is singular and cannot be powered."""


# -- filtering ---------------------------------------------------------------

class DimensionMismatch(InputError):
    """Array shapes are inconsistent with the model specification."""


class NumericalBreakdown(NumericalError):
    """Non-finite score or likelihood encountered during filtering."""


# -- estimation --------------------------------------------------------------

class MaskMismatch(InputError):
    """Coefficient vector violates the sharing/fixing constraints of a spec."""


class NoFiniteStart(NumericalError):
    """Every optimizer starting point produced a -inf likelihood."""


class NonPDHessian(NumericalError):
    """Hessian at the optimum is not negative definite."""


class NegativeStatistic(NumericalError):
    """LR statistic negative beyond tolerance: the restricted fit failed."""


# -- simulation --------------------------------------------------------------

class NonPDCovariance(InputError):
    """Supplied covariance matrix is not positive definite."""


class RetryExhausted(NumericalError):
    """Random weight generator could not produce a matrix without zero rows."""


class ExcessiveFailures(NumericalError):
    """Too many Monte Carlo replications failed for the summary to be trusted."""


# -- economic weights --------------------------------------------------------

class ConstantColumn(InputError):
    """An indicator column is constant; Spearman correlation is undefined."""


# -- portfolio ---------------------------------------------------------------

class SingularCovariance(NumericalError):
    """Forecast covariance cannot be inverted."""


class DegenerateNormalizer(NumericalError):
    """1'Omega^{-1}mu is numerically zero; tangency weights undefined."""


class NoRootInInterval(NumericalError):
    """Fee equation has no sign change over the search interval."""


class DomainViolation(InputError):
    """Power utility evaluated at nonpositive wealth."""


# -- CLI ---------------------------------------------------------------------

class ConfigParse(InputError):
    """Run configuration file could not be parsed."""


class MissingInput(InputError):
    """A referenced input file does not exist."""


class RaggedRows(InputError):
    """CSV rows have inconsistent lengths."""


class NonNumericCell(InputError):
    """CSV body contains a non-numeric cell."""


class EmptyPanel(InputError):
    """CSV contains no data rows."""
