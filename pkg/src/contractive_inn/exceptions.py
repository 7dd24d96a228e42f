"""Exception hierarchy.

Everything raised deliberately by the package derives from
:class:`ContractiveINNError` so callers (and the CLI) can separate refusals
from genuine bugs.
"""


class ContractiveINNError(Exception):
    """Base class for all package errors."""


class InvalidInputError(ContractiveINNError, ValueError):
    """Shapes, finiteness or value ranges of an argument are wrong."""


class WellPosednessError(ContractiveINNError):
    """The contraction condition fails, so the requested computation is refused."""


class ConvergenceError(ContractiveINNError):
    """An iteration that was expected to converge did not."""


class BudgetError(ContractiveINNError):
    """A brute-force computation would exceed its size guard."""


class ModelFormatError(InvalidInputError):
    """A model, config or dataset file could not be parsed."""


class UnsupportedVersionError(ModelFormatError):
    pass


class GradientCheckError(ContractiveINNError):
    """Analytic gradients disagree with finite differences."""


class TrainingError(ContractiveINNError):
    """Training hit a non-finite loss or too many skipped samples."""
