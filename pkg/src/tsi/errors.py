"""Exception hierarchy shared by every module.

Each error carries a machine-readable ``code`` (used by the CLI error
envelope) and an optional ``field`` naming the offending input.
"""


class TSIError(Exception):
    code = "error"
    exit_code = 2

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.message = message
        self.field = field


class ValidationFailure(TSIError):
    code = "validation_failure"
    exit_code = 1


class NonPositiveDeterminant(ValidationFailure):
    code = "non_positive_determinant"


class ZeroVector(ValidationFailure):
    code = "zero_vector"


class SymmetryViolation(ValidationFailure):
    code = "symmetry_violation"


class ZeroMeanField(ValidationFailure):
    code = "zero_mean_field"


class NonzeroMeanPotential(ValidationFailure):
    code = "nonzero_mean_potential"


class FluxNotQuantized(ValidationFailure):
    code = "flux_not_quantized"


class HypothesisViolation(ValidationFailure):
    code = "hypothesis_violation"


class NumericalFailure(TSIError):
    code = "numerical_failure"


class NonMonotone(NumericalFailure):
    code = "non_monotone"


class NonPositive(NonMonotone):
    """A recovered density s'(y) that is not strictly positive."""

    code = "non_positive"


class IllConditioned(NumericalFailure):
    code = "ill_conditioned"


class IncompleteCoverage(NumericalFailure):
    code = "incomplete_coverage"


class GenericityFailure(NumericalFailure):
    code = "genericity_failure"


class ClampViolation(NumericalFailure):
    code = "clamp_violation"


class ConvergenceFailure(NumericalFailure):
    code = "convergence_failure"


class SpecParseError(TSIError):
    code = "parse_error"
    exit_code = 3
