"""Exception types shared across the package."""


class PnodeError(Exception):
    """Base class for all package-specific errors."""


class SingularInnovation(PnodeError):
    """Innovation covariance factor is numerically rank-deficient."""


class SingularPrediction(PnodeError):
    """Predicted covariance factor is numerically rank-deficient."""


class IllConditioned(PnodeError):
    """A factorization failed due to ill-conditioning."""


class UnsupportedField(PnodeError):
    """Vector field uses a primitive outside the jet arithmetic."""


class OrderTooLow(PnodeError):
    """An operator needs more modeled derivatives than the prior provides."""


class NonFiniteField(PnodeError):
    """Vector field returned NaN or Inf."""


class NoOdeOperator(PnodeError):
    """An operator scheme must contain exactly one ODE-role operator."""


class MultipleOdeOperators(PnodeError):
    """An operator scheme must contain exactly one ODE-role operator."""


class StepUnderflow(PnodeError):
    """Adaptive step size collapsed below the resolvable scale."""


class UnknownProblem(PnodeError):
    """Requested problem name is not in the registry."""


class NoAnalyticSolution(PnodeError):
    """Problem has no closed-form solution."""


class ReferenceInconsistent(PnodeError):
    """Reference solves at two tolerances disagree beyond the gate."""
