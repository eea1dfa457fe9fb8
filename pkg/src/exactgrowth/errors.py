"""Exception types shared across the package.

The CLI maps these onto exit codes: hypothesis violations exit with 2 and
non-convergence with 3.
"""


class ParameterError(ValueError):
    """An argument is outside the domain an operation accepts."""


class HypothesisViolation(ParameterError):
    """Structural hypotheses on (k, p, theta, gamma, eta, ...) do not hold."""


class DomainError(ParameterError):
    """A special function was called outside its supported domain."""


class DivergentMeasureError(ParameterError):
    """The requested weighted integral diverges at the origin."""


class SupportError(ParameterError):
    """A function lacks the compact support an operation requires."""


class DerivativeOrderError(ValueError):
    """A closed-form function does not provide enough derivatives."""


class NavierViolation(ValueError):
    """A function does not satisfy the Navier boundary conditions."""


class ConvergenceError(RuntimeError):
    """An iterative method failed to reach its tolerance."""


class InfeasibleError(ParameterError):
    """An optimization problem has an empty feasible set."""


class NormalizationError(ArithmeticError):
    """A normalized function misses its target norm beyond the allowed slack."""
