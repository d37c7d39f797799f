"""Error types raised by the numeric kernels, fitters and runners.

Validation problems subclass ``ValueError`` and numeric failures subclass
``ArithmeticError`` so callers that only know the built-ins still catch them.
"""


class DomainError(ValueError):
    """An argument lies outside the domain of a numeric routine."""


class RuleInapplicableError(ValueError):
    """A selection rule cannot be applied to the given historical pool."""


class ConfigError(ValueError):
    """A run configuration or input data file is invalid."""


class NumericalError(ArithmeticError):
    """Quadrature or iteration failed to reach its tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class FittingError(NumericalError):
    """MAP prior fitting (grid posterior or mixture EM) did not converge."""


class AggregationError(RuntimeError):
    """No replicate produced a finite result to aggregate."""
