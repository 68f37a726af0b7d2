"""Exception hierarchy.

Numerical failures (factorization, quadrature, embedding, root bracketing,
limit detection) derive from :class:`NumericalError`; malformed inputs derive
from :class:`ModelError` or :class:`ConfigError`.
"""


class GaussMaxError(Exception):
    """Base class for all package errors."""


class ModelError(GaussMaxError, ValueError):
    """A model, grid or argument violates a stated invariant."""


class ConfigError(GaussMaxError):
    """An experiment configuration cannot be parsed or is inconsistent."""


class NumericalError(GaussMaxError, ArithmeticError):
    """A numerical procedure failed to deliver a trustworthy answer."""


class BracketError(NumericalError):
    def __init__(self, message, bracket):
        super().__init__(f"{message} (bracket={bracket})")
        self.bracket = bracket


class LimitError(NumericalError):
    """A u-ladder limit could not be classified, or disagrees with theory."""

    def __init__(self, message, ladder=(), values=()):
        super().__init__(message)
        self.ladder = tuple(ladder)
        self.values = tuple(values)


class FactorizationError(NumericalError):
    def __init__(self, message, smallest_pivot=None):
        super().__init__(f"{message} (smallest pivot={smallest_pivot})")
        self.smallest_pivot = smallest_pivot


class EmbeddingError(NumericalError):
    def __init__(self, message, min_eigenvalue=None):
        super().__init__(f"{message} (most negative eigenvalue={min_eigenvalue})")
        self.min_eigenvalue = min_eigenvalue


class QuadratureError(NumericalError):
    def __init__(self, message, estimate=None, error_bound=None):
        super().__init__(f"{message} (estimate={estimate}, bound={error_bound})")
        self.estimate = estimate
        self.error_bound = error_bound


class OverflowGuardError(NumericalError):
    pass


class ExtrapolationError(NumericalError):
    pass


class MembershipError(ModelError):
    """A declared manifold chart does not belong to the claimed K-set."""

    def __init__(self, message, chart=None, parameter=None):
        super().__init__(message)
        self.chart = chart
        self.parameter = parameter


class MissingConstantError(GaussMaxError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "missing constant"
