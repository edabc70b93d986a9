"""Exception hierarchy shared by the library and the command-line front end."""


class AqcError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(AqcError, ValueError):
    """An input violates a structural precondition (shape, hermiticity, norm)."""


class DegenerateSpectrumError(AqcError, ArithmeticError):
    """The ground-state gap vanished where a non-degenerate spectrum is required."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class UnsupportedModelError(AqcError, ValueError):
    """The operation only has a closed form for the one-qubit xz model."""


class NoSolutionError(AqcError, RuntimeError):
    """Shooting could not bracket a parameter that meets the boundary condition."""


class DomainError(AqcError, ArithmeticError):
    """A right-hand side or closed form produced a non-finite value."""


class NotAtOptimumError(AqcError, ValueError):
    """The at-optimum Hessian was requested away from a fidelity optimum."""


class NumericalFailure(AqcError, ArithmeticError):
    """The optimizer met a non-finite objective or gradient."""

    def __init__(self, message, iterate=None):
        super().__init__(message)
        self.iterate = iterate


class ConfigurationError(AqcError, ValueError):
    """Invalid user configuration (unknown keys, bad family/problem pairs)."""
