"""Exception and warning types shared across snlab."""


class SNLabError(Exception):
    """Base class for all snlab failures."""


class DomainError(SNLabError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigurationError(SNLabError, ValueError):
    """Invalid parameters, or a setup from which no solution can be found."""


class ResolutionError(SNLabError, ValueError):
    """A requested rescaling cannot be represented on the target grid."""


class PlacementError(SNLabError, ValueError):
    """A lump does not fit inside the computational box."""


class ShapeError(SNLabError, ValueError):
    """Fields, grids or times do not match."""


class PreconditionError(SNLabError, ValueError):
    """The input violates a stated precondition of the operation."""


class UndefinedError(SNLabError, ValueError):
    """The requested quantity is undefined for this input (e.g. zero norm)."""


class ConvergenceError(SNLabError, RuntimeError):
    """An iterative procedure failed to reach its tolerance."""


class IntegrationError(SNLabError, ArithmeticError):
    """Non-finite values appeared during an ODE integration."""

    def __init__(self, message, radius=None):
        super().__init__(message)
        self.radius = radius


class DivergenceError(SNLabError, ArithmeticError):
    """NaN or Inf appeared in a time evolution."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class SingularityError(SNLabError, ArithmeticError):
    """Two point particles coincide."""


class BoundaryWarning(UserWarning):
    """Field content reaches the box boundary more than the solver assumes."""


class SeparationWarning(UserWarning):
    """Lumps are closer than the wide-separation regime allows."""
