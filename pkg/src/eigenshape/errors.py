class GridMismatchError(ValueError):
    """Two masks or fields live on different grids."""


class EmptyMaskError(ValueError):
    """An operation that needs at least one cell received an empty mask."""


class ConvergenceError(RuntimeError):
    """An iterative solve stopped before reaching its residual target."""

    def __init__(self, message: str, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class DomainTooSmallError(RuntimeError):
    """The optimal set reached the edge of the computational box."""


class ConfigError(ValueError):
    """Malformed or infeasible scenario configuration."""
