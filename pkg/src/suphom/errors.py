"""Exception hierarchy for the suphom package."""


class SuphomError(Exception):
    """Base class for all package errors."""


class ConfigError(SuphomError, ValueError):
    """Malformed density or run configuration."""


class UnsupportedOperationError(SuphomError):
    """The density form does not provide the requested operation."""


class InfeasibleLevelError(SuphomError):
    """A sublevel set is empty at the requested level."""


class NotLevelConvexError(SuphomError):
    """Solvers refuse densities that failed the level-convexity check."""


class SolverError(SuphomError):
    """An iterative linear solve did not reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
