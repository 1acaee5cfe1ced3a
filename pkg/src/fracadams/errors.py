"""Exception hierarchy shared by every module."""


class FracAdamsError(Exception):
    """Base class for all toolkit errors."""


class DomainError(FracAdamsError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(FracAdamsError, ValueError):
    """A discretization or setup choice cannot support the requested computation."""


class UsageError(FracAdamsError, ValueError):
    """Inconsistent inputs, e.g. grid functions living on different grids."""


class SolverError(FracAdamsError, RuntimeError):
    """A linear or nonlinear solver failed; carries diagnostics."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics
