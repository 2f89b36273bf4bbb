"""Exception hierarchy shared across the package.

Errors are split along the CLI's exit-code boundary: configuration /
usage problems versus numerical failures discovered mid-computation.
"""


class PccalError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(PccalError, ValueError):
    """An input value lies outside its mathematical domain."""


class ShapeError(PccalError, ValueError):
    """Array dimensions are inconsistent with the operation."""


class CapacityError(PccalError, ValueError):
    """A requested construction would exceed practical size limits."""


class ConfigError(PccalError, ValueError):
    """A config file or CLI argument is malformed or inconsistent."""


class NumericalError(PccalError, RuntimeError):
    """A numerical operation could not produce a valid result."""


class SolverError(NumericalError):
    """An optimization solve failed outright (carries diagnostics)."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class EvaluationError(NumericalError):
    """A model or surrogate evaluation returned a non-finite value."""


class PartialEnsembleError(PccalError, RuntimeError):
    """An ensemble run completed only partially; a pending manifest exists."""

    def __init__(self, message, pending=()):
        super().__init__(message)
        self.pending = list(pending)
