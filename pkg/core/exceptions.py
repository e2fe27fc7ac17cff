"""
Core App - Exceptions

Error hierarchy shared by every toolkit app.
Each error maps to a CLI exit code.
"""


class PatchAttackError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class InvalidArgumentError(PatchAttackError, ValueError):
    """Raised when an operation receives arguments outside its domain."""
    pass


class ConfigurationError(InvalidArgumentError):
    """Raised when a run configuration file is malformed."""
    pass


class TransformDegenerateError(PatchAttackError):
    """Raised when a sampled transform projects the object out of frame."""
    pass


class BudgetExceededError(PatchAttackError):
    """
    Raised before an oracle query that would exceed the query budget.

    ``partial`` is filled in by each layer the error travels through
    (partial estimate, partial heatmap, best-so-far perturbation, ...),
    so callers can stop gracefully with what was computed.
    """

    exit_code = 2

    def __init__(self, message, budget=None, spent=None, partial=None):
        super().__init__(message)
        self.budget = budget
        self.spent = spent
        self.partial = partial


class InitializationFailureError(PatchAttackError):
    """Raised when no adversarial starting point can be found."""

    exit_code = 3


class OracleIOError(PatchAttackError):
    """Raised when an oracle backend crashes, times out or is unreachable."""

    exit_code = 4


class ProtocolError(OracleIOError):
    """Raised when an oracle backend replies with a malformed message."""
    pass
