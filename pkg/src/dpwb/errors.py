from __future__ import annotations


class DPError(Exception):
    """Base class for errors raised by dpwb."""


class InvalidArgumentError(DPError, ValueError):
    pass


class ConfigurationError(DPError, ValueError):
    pass


class NonConvergenceError(DPError, RuntimeError):
    pass


class UnsupportedQueryError(DPError, NotImplementedError):
    pass


class BudgetExhausted(DPError):
    """Raised when a spend would exceed the remaining privacy budget.

    The caller must not release the query result.
    """

    def __init__(self, requested: float, remaining: float, descriptor: str = ""):
        self.requested = requested
        self.remaining = remaining
        self.descriptor = descriptor
        what = f" for {descriptor!r}" if descriptor else ""
        super().__init__(
            f"privacy budget exhausted{what}: requested eps={requested:g}, remaining eps={remaining:g}"
        )
