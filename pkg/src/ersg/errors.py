"""Exception types raised by the solvers and evaluators."""

from __future__ import annotations


class InvalidGameError(ValueError):
    """A game, strategy or configuration violates its invariants."""

    def __init__(self, message: str, violations: list[str] | None = None):
        self.violations = list(violations or [])
        if self.violations:
            message = message + ": " + "; ".join(self.violations[:10])
            if len(self.violations) > 10:
                message += f"; ... ({len(self.violations) - 10} more)"
        super().__init__(message)


class NumericRangeError(ArithmeticError):
    """A payoff/rationality product is not representable in float64."""


class OneShotError(RuntimeError):
    """The one-shot solver stopped before certifying the requested gap.

    ``best`` holds the best iterate found (a ``OneShotSolution``) and
    ``gap`` its certified duality gap.
    """

    def __init__(self, message: str, best=None, gap: float = float("inf")):
        super().__init__(message)
        self.best = best
        self.gap = gap


class ConvergenceError(RuntimeError):
    """An iterative scheme exhausted its budget.

    ``history`` is the sequence of residuals observed; ``partial`` carries
    whatever the caller can still use (e.g. the last iterate).
    """

    def __init__(self, message: str, history=None, partial=None):
        super().__init__(message)
        self.history = list(history or [])
        self.partial = partial


class EnumerationLimitError(RuntimeError):
    """History-tree enumeration would exceed the configured limit."""


class TransferError(ValueError):
    """A strategy cannot be carried over to a differently shaped map."""
