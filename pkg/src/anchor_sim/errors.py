"""Exception types raised across the package."""

from __future__ import annotations


class AnchorSimError(Exception):
    """Base class for every error raised by anchor_sim."""


class ScenarioError(AnchorSimError, ValueError):
    """A scenario failed to parse or violates one of its invariants."""

    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")

    def __reduce__(self):
        return type(self), (self.field, self.reason)


class GeometryError(AnchorSimError, ValueError):
    """Target and radar coincide, so range/angle are undefined."""


class SingularMatrixError(AnchorSimError, ArithmeticError):
    """An information matrix that must be inverted is not positive definite."""


class ConvergenceError(AnchorSimError, RuntimeError):
    """An iterative estimator ran out of iterations."""


class InfeasibleError(AnchorSimError, RuntimeError):
    """A constraint set is empty. ``constraint`` names the offending row."""

    def __init__(self, constraint: str, message: str = "", user: int | None = None):
        self.constraint = constraint
        self.user = user
        self.detail = message
        text = f"infeasible constraint {constraint!r}"
        if message:
            text += f": {message}"
        super().__init__(text)

    def __reduce__(self):
        return type(self), (self.constraint, self.detail, self.user)


class TransitionFailure(AnchorSimError, RuntimeError):
    """The block-reassignment chain ran out of candidate positions."""


class InstanceTooLarge(AnchorSimError, ValueError):
    """Exhaustive enumeration was requested on an instance above the guard."""
