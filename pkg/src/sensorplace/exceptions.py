"""Shared error types for numerical failures."""

from __future__ import annotations

__all__ = ["NumericalFailure", "NonconvergenceError"]


class NumericalFailure(RuntimeError):
    """A linear-algebra kernel failed (SVD breakdown, singular system).

    ``diagnostics`` carries whatever condition information was available
    at the failure site.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NonconvergenceError(RuntimeError):
    """An iterative solver hit its iteration limit.

    ``residuals`` holds the final convergence measures so callers can
    report or retry with context.
    """

    def __init__(self, message: str, residuals: dict | None = None):
        super().__init__(message)
        self.residuals = residuals or {}
