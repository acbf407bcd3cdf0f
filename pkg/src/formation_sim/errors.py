"""Shared exception types."""
from __future__ import annotations


class ValidationError(ValueError):
    """Raised when an input violates a documented contract.

    ``path`` locates the offending entry (e.g. "weights[1][2]" or
    "gains.alpha1" for scenario files) so callers can report exactly
    what to fix.
    """

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        if path is not None:
            message = f"{path}: {message}"
        super().__init__(message)


class DivergenceError(RuntimeError):
    """Raised when an integrated state leaves the finite range.

    Carries the simulation time and the (0-based) agent index whose
    state first exceeded the divergence threshold.
    """

    def __init__(self, t: float, agent: int, value: float):
        self.t = t
        self.agent = agent
        self.value = value
        super().__init__(
            f"state diverged at t={t:.6g} (agent index {agent}, magnitude {value:.3g})"
        )
