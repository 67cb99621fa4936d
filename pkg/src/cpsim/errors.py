"""Exception types shared across the simulation modules."""

from __future__ import annotations


class CpsimError(Exception):
    """Base class for all library errors."""


class OutOfRangeError(CpsimError, ValueError):
    """A time or index argument falls outside the populated/allowed range."""


class ParameterError(CpsimError, ValueError):
    """Model or operator parameters violate their declared constraints."""


class ConfigError(CpsimError, ValueError):
    """Experiment configuration failed validation."""


class SingularHitError(CpsimError, ArithmeticError):
    """A coefficient evaluated to a non-finite value.

    Attributes:
        index: 1-based step (jump or grid) index at which the evaluation failed.
        time: the evaluation time handed to the coefficient.
        history_time: for two-time (Volterra) coefficients, the integration
            time ``s``; ``None`` for one-time coefficients.
    """

    def __init__(self, index: int, time: float, history_time: float | None = None):
        self.index = int(index)
        self.time = float(time)
        self.history_time = None if history_time is None else float(history_time)
        where = f"t={self.time!r}"
        if self.history_time is not None:
            where += f", s={self.history_time!r}"
        super().__init__(f"non-finite coefficient at step {self.index} ({where})")


class TruncationError(CpsimError, RuntimeError):
    """A series failed to reach its tolerance within the allowed number of terms."""

    def __init__(self, n_terms: int, last_norm: float, tol: float):
        self.n_terms = n_terms
        self.last_norm = last_norm
        self.tol = tol
        super().__init__(
            f"series not converged after {n_terms} terms: last term sup-norm "
            f"{last_norm:.3e} >= tol {tol:.1e}"
        )
