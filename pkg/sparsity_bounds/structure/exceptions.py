"""Exception hierarchy shared by the numerical core, the simulator and the CLI."""

from typing import Any, List, Optional, Sequence


class SparsityBoundsError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SparsityBoundsError, ValueError):
    """An argument lies outside the domain of the requested quantity."""


class QuadratureError(SparsityBoundsError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, estimate: float, depth: int):
        super().__init__(f"{message} (estimate={estimate!r}, depth={depth})")
        self.message = message
        self.estimate = estimate
        self.depth = depth

    def __reduce__(self):
        return type(self), (self.message, self.estimate, self.depth)


class ConvergenceError(SparsityBoundsError):
    """An iterative solver stopped at its iteration cap."""

    def __init__(self, message: str, iterations: int, trajectory: Optional[Sequence[Any]] = None):
        super().__init__(f"{message} after {iterations} iterations")
        self.message = message
        self.iterations = iterations
        self.trajectory: List[Any] = list(trajectory or [])

    def __reduce__(self):
        return type(self), (self.message, self.iterations, self.trajectory)


class DivergenceError(ConvergenceError):
    """An iterative solver produced an estimate whose norm blew up."""


class UnachievableError(SparsityBoundsError):
    """No sampling rate inside the searched bracket meets the target."""


class SearchSpaceTooLargeError(SparsityBoundsError):
    """The exhaustive nearest-subspace search exceeds its subset budget."""


class UsageError(SparsityBoundsError):
    """Invalid combination of run options."""


class TrialFailedError(SparsityBoundsError):
    """A Monte Carlo trial raised; the trial index travels with the cause."""

    def __init__(self, trial: int, cause: BaseException):
        super().__init__(f"trial {trial} failed: {type(cause).__name__}: {cause}")
        self.trial = trial
        self.cause = cause

    def __reduce__(self):
        return type(self), (self.trial, self.cause)
