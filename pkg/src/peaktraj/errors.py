"""Error taxonomy shared across the toolkit.

Every failure raised by the library is one of these classes, and each class
carries the process exit code the CLI maps it to, so scripted callers get a
stable contract: 2 = bad input, 3 = an optimizer gave up, 4 = linear algebra
broke down.
"""

from __future__ import annotations


class TrajectoryToolError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ValidationError(TrajectoryToolError):
    """Malformed input or a violated invariant (bad file, bad argument)."""

    exit_code = 2


class ConvergenceError(TrajectoryToolError):
    """An iterative optimization terminated without an acceptable result.

    Carries the iteration trace collected up to the failure, when available.
    """

    exit_code = 3

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class NumericalError(TrajectoryToolError):
    """A linear solve failed or returned an unacceptably large residual.

    ``durations`` records the segment times that produced the bad system,
    when the failure happened inside a time-allocation loop.
    """

    exit_code = 4

    def __init__(self, message: str, durations=None):
        super().__init__(message)
        self.durations = None if durations is None else tuple(float(t) for t in durations)
