"""Piecewise-polynomial trajectories and their evaluation.

A trajectory is a chain of fixed-duration polynomial segments, one
polynomial per axis in the monomial basis P(t) = sum_i c_i t^i with local
time t in [0, tau]. Evaluation of any time derivative, dense sampling, and
the segment timetable all live here; construction of the coefficients is
the solver's job (see :mod:`peaktraj.qp`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import ValidationError

#: Absolute tolerance for continuity of position and derivatives at joints.
JOINT_TOLERANCE = 1e-6

_DERIVATIVE_NAMES = ("position", "velocity", "acceleration", "jerk", "snap")


def derivative_coefficients(coefficients: np.ndarray, order: int) -> np.ndarray:
    """Monomial coefficients of the ``order``-th derivative.

    Works on the trailing axis, so a (3, N+1) per-axis block differentiates
    in one call. Differentiating past the polynomial order yields the zero
    polynomial (a single zero coefficient).
    """
    if order < 0:
        raise ValidationError(f"derivative order must be >= 0, got {order}")
    c = np.asarray(coefficients, dtype=float)
    for _ in range(order):
        n = c.shape[-1]
        if n <= 1:
            return np.zeros(c.shape[:-1] + (1,))
        c = c[..., 1:] * np.arange(1, n, dtype=float)
    return c


@dataclass(frozen=True)
class SegmentPolynomial:
    """One trajectory segment: three axis polynomials over a shared duration.

    Attributes:
        coefficients: (3, N+1) array, row per axis (x, y, z), ascending powers.
        duration: segment duration tau in seconds, > 0.
        yaw_coefficients: optional (N+1,) yaw polynomial, pass-through only.
    """

    coefficients: np.ndarray
    duration: float
    yaw_coefficients: np.ndarray | None = None

    def __post_init__(self) -> None:
        coeffs = np.array(self.coefficients, dtype=float)
        if coeffs.ndim != 2 or coeffs.shape[0] != 3 or coeffs.shape[1] < 2:
            raise ValidationError(
                f"segment coefficients must be (3, N+1) with N >= 1, got shape {coeffs.shape}"
            )
        if not np.all(np.isfinite(coeffs)):
            raise ValidationError("segment coefficients contain non-finite values")
        if not (float(self.duration) > 0.0):
            raise ValidationError(f"segment duration must be > 0, got {self.duration}")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "duration", float(self.duration))
        if self.yaw_coefficients is not None:
            yc = np.array(self.yaw_coefficients, dtype=float)
            if yc.shape != (coeffs.shape[1],):
                raise ValidationError("yaw coefficients must match the position order")
            yc.flags.writeable = False
            object.__setattr__(self, "yaw_coefficients", yc)

    @property
    def order(self) -> int:
        return self.coefficients.shape[1] - 1

    def evaluate(self, t: float | np.ndarray, order: int = 0) -> np.ndarray:
        """Value of the ``order``-th derivative at local time(s) ``t``.

        Returns a (3,) vector for scalar ``t`` or (3, len(t)) for arrays.
        """
        c = derivative_coefficients(self.coefficients, order)
        return npoly.polyval(t, c.T)

    def evaluate_yaw(self, t: float | np.ndarray, order: int = 0) -> float | np.ndarray:
        if self.yaw_coefficients is None:
            raise ValidationError("segment carries no yaw axis")
        return npoly.polyval(t, derivative_coefficients(self.yaw_coefficients, order))


@dataclass(frozen=True)
class TrajectorySample:
    """Kinematic state at one absolute time along a trajectory."""

    time: float
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    jerk: np.ndarray
    snap: np.ndarray
    velocity_norm: float = field(init=False)
    acceleration_norm: float = field(init=False)
    jerk_norm: float = field(init=False)
    snap_norm: float = field(init=False)

    def __post_init__(self) -> None:
        for name in ("position", "velocity", "acceleration", "jerk", "snap"):
            vec = np.array(getattr(self, name), dtype=float)
            if vec.shape != (3,):
                raise ValidationError(f"sample {name} must be a 3-vector")
            vec.flags.writeable = False
            object.__setattr__(self, name, vec)
        object.__setattr__(self, "velocity_norm", float(np.linalg.norm(self.velocity)))
        object.__setattr__(self, "acceleration_norm", float(np.linalg.norm(self.acceleration)))
        object.__setattr__(self, "jerk_norm", float(np.linalg.norm(self.jerk)))
        object.__setattr__(self, "snap_norm", float(np.linalg.norm(self.snap)))


@dataclass(frozen=True)
class PiecewiseTrajectory:
    """A chain of polynomial segments, continuous at every interior joint.

    Attributes:
        segments: the segment polynomials, in flight order.
        minimized_order: derivative order the smoothness cost targeted
            (3 = jerk, 4 = snap).
        method: tag describing how the segment times were chosen.
        continuity_order: highest derivative required to match at joints.
    """

    segments: tuple[SegmentPolynomial, ...]
    minimized_order: int
    method: str = "fixed-time"
    continuity_order: int = 2

    def __post_init__(self) -> None:
        segments = tuple(self.segments)
        if not segments:
            raise ValidationError("a trajectory needs at least one segment")
        orders = {seg.order for seg in segments}
        if len(orders) != 1:
            raise ValidationError(f"all segments must share one polynomial order, got {sorted(orders)}")
        object.__setattr__(self, "segments", segments)

        durations = np.array([seg.duration for seg in segments])
        starts = np.concatenate(([0.0], np.cumsum(durations)))
        starts.flags.writeable = False
        object.__setattr__(self, "_starts", starts)

        self._check_joint_continuity()

    def _check_joint_continuity(self) -> None:
        for k in range(len(self.segments) - 1):
            left, right = self.segments[k], self.segments[k + 1]
            for s in range(self.continuity_order + 1):
                gap = np.abs(left.evaluate(left.duration, s) - right.evaluate(0.0, s))
                if np.any(gap > JOINT_TOLERANCE):
                    what = _DERIVATIVE_NAMES[s] if s < len(_DERIVATIVE_NAMES) else f"derivative {s}"
                    raise ValidationError(
                        f"{what} discontinuity of {gap.max():.3e} at joint {k}"
                    )

    @property
    def segment_count(self) -> int:
        return len(self.segments)

    @property
    def order(self) -> int:
        return self.segments[0].order

    @property
    def total_time(self) -> float:
        return float(self._starts[-1])

    @property
    def durations(self) -> np.ndarray:
        return np.array([seg.duration for seg in self.segments])

    @property
    def has_yaw(self) -> bool:
        return self.segments[0].yaw_coefficients is not None

    def start_times(self) -> np.ndarray:
        """Absolute start time of each segment plus the final time.

        Prefix sums of the durations: length K+1, first entry 0, last entry
        equal to the total time.
        """
        return self._starts.copy()

    def segment_index(self, t: float) -> int:
        """Index of the segment containing absolute time ``t``.

        Exact joint times resolve to the later segment; the final time
        resolves to the last segment.
        """
        total = self.total_time
        if not (0.0 <= t <= total):
            raise ValidationError(f"time {t} outside the valid interval [0, {total}]")
        k = int(np.searchsorted(self._starts, t, side="right")) - 1
        return min(k, len(self.segments) - 1)

    def evaluate(self, t: float, order: int = 0) -> np.ndarray:
        """Position (order 0) or its ``order``-th time derivative at time ``t``."""
        k = self.segment_index(t)
        return self.segments[k].evaluate(t - self._starts[k], order)

    def evaluate_yaw(self, t: float, order: int = 0) -> float:
        k = self.segment_index(t)
        return float(self.segments[k].evaluate_yaw(t - self._starts[k], order))

    def sample(self, dt: float) -> list[TrajectorySample]:
        """Sample the state on the grid 0, dt, 2 dt, ... plus the final time.

        Derivatives up to snap are populated for every sample.
        """
        if not (dt > 0.0):
            raise ValidationError(f"sample spacing must be > 0, got {dt}")
        total = self.total_time
        times = []
        i = 0
        while True:
            t = i * dt
            if t >= total:
                break
            times.append(t)
            i += 1
        times.append(total)

        samples = []
        for t in times:
            k = self.segment_index(t)
            seg = self.segments[k]
            local = t - self._starts[k]
            state = [seg.evaluate(local, s) for s in range(5)]
            samples.append(TrajectorySample(float(t), *state))
        return samples
