"""Per-segment derivative peaks, limit normalization, and feasibility.

Each segment's velocity, acceleration, jerk, and snap norms are reduced to
a single peak value, normalized by the corresponding motion limit into the
dimensionless ratio kappa. Acceleration is special-cased: the vehicle has
to produce thrust against gravity, so its ratio uses the gravity-corrected
norm sqrt(ax^2 + ay^2 + (az + g)^2) rather than the plain acceleration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import ValidationError
from .trajectory import PiecewiseTrajectory, derivative_coefficients

#: Default feasibility slack on kappa; matches the optimizer's band edge.
DEFAULT_TOLERANCE = 0.05

STANDARD_GRAVITY = 9.81

_GRID_POINTS = 256
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class MotionLimits:
    """Hard limits on the motion derivatives, one per order.

    Attributes:
        velocity: m/s limit on the velocity norm.
        acceleration: m/s^2 limit on the gravity-corrected thrust proxy;
            must exceed gravity or hovering itself would be infeasible.
        jerk: m/s^3 limit on the jerk norm.
        snap: m/s^4 limit on the snap norm.
        gravity: gravitational acceleration used in the thrust proxy.
    """

    velocity: float
    acceleration: float
    jerk: float
    snap: float
    gravity: float = STANDARD_GRAVITY

    def __post_init__(self) -> None:
        for name in ("velocity", "acceleration", "jerk", "snap", "gravity"):
            value = float(getattr(self, name))
            if not (value > 0.0 and math.isfinite(value)):
                raise ValidationError(f"{name} limit must be finite and > 0, got {value}")
            object.__setattr__(self, name, value)
        if self.acceleration <= self.gravity:
            raise ValidationError(
                f"acceleration limit {self.acceleration} must exceed gravity {self.gravity}; "
                "hover would already be infeasible"
            )

    def limit(self, order: int) -> float:
        try:
            return (self.velocity, self.acceleration, self.jerk, self.snap)[order - 1]
        except IndexError:
            raise ValidationError(f"no limit for derivative order {order}") from None


def _golden_max(f, a: float, b: float, tol: float) -> tuple[float, float]:
    """Golden-section maximization of a unimodal f on [a, b]."""
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    t = 0.5 * (a + b)
    return t, f(t)


def _peak_squared_norm(segment, order: int, z_offset: float = 0.0) -> tuple[float, float]:
    """Peak of ||d^order P/dt^order + z_offset e_z||^2 over the segment.

    Dense sampling brackets the maximum of the squared norm (a polynomial of
    degree <= 2N, so 256 samples cannot skip an oscillation at N <= 9) and a
    golden-section pass refines it. Grid points win ties so that boundary and
    constant-segment peaks report exact times.
    """
    coeffs = derivative_coefficients(segment.coefficients, order)
    tau = segment.duration
    grid = np.linspace(0.0, tau, _GRID_POINTS + 1)
    values = npoly.polyval(grid, coeffs.T)
    values[2] += z_offset
    squared = np.sum(values * values, axis=0)
    i = int(np.argmax(squared))

    cx, cy, cz = (list(reversed(coeffs[axis])) for axis in range(3))

    def f(t: float) -> float:
        x = y = z = 0.0
        for c in cx:
            x = x * t + c
        for c in cy:
            y = y * t + c
        for c in cz:
            z = z * t + c
        z += z_offset
        return x * x + y * y + z * z

    lo = grid[i - 1] if i > 0 else grid[0]
    hi = grid[i + 1] if i < _GRID_POINTS else grid[-1]
    t_refined, f_refined = _golden_max(f, lo, hi, tol=tau * 1e-12)
    if f_refined > squared[i]:
        return f_refined, float(t_refined)
    return float(squared[i]), float(grid[i])


def segment_peak(trajectory: PiecewiseTrajectory, segment: int, order: int) -> tuple[float, float]:
    """Peak norm of the ``order``-th derivative on one segment.

    Returns (magnitude, local time of the peak within the segment).
    """
    if not (1 <= order <= 4):
        raise ValidationError(f"peak derivative order must be in [1, 4], got {order}")
    if not (0 <= segment < trajectory.segment_count):
        raise ValidationError(f"segment index {segment} out of range")
    sq, t = _peak_squared_norm(trajectory.segments[segment], order)
    return math.sqrt(sq), t


def kappa(trajectory: PiecewiseTrajectory, segment: int, order: int, limits: MotionLimits) -> float:
    """Limit-normalized peak of one derivative on one segment.

    Order 2 uses the gravity-corrected thrust proxy; all other orders are
    the plain peak norm divided by the limit.
    """
    if order == 2:
        sq, _ = _peak_squared_norm(trajectory.segments[segment], 2, z_offset=limits.gravity)
        return math.sqrt(sq) / limits.acceleration
    magnitude, _ = segment_peak(trajectory, segment, order)
    return magnitude / limits.limit(order)


@dataclass(frozen=True)
class DerivativePeak:
    """Peak of one derivative order on one segment."""

    order: int
    magnitude: float  # norm entering kappa (gravity-corrected for order 2)
    time: float  # local time of the peak within the segment
    kappa: float


@dataclass(frozen=True)
class SegmentPeaks:
    """All derivative peaks of one segment plus diagnostics."""

    index: int
    duration: float
    peaks: tuple[DerivativePeak, ...]
    acceleration_without_gravity: float

    @property
    def max_kappa(self) -> float:
        return max(p.kappa for p in self.peaks)


@dataclass(frozen=True)
class PeakReport:
    """Per-segment, per-derivative normalized peaks of a whole trajectory."""

    segments: tuple[SegmentPeaks, ...]
    limits: MotionLimits

    @property
    def max_kappa(self) -> float:
        return max(seg.max_kappa for seg in self.segments)

    @property
    def per_segment_max(self) -> np.ndarray:
        return np.array([seg.max_kappa for seg in self.segments])

    def peak(self, segment: int, order: int) -> DerivativePeak:
        return self.segments[segment].peaks[order - 1]


def peak_report(trajectory: PiecewiseTrajectory, limits: MotionLimits) -> PeakReport:
    """Extract every segment's normalized derivative peaks."""
    segments = []
    for k, seg in enumerate(trajectory.segments):
        peaks = []
        for order in range(1, 5):
            offset = limits.gravity if order == 2 else 0.0
            sq, t = _peak_squared_norm(seg, order, z_offset=offset)
            magnitude = math.sqrt(sq)
            peaks.append(DerivativePeak(order, magnitude, t, magnitude / limits.limit(order)))
        raw_sq, _ = _peak_squared_norm(seg, 2)
        segments.append(SegmentPeaks(k, seg.duration, tuple(peaks), math.sqrt(raw_sq)))
    return PeakReport(tuple(segments), limits)


def is_feasible(report: PeakReport, tolerance: float = DEFAULT_TOLERANCE) -> bool:
    """Whether every peak stays within its limit, up to the given slack."""
    if tolerance < 0.0:
        raise ValidationError(f"feasibility tolerance must be >= 0, got {tolerance}")
    return report.max_kappa <= 1.0 + tolerance
