"""Fixed-time smoothness optimization of polynomial coefficients.

Given waypoints and segment durations, the coefficient problem is a
quadratic program: minimize the integral of squared weighted derivatives
subject to linear equality constraints (waypoint pins, boundary derivative
pins, and derivative continuity at joints). The axes decouple, share one
constraint matrix, and are solved together through a single dense KKT
factorization with partial pivoting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np
import scipy.linalg

from .course import WaypointCourse
from .errors import NumericalError, ValidationError
from .trajectory import PiecewiseTrajectory, SegmentPolynomial

#: Maximum acceptable relative KKT residual before a solve is rejected.
KKT_RESIDUAL_TOLERANCE = 1e-8

#: Maximum acceptable absolute violation of any constraint row.
CONSTRAINT_TOLERANCE = 1e-6

DEFAULT_ORDER = 5
MAX_ORDER = 9


def default_continuity_order(order: int) -> int:
    """Joint continuity enforced by default for a given polynomial order.

    Quintics keep position/velocity/acceleration continuity; from order 7 up
    there are enough coefficients to also match jerk and snap.
    """
    return 4 if order >= 7 else 2


@dataclass(frozen=True)
class CostWeights:
    """Nonnegative weight per derivative order in the integral cost.

    ``values[s]`` multiplies the integral of the squared s-th derivative.
    """

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ValidationError("cost weights are empty")
        if any(v < 0.0 for v in values):
            raise ValidationError("cost weights must be nonnegative")
        if not any(v > 0.0 for v in values):
            raise ValidationError("at least one cost weight must be positive")
        object.__setattr__(self, "values", values)

    @classmethod
    def min_jerk(cls) -> "CostWeights":
        return cls((0.0, 0.0, 0.0, 1.0))

    @classmethod
    def min_snap(cls) -> "CostWeights":
        return cls((0.0, 0.0, 0.0, 0.0, 1.0))

    @classmethod
    def preset(cls, name: str) -> "CostWeights":
        try:
            return {"jerk": cls.min_jerk, "snap": cls.min_snap}[name]()
        except KeyError:
            raise ValidationError(f"unknown weight preset {name!r}; choose 'jerk' or 'snap'") from None

    @property
    def dominant_order(self) -> int:
        """Highest derivative order carrying a positive weight."""
        return max(s for s, v in enumerate(self.values) if v > 0.0)

    @property
    def label(self) -> str:
        if self.values == CostWeights.min_jerk().values:
            return "jerk"
        if self.values == CostWeights.min_snap().values:
            return "snap"
        return "custom"


def build_cost_matrix(order: int, weights: CostWeights, duration: float) -> np.ndarray:
    """Closed-form cost matrix Q with p^T Q p = integral of the weighted cost.

    Entry (i, j) for a single weight on derivative s is
    c_s * i!/(i-s)! * j!/(j-s)! * tau^(i+j-2s+1) / (i+j-2s+1) for i, j >= s
    and zero otherwise; multiple weights accumulate.
    """
    if not (duration > 0.0):
        raise ValidationError(f"segment duration must be > 0, got {duration}")
    if weights.dominant_order > order:
        raise ValidationError(
            f"cost weights reach derivative {weights.dominant_order}, above polynomial order {order}"
        )
    n = order + 1
    q = np.zeros((n, n))
    for s, weight in enumerate(weights.values):
        if weight == 0.0:
            continue
        for i in range(s, n):
            fi = factorial(i) // factorial(i - s)
            for j in range(s, n):
                fj = factorial(j) // factorial(j - s)
                power = i + j - 2 * s + 1
                q[i, j] += weight * fi * fj * duration**power / power
    return q


def basis_row(order: int, derivative: int, t: float) -> np.ndarray:
    """Row vector r with r . c = the ``derivative``-th derivative of P at t."""
    row = np.zeros(order + 1)
    for i in range(derivative, order + 1):
        row[i] = factorial(i) / factorial(i - derivative) * t ** (i - derivative)
    return row


@dataclass(frozen=True)
class Pin:
    """Fix one derivative at one end of one segment to explicit values."""

    segment: int
    boundary: str  # "start" | "end"
    order: int
    values: tuple[float, ...]  # one target per axis


@dataclass(frozen=True)
class Joint:
    """Require derivative continuity between segment and segment + 1."""

    segment: int
    order: int


@dataclass
class ConstraintSet:
    """Equality constraints of the coefficient QP, structure plus targets.

    Pins carry per-axis target values; joints are homogeneous. The numeric
    matrices depend on the segment durations and are emitted on demand.
    """

    segment_count: int
    order: int
    axis_count: int = 3
    pins: list[Pin] = field(default_factory=list)
    joints: list[Joint] = field(default_factory=list)

    def add_pin(self, segment: int, boundary: str, order: int, values) -> None:
        if boundary not in ("start", "end"):
            raise ValidationError(f"pin boundary must be 'start' or 'end', got {boundary!r}")
        if not (0 <= segment < self.segment_count):
            raise ValidationError(f"pin segment {segment} out of range")
        if not (0 <= order <= self.order):
            raise ValidationError(f"pin derivative {order} above polynomial order {self.order}")
        key = (segment, boundary, order)
        if any((p.segment, p.boundary, p.order) == key for p in self.pins):
            raise ValidationError(
                f"duplicate pin on segment {segment} {boundary} derivative {order}"
            )
        values = tuple(float(v) for v in np.atleast_1d(values))
        if len(values) != self.axis_count:
            raise ValidationError(f"pin needs {self.axis_count} target values, got {len(values)}")
        self.pins.append(Pin(segment, boundary, order, values))

    def add_joint(self, segment: int, order: int) -> None:
        if not (0 <= segment < self.segment_count - 1):
            raise ValidationError(f"joint segment {segment} out of range")
        self.joints.append(Joint(segment, order))

    @property
    def row_count(self) -> int:
        return len(self.pins) + len(self.joints)

    def matrices(self, durations: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Numeric (A, B) with A p_axis = B[:, axis] for each axis."""
        durations = np.asarray(durations, dtype=float)
        if durations.shape != (self.segment_count,):
            raise ValidationError(
                f"expected {self.segment_count} durations, got shape {durations.shape}"
            )
        n = self.order + 1
        a = np.zeros((self.row_count, self.segment_count * n))
        b = np.zeros((self.row_count, self.axis_count))
        for r, pin in enumerate(self.pins):
            t = durations[pin.segment] if pin.boundary == "end" else 0.0
            a[r, pin.segment * n : (pin.segment + 1) * n] = basis_row(self.order, pin.order, t)
            b[r] = pin.values
        offset = len(self.pins)
        for r, joint in enumerate(self.joints, start=offset):
            k = joint.segment
            a[r, k * n : (k + 1) * n] = basis_row(self.order, joint.order, durations[k])
            a[r, (k + 1) * n : (k + 2) * n] = -basis_row(self.order, joint.order, 0.0)
        return a, b


def assemble_constraints(
    course: WaypointCourse,
    segment_count: int,
    order: int,
    continuity_order: int,
) -> ConstraintSet:
    """Build the constraint set tying a course to a K-segment polynomial chain.

    The first and last waypoints pin derivatives 0..continuity_order (zero
    velocity/acceleration unless the course overrides them, zero above
    order 2). Interior waypoints pin position on both adjoining segments and
    add continuity rows for derivatives 1..continuity_order. Interior
    derivatives stay free.

    Raises:
        ValidationError: if the course does not have segment_count + 1
            waypoints, the continuity order is too high for the polynomial
            order, or a waypoint pushes the row count past the unknowns.
    """
    if course.waypoint_count != segment_count + 1:
        raise ValidationError(
            f"course has {course.waypoint_count} waypoints; {segment_count} segments need "
            f"{segment_count + 1}"
        )
    if not (0 <= continuity_order < order):
        raise ValidationError(
            f"continuity order {continuity_order} must lie in [0, polynomial order {order})"
        )

    axis_count = 4 if course.has_yaw else 3
    cs = ConstraintSet(segment_count, order, axis_count)
    unknowns = segment_count * (order + 1)

    def targets(position: np.ndarray, yaw_value: float | None) -> tuple:
        if axis_count == 3:
            return tuple(position)
        return tuple(position) + (0.0 if yaw_value is None else float(yaw_value),)

    def check_budget(waypoint: int) -> None:
        if cs.row_count > unknowns:
            raise ValidationError(
                f"waypoint {waypoint} over-constrains the system "
                f"({cs.row_count} rows > {unknowns} unknowns per axis)"
            )

    yaw = course.yaw if course.has_yaw else None
    last = segment_count

    cs.add_pin(0, "start", 0, targets(course.waypoints[0], None if yaw is None else yaw[0]))
    for s in range(1, continuity_order + 1):
        cs.add_pin(0, "start", s, targets(course.boundary_derivative("start", s), 0.0))
    check_budget(0)

    for w in range(1, segment_count):
        position = targets(course.waypoints[w], None if yaw is None else yaw[w])
        cs.add_pin(w - 1, "end", 0, position)
        cs.add_pin(w, "start", 0, position)
        for s in range(1, continuity_order + 1):
            cs.add_joint(w - 1, s)
        check_budget(w)

    cs.add_pin(last - 1, "end", 0, targets(course.waypoints[last], None if yaw is None else yaw[last]))
    for s in range(1, continuity_order + 1):
        cs.add_pin(last - 1, "end", s, targets(course.boundary_derivative("end", s), 0.0))
    check_budget(last)

    return cs


def _block_cost(order: int, weights: CostWeights, durations: np.ndarray) -> np.ndarray:
    n = order + 1
    q = np.zeros((len(durations) * n, len(durations) * n))
    for k, tau in enumerate(durations):
        q[k * n : (k + 1) * n, k * n : (k + 1) * n] = build_cost_matrix(order, weights, tau)
    return q


def solve_smooth(
    course: WaypointCourse,
    durations,
    weights: CostWeights,
    *,
    order: int = DEFAULT_ORDER,
    continuity_order: int | None = None,
    method: str = "fixed-time",
) -> PiecewiseTrajectory:
    """Solve the fixed-time smoothness QP and return the trajectory.

    Minimizes p^T diag(Q_1..Q_K) p per axis subject to the assembled
    equality constraints, via the KKT system

        [2Q  A^T] [p     ]   [0]
        [A    0 ] [lambda] = [b]

    factored once (LU with partial pivoting, one refinement pass) and applied
    to every axis. The solve is rejected if the constraint matrix is row-rank
    deficient, the relative KKT residual exceeds 1e-8, or any constraint row
    is violated by more than 1e-6.

    Args:
        course: waypoints and boundary derivatives.
        durations: segment durations, one per waypoint gap, all > 0.
        weights: derivative weights of the integral cost.
        order: polynomial order N (default 5, maximum 9).
        continuity_order: joint continuity; defaults by order.
        method: tag stored on the returned trajectory.

    Raises:
        ValidationError: inconsistent inputs or redundant constraints.
        NumericalError: singular or badly conditioned KKT system.
    """
    durations = np.asarray(durations, dtype=float)
    if durations.ndim != 1 or durations.size == 0:
        raise ValidationError("durations must be a non-empty 1-D sequence")
    if np.any(durations <= 0.0) or not np.all(np.isfinite(durations)):
        raise ValidationError(f"all durations must be finite and > 0, got {durations.tolist()}")
    if not (1 <= order <= MAX_ORDER):
        raise ValidationError(f"polynomial order must be in [1, {MAX_ORDER}], got {order}")
    if continuity_order is None:
        continuity_order = default_continuity_order(order)

    k_segments = durations.size
    cs = assemble_constraints(course, k_segments, order, continuity_order)
    a, b = cs.matrices(durations)

    # Rank check on row-normalized A: redundant rows are a modeling error and
    # are rejected rather than silently dropped.
    norms = np.linalg.norm(a, axis=1)
    if np.any(norms == 0.0) or np.linalg.matrix_rank(a / norms[:, None]) < a.shape[0]:
        raise ValidationError("constraint system is row-rank deficient (redundant rows)")

    n_var = k_segments * (order + 1)
    n_rows = a.shape[0]
    q = _block_cost(order, weights, durations)

    kkt = np.zeros((n_var + n_rows, n_var + n_rows))
    kkt[:n_var, :n_var] = 2.0 * q
    kkt[:n_var, n_var:] = a.T
    kkt[n_var:, :n_var] = a
    rhs = np.zeros((n_var + n_rows, cs.axis_count))
    rhs[n_var:] = b

    try:
        lu, piv = scipy.linalg.lu_factor(kkt)
        solution = scipy.linalg.lu_solve((lu, piv), rhs)
        solution += scipy.linalg.lu_solve((lu, piv), rhs - kkt @ solution)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(
            f"KKT factorization failed: {exc} (cond ~ {np.linalg.cond(kkt):.2e})",
            durations=durations,
        ) from exc
    if not np.all(np.isfinite(solution)):
        raise NumericalError(
            f"singular KKT system (cond ~ {np.linalg.cond(kkt):.2e})", durations=durations
        )

    p = solution[:n_var]
    lam = solution[n_var:]
    _check_residuals(q, a, b, p, lam, durations)

    n = order + 1
    segments = []
    for k, tau in enumerate(durations):
        block = p[k * n : (k + 1) * n]
        yaw_coeffs = block[:, 3] if cs.axis_count == 4 else None
        segments.append(SegmentPolynomial(block[:, :3].T, tau, yaw_coefficients=yaw_coeffs))
    return PiecewiseTrajectory(
        segments=tuple(segments),
        minimized_order=weights.dominant_order,
        method=method,
        continuity_order=continuity_order,
    )


def _check_residuals(q, a, b, p, lam, durations) -> None:
    grad = 2.0 * (q @ p)
    pull = a.T @ lam
    stationarity = grad + pull
    scale = max(np.linalg.norm(grad), np.linalg.norm(pull), 1e-30)
    worst_axis = int(np.argmax(np.linalg.norm(stationarity, axis=0)))
    if np.linalg.norm(stationarity) / scale > KKT_RESIDUAL_TOLERANCE:
        raise NumericalError(
            f"KKT stationarity residual {np.linalg.norm(stationarity) / scale:.2e} on axis "
            f"{worst_axis} (cond ~ {_cond_estimate(q, a):.2e})",
            durations=durations,
        )
    violation = np.abs(a @ p - b)
    if violation.size and violation.max() > CONSTRAINT_TOLERANCE:
        axis = int(np.argmax(violation.max(axis=0)))
        raise NumericalError(
            f"constraint violation {violation.max():.2e} on axis {axis} "
            f"(cond ~ {_cond_estimate(q, a):.2e})",
            durations=durations,
        )


def _cond_estimate(q: np.ndarray, a: np.ndarray) -> float:
    n_var = q.shape[0]
    kkt = np.zeros((n_var + a.shape[0], n_var + a.shape[0]))
    kkt[:n_var, :n_var] = 2.0 * q
    kkt[:n_var, n_var:] = a.T
    kkt[n_var:, :n_var] = a
    return float(np.linalg.cond(kkt))


def trajectory_cost(trajectory: PiecewiseTrajectory, weights: CostWeights) -> float:
    """Integral smoothness cost of an existing trajectory (position axes)."""
    total = 0.0
    for seg in trajectory.segments:
        q = build_cost_matrix(seg.order, weights, seg.duration)
        for axis in range(3):
            c = seg.coefficients[axis]
            total += float(c @ q @ c)
    return total
