"""Waypoint courses: the geometric input to every trajectory solve."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

#: Consecutive waypoints closer than this (meters) are treated as coincident.
COINCIDENT_TOLERANCE = 1e-9


def _frozen_array(value, shape, what: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.shape != shape:
        raise ValidationError(f"{what} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what} contains non-finite values")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class WaypointCourse:
    """Ordered 3-D waypoints with optional fixed boundary derivatives.

    Attributes:
        waypoints: (M, 3) positions in meters, M >= 2.
        yaw: optional (M,) yaw angles in radians; carried through to the
            generated trajectory but never limited or optimized.
        start_velocity / start_acceleration: fixed derivatives at the first
            waypoint. ``None`` pins them to zero (start at rest).
        end_velocity / end_acceleration: same for the last waypoint.
        name: free-form label echoed into reports.
    """

    waypoints: np.ndarray
    yaw: np.ndarray | None = None
    start_velocity: np.ndarray | None = None
    start_acceleration: np.ndarray | None = None
    end_velocity: np.ndarray | None = None
    end_acceleration: np.ndarray | None = None
    name: str = ""

    def __post_init__(self) -> None:
        pts = np.array(self.waypoints, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValidationError(f"waypoints must be an (M, 3) array, got shape {pts.shape}")
        if pts.shape[0] < 2:
            raise ValidationError("a course needs at least 2 waypoints")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("waypoints contain non-finite values")
        steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        for i, d in enumerate(steps):
            if d <= COINCIDENT_TOLERANCE:
                raise ValidationError(f"waypoints {i} and {i + 1} coincident")
        pts.flags.writeable = False
        object.__setattr__(self, "waypoints", pts)

        if self.yaw is not None:
            object.__setattr__(self, "yaw", _frozen_array(self.yaw, (pts.shape[0],), "yaw"))
        for field in ("start_velocity", "start_acceleration", "end_velocity", "end_acceleration"):
            value = getattr(self, field)
            if value is not None:
                object.__setattr__(self, field, _frozen_array(value, (3,), field))

    @property
    def waypoint_count(self) -> int:
        return self.waypoints.shape[0]

    @property
    def segment_count(self) -> int:
        return self.waypoints.shape[0] - 1

    @property
    def has_yaw(self) -> bool:
        return self.yaw is not None

    def distances(self) -> np.ndarray:
        """Euclidean distance between each pair of consecutive waypoints."""
        return np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1)

    def boundary_derivative(self, end: str, order: int) -> np.ndarray:
        """Pinned derivative value (3-vector) at the first or last waypoint.

        Velocity and acceleration default to zero unless the course fixes
        them explicitly; orders above 2 are always pinned to zero.
        """
        if end == "start":
            value = {1: self.start_velocity, 2: self.start_acceleration}.get(order)
        else:
            value = {1: self.end_velocity, 2: self.end_acceleration}.get(order)
        return np.zeros(3) if value is None else np.asarray(value, dtype=float)
