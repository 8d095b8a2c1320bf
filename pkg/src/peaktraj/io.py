"""Course files, sample export, and report serialization.

Courses are JSON documents with a flat, hand-writable schema; samples go to
CSV with fixed 17-significant-digit formatting; reports and traces go to
JSON with a stable key order so identical runs produce identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .course import WaypointCourse
from .errors import ValidationError
from .feasibility import STANDARD_GRAVITY, MotionLimits, PeakReport
from .peak import ComparisonReport, IterationTrace, MethodResult
from .trajectory import PiecewiseTrajectory

SCHEMA_VERSION = 1

SAMPLE_COLUMNS = (
    "t,x,y,z,vx,vy,vz,ax,ay,az,jx,jy,jz,sx,sy,sz,"
    "v_norm,a_norm_gravity_corrected,j_norm,s_norm"
)

_COURSE_KEYS = {"name", "waypoints", "limits", "order", "preset"}
_WAYPOINT_KEYS = {"position", "yaw", "velocity", "acceleration"}
_LIMIT_KEYS = {"velocity", "acceleration", "jerk", "snap", "gravity"}


@dataclass(frozen=True)
class CourseDocument:
    """A parsed course file: the course plus its optional run defaults."""

    course: WaypointCourse
    limits: MotionLimits | None = None
    order: int | None = None
    preset: str | None = None


def _vector(value, length: int, where: str) -> list[float]:
    if not isinstance(value, (list, tuple)) or len(value) != length:
        raise ValidationError(f"{where} must be a list of {length} numbers")
    try:
        return [float(v) for v in value]
    except (TypeError, ValueError):
        raise ValidationError(f"{where} must contain only numbers") from None


def parse_course(data: bytes | str) -> CourseDocument:
    """Parse and validate a course file.

    Unknown keys are rejected with their location; syntax errors carry the
    line and column from the JSON decoder.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc

    if not isinstance(doc, dict):
        raise ValidationError("course file must be a JSON object")
    unknown = set(doc) - _COURSE_KEYS
    if unknown:
        raise ValidationError(f"unknown top-level key {sorted(unknown)[0]!r}")
    raw_waypoints = doc.get("waypoints")
    if not isinstance(raw_waypoints, list) or len(raw_waypoints) < 2:
        raise ValidationError("'waypoints' must be a list of at least 2 entries")

    positions: list[list[float]] = []
    yaws: list[float | None] = []
    endpoint_state: dict[str, np.ndarray] = {}
    last = len(raw_waypoints) - 1
    for i, entry in enumerate(raw_waypoints):
        if isinstance(entry, dict):
            bad = set(entry) - _WAYPOINT_KEYS
            if bad:
                raise ValidationError(f"waypoint {i}: unknown key {sorted(bad)[0]!r}")
            if "position" not in entry:
                raise ValidationError(f"waypoint {i}: missing 'position'")
            positions.append(_vector(entry["position"], 3, f"waypoint {i} position"))
            yaws.append(float(entry["yaw"]) if "yaw" in entry else None)
            for key, prefix in (("velocity", "velocity"), ("acceleration", "acceleration")):
                if key in entry:
                    if i not in (0, last):
                        raise ValidationError(
                            f"waypoint {i}: fixed {key} is only allowed at the endpoints"
                        )
                    end = "start" if i == 0 else "end"
                    endpoint_state[f"{end}_{prefix}"] = np.array(
                        _vector(entry[key], 3, f"waypoint {i} {key}")
                    )
        else:
            positions.append(_vector(entry, 3, f"waypoint {i}"))
            yaws.append(None)

    yaw_given = [y for y in yaws if y is not None]
    if yaw_given and len(yaw_given) != len(yaws):
        raise ValidationError("yaw must be given on every waypoint or none")
    course = WaypointCourse(
        waypoints=np.array(positions),
        yaw=np.array(yaws, dtype=float) if yaw_given else None,
        name=str(doc.get("name", "")),
        **endpoint_state,
    )

    limits = None
    if "limits" in doc:
        raw = doc["limits"]
        if not isinstance(raw, dict):
            raise ValidationError("'limits' must be an object")
        bad = set(raw) - _LIMIT_KEYS
        if bad:
            raise ValidationError(f"limits: unknown key {sorted(bad)[0]!r}")
        missing = {"velocity", "acceleration", "jerk", "snap"} - set(raw)
        if missing:
            raise ValidationError(f"limits: missing key {sorted(missing)[0]!r}")
        limits = MotionLimits(
            velocity=float(raw["velocity"]),
            acceleration=float(raw["acceleration"]),
            jerk=float(raw["jerk"]),
            snap=float(raw["snap"]),
            gravity=float(raw.get("gravity", STANDARD_GRAVITY)),
        )

    order = None
    if "order" in doc:
        if not isinstance(doc["order"], int):
            raise ValidationError("'order' must be an integer")
        order = doc["order"]
    preset = None
    if "preset" in doc:
        if doc["preset"] not in ("jerk", "snap"):
            raise ValidationError(f"'preset' must be 'jerk' or 'snap', got {doc['preset']!r}")
        preset = doc["preset"]
    return CourseDocument(course=course, limits=limits, order=order, preset=preset)


def serialize_course(document: CourseDocument) -> str:
    """Inverse of :func:`parse_course`, losslessly."""
    course = document.course
    waypoints = []
    last = course.waypoint_count - 1
    for i, position in enumerate(course.waypoints):
        entry: dict = {"position": [float(v) for v in position]}
        if course.has_yaw:
            entry["yaw"] = float(course.yaw[i])
        if i == 0:
            if course.start_velocity is not None:
                entry["velocity"] = [float(v) for v in course.start_velocity]
            if course.start_acceleration is not None:
                entry["acceleration"] = [float(v) for v in course.start_acceleration]
        if i == last:
            if course.end_velocity is not None:
                entry["velocity"] = [float(v) for v in course.end_velocity]
            if course.end_acceleration is not None:
                entry["acceleration"] = [float(v) for v in course.end_acceleration]
        if set(entry) == {"position"}:
            waypoints.append(entry["position"])
        else:
            waypoints.append(entry)
    doc: dict = {"name": course.name, "waypoints": waypoints}
    if document.limits is not None:
        lim = document.limits
        doc["limits"] = {
            "velocity": lim.velocity,
            "acceleration": lim.acceleration,
            "jerk": lim.jerk,
            "snap": lim.snap,
            "gravity": lim.gravity,
        }
    if document.order is not None:
        doc["order"] = document.order
    if document.preset is not None:
        doc["preset"] = document.preset
    return json.dumps(doc, indent=2) + "\n"


def export_samples(
    trajectory: PiecewiseTrajectory,
    dt: float,
    destination,
    *,
    gravity: float = STANDARD_GRAVITY,
) -> int:
    """Write the sampled trajectory as CSV and return the sample count.

    One header row, then one row per sample with position, velocity,
    acceleration, jerk, snap, and the norms, gravity-corrected for
    acceleration. 17 significant digits, LF line endings.
    """
    samples = trajectory.sample(dt)
    lines = [SAMPLE_COLUMNS]
    for s in samples:
        thrust = float(
            np.sqrt(
                s.acceleration[0] ** 2
                + s.acceleration[1] ** 2
                + (s.acceleration[2] + gravity) ** 2
            )
        )
        values = (
            [s.time]
            + list(s.position)
            + list(s.velocity)
            + list(s.acceleration)
            + list(s.jerk)
            + list(s.snap)
            + [s.velocity_norm, thrust, s.jerk_norm, s.snap_norm]
        )
        lines.append(",".join(f"{v:.17g}" for v in values))
    Path(destination).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return len(samples)


def trajectory_dict(trajectory: PiecewiseTrajectory) -> dict:
    segments = []
    for seg in trajectory.segments:
        entry = {
            "duration": seg.duration,
            "x": [float(c) for c in seg.coefficients[0]],
            "y": [float(c) for c in seg.coefficients[1]],
            "z": [float(c) for c in seg.coefficients[2]],
        }
        if seg.yaw_coefficients is not None:
            entry["yaw"] = [float(c) for c in seg.yaw_coefficients]
        segments.append(entry)
    return {
        "order": trajectory.order,
        "method": trajectory.method,
        "minimized_order": trajectory.minimized_order,
        "continuity_order": trajectory.continuity_order,
        "total_time": trajectory.total_time,
        "segments": segments,
    }


def peak_report_dict(report: PeakReport) -> dict:
    return {
        "max_kappa": report.max_kappa,
        "limits": {
            "velocity": report.limits.velocity,
            "acceleration": report.limits.acceleration,
            "jerk": report.limits.jerk,
            "snap": report.limits.snap,
            "gravity": report.limits.gravity,
        },
        "segments": [
            {
                "index": seg.index,
                "duration": seg.duration,
                "max_kappa": seg.max_kappa,
                "acceleration_without_gravity": seg.acceleration_without_gravity,
                "peaks": [
                    {
                        "order": p.order,
                        "magnitude": p.magnitude,
                        "time": p.time,
                        "kappa": p.kappa,
                    }
                    for p in seg.peaks
                ],
            }
            for seg in report.segments
        ],
    }


def _trace_entry_dict(entry) -> dict:
    return {
        "iteration": entry.iteration,
        "phase": entry.phase,
        "durations": list(entry.durations),
        "per_segment_max_kappa": list(entry.per_segment_max_kappa),
        "max_kappa": entry.max_kappa,
        "total_time": entry.total_time,
        "feasible": entry.feasible,
    }


def trace_dict(trace: IterationTrace, tail: int | None = None) -> dict:
    entries = trace.entries if tail is None else trace.entries[-tail:]
    return {
        "converged": trace.converged,
        "iterations": len(trace.entries),
        "best_iteration": trace.best_iteration,
        "entries": [_trace_entry_dict(e) for e in entries],
    }


def _method_dict(result: MethodResult) -> dict:
    doc: dict = {"name": result.name}
    if result.error is not None:
        doc["error"] = result.error
        return doc
    doc["total_time"] = result.total_time
    doc["durations"] = list(result.durations)
    doc["max_kappa"] = result.max_kappa
    doc["feasible"] = result.feasible
    if result.converged is not None:
        doc["converged"] = result.converged
    if result.report is not None:
        doc["peaks"] = peak_report_dict(result.report)["segments"]
    return doc


def comparison_dict(report: ComparisonReport) -> dict:
    return {
        "methods": [_method_dict(m) for m in report.methods],
        "total_times": {
            "initial": report.initial.total_time,
            "mellinger": report.mellinger.total_time,
            "peak": report.peak.total_time,
        },
        "reductions_percent": {
            "peak_vs_initial": report.reduction_percent("initial"),
            "peak_vs_mellinger": report.reduction_percent("mellinger"),
        },
    }


def export_report(report, destination, *, kind: str | None = None, extra: dict | None = None) -> None:
    """Serialize a peak report, comparison, or trace to JSON.

    The document is versioned and keys are emitted in a fixed order so two
    identical runs write identical bytes.
    """
    if isinstance(report, PeakReport):
        body = peak_report_dict(report)
        kind = kind or "peak_report"
    elif isinstance(report, ComparisonReport):
        body = comparison_dict(report)
        kind = kind or "comparison"
    elif isinstance(report, IterationTrace):
        body = trace_dict(report)
        kind = kind or "iteration_trace"
    elif isinstance(report, dict):
        body = report
        kind = kind or "report"
    else:
        raise ValidationError(f"cannot serialize report of type {type(report).__name__}")
    doc = {"schema_version": SCHEMA_VERSION, "kind": kind}
    if extra:
        doc.update(extra)
    doc.update(body)
    Path(destination).write_text(
        json.dumps(doc, indent=2, allow_nan=False) + "\n", encoding="utf-8", newline="\n"
    )
