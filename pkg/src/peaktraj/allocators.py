"""Segment-time allocation baselines.

Three ways to pick how long each segment lasts: a distance-proportional
initial guess, constrained gradient descent on the smoothness cost at fixed
total time, and unconstrained descent on smoothness plus a price on total
time. Both descents probe the cost by finite differences, re-solving the
coefficient QP at every probe, and use backtracking line search so the
accepted cost sequence never increases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .course import WaypointCourse
from .errors import NumericalError, ValidationError
from .qp import DEFAULT_ORDER, CostWeights, solve_smooth, trajectory_cost

MIN_DURATION = 1e-3
MAX_BACKTRACKS = 20


@dataclass(frozen=True)
class AllocatorConfig:
    """Shared knobs of the gradient-descent allocators.

    Attributes:
        total_time: fixed total time for the constrained allocator; defaults
            to the sum of the initial durations.
        time_penalty: cost per second of total time (the unconstrained
            allocator's trade-off knob).
        fd_step: finite-difference step in seconds; defaults to 1e-4 x total.
        step_size: initial line-search step as a fraction of total time.
        backtrack_factor: step multiplier on each rejected line-search probe.
        max_iterations: outer descent iteration cap.
        tolerance: stop once the relative cost decrease drops below this.
        min_duration: hard floor on every segment time.
    """

    total_time: float | None = None
    time_penalty: float = 0.0
    fd_step: float | None = None
    step_size: float = 0.1
    backtrack_factor: float = 0.5
    max_iterations: int = 60
    tolerance: float = 1e-6
    min_duration: float = MIN_DURATION

    def __post_init__(self) -> None:
        if self.total_time is not None and not (self.total_time > 0.0):
            raise ValidationError(f"total time must be > 0, got {self.total_time}")
        if self.time_penalty < 0.0:
            raise ValidationError(f"time penalty must be >= 0, got {self.time_penalty}")
        if self.fd_step is not None and not (self.fd_step > 0.0):
            raise ValidationError(f"finite-difference step must be > 0, got {self.fd_step}")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if not (0.0 < self.backtrack_factor < 1.0):
            raise ValidationError("backtrack_factor must lie in (0, 1)")
        if not (self.step_size > 0.0):
            raise ValidationError("step_size must be > 0")
        if not (self.min_duration > 0.0):
            raise ValidationError("min_duration must be > 0")


def initial_guess(course: WaypointCourse, total_time: float) -> np.ndarray:
    """Split a total time across segments proportionally to segment length.

    The last entry absorbs float rounding so the durations sum to the total
    exactly.
    """
    if not (total_time > 0.0):
        raise ValidationError(f"total time must be > 0, got {total_time}")
    distances = course.distances()
    durations = total_time * distances / distances.sum()
    durations[-1] = total_time - durations[:-1].sum()
    return durations


def _cost(course, durations, weights, order, config) -> float:
    try:
        trajectory = solve_smooth(course, durations, weights, order=order)
    except NumericalError as exc:
        if exc.durations is None:
            exc.durations = tuple(float(t) for t in durations)
        raise
    return trajectory_cost(trajectory, weights)


def mellinger_descent(
    course: WaypointCourse,
    durations,
    weights: CostWeights,
    config: AllocatorConfig | None = None,
    *,
    order: int = DEFAULT_ORDER,
) -> np.ndarray:
    """Redistribute segment times at fixed total time to reduce the cost.

    Directional derivatives are probed along the sum-preserving directions
    u_i = e_i - 1/(K-1) elsewhere, and the step is the negative gradient
    assembled from them, so every accepted iterate keeps the total time and
    the per-segment floor intact. A single segment has no feasible direction
    and is returned unchanged.
    """
    config = config or AllocatorConfig()
    tau = np.asarray(durations, dtype=float).copy()
    k = tau.size
    if k == 1:
        return tau
    total = tau.sum()
    if config.total_time is not None and abs(total - config.total_time) > 1e-9 * config.total_time:
        raise ValidationError(
            f"initial durations sum to {total}, configured total time is {config.total_time}"
        )
    h = config.fd_step if config.fd_step is not None else 1e-4 * total

    # Sum-preserving probe directions, one per segment.
    probes = np.full((k, k), -1.0 / (k - 1))
    np.fill_diagonal(probes, 1.0)

    cost = _cost(course, tau, weights, order, config)
    for _ in range(config.max_iterations):
        gradient = np.empty(k)
        for i in range(k):
            gradient[i] = (_cost(course, tau + h * probes[i], weights, order, config) - cost) / h
        direction = -gradient @ probes
        norm = np.linalg.norm(direction)
        if norm == 0.0:
            break
        direction /= norm

        step = config.step_size * total
        accepted = False
        for _ in range(MAX_BACKTRACKS + 1):
            candidate = tau + step * direction
            if candidate.min() >= config.min_duration:
                new_cost = _cost(course, candidate, weights, order, config)
                if new_cost < cost:
                    decrease = (cost - new_cost) / cost
                    tau, cost, accepted = candidate, new_cost, True
                    break
            step *= config.backtrack_factor
        if not accepted or decrease < config.tolerance:
            break
    return tau


def bry_descent(
    course: WaypointCourse,
    durations,
    weights: CostWeights,
    time_penalty: float,
    config: AllocatorConfig | None = None,
    *,
    order: int = DEFAULT_ORDER,
) -> np.ndarray:
    """Descend on smoothness cost plus ``time_penalty`` x total time.

    Unconstrained except for the per-segment floor: a zero penalty inflates
    the times (smoothness always improves with more time), a huge one drives
    every segment to the floor.
    """
    config = config or AllocatorConfig()
    if time_penalty < 0.0:
        raise ValidationError(f"time penalty must be >= 0, got {time_penalty}")
    tau = np.asarray(durations, dtype=float).copy()
    k = tau.size
    h = config.fd_step if config.fd_step is not None else 1e-4 * tau.sum()

    def objective(t: np.ndarray) -> float:
        return _cost(course, t, weights, order, config) + time_penalty * t.sum()

    value = objective(tau)
    for _ in range(config.max_iterations):
        gradient = np.empty(k)
        for i in range(k):
            probe = tau.copy()
            probe[i] += h
            gradient[i] = (objective(probe) - value) / h
        norm = np.linalg.norm(gradient)
        if norm == 0.0:
            break
        direction = -gradient / norm

        step = config.step_size * tau.sum()
        accepted = False
        for _ in range(MAX_BACKTRACKS + 1):
            candidate = np.maximum(tau + step * direction, config.min_duration)
            new_value = objective(candidate)
            if new_value < value:
                decrease = (value - new_value) / abs(value)
                tau, value, accepted = candidate, new_value, True
                break
            step *= config.backtrack_factor
        if not accepted or decrease < config.tolerance:
            break
    return tau
