"""Alternating peak optimization of segment times.

The total running time is the only cost; feasibility against the motion
limits is the constraint. The solver alternates two sub-problems: (a) with
segment times fixed, re-solve the smoothness QP for coefficients, and (b)
with coefficients fixed, rescale each segment time from its normalized
derivative peaks so every segment is pushed toward its most restrictive
limit. Iteration stops once each segment's largest peak ratio sits inside
the convergence band around 1.

Two update rules drive step (b). While any peak ratio is far above the band
all times are multiplied by one common factor, shrinking every derivative
without reshaping the path. Otherwise each segment is rescaled by its own
peak ratio and leaks a smaller correction to its immediate neighbors, since
joint continuity couples adjacent segments. Segments already inside the
band are left alone, which keeps the iteration from limit-cycling around
the band edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .allocators import MIN_DURATION, AllocatorConfig, initial_guess, mellinger_descent
from .course import WaypointCourse
from .errors import ConvergenceError, NumericalError, TrajectoryToolError, ValidationError
from .feasibility import MotionLimits, PeakReport, peak_report
from .qp import DEFAULT_ORDER, CostWeights, solve_smooth
from .trajectory import PiecewiseTrajectory

#: Consecutive non-improving uniform rescales tolerated before diverging.
MAX_UNIFORM_STALLS = 2


@dataclass(frozen=True)
class PeakOptimizerConfig:
    """Tuning of the alternating peak optimization.

    Attributes:
        rate_primary: learning rate of a segment's own time update, in (0, 1).
        rate_neighbor: learning rate of the correction leaked to neighbors,
            in [0, rate_primary].
        band: convergence band (lo, hi) around 1 for every segment's largest
            peak ratio; hi - 1 doubles as the feasibility slack.
        max_iterations: outer alternation cap.
        stall_window: stop early if the best feasible total time improves by
            less than ``stall_improvement`` over this many iterations.
        stall_improvement: relative improvement threshold for the stall check.
        min_duration: hard floor on every segment time.
        total_time_guess: total time seeding the initial distance-proportional
            split; defaults to one second per segment.
        order: polynomial order of the underlying smoothness QP.
    """

    rate_primary: float = 0.1
    rate_neighbor: float = 0.05
    band: tuple[float, float] = (0.95, 1.05)
    max_iterations: int = 500
    stall_window: int = 50
    stall_improvement: float = 1e-3
    min_duration: float = MIN_DURATION
    total_time_guess: float | None = None
    order: int = DEFAULT_ORDER

    def __post_init__(self) -> None:
        if not (0.0 < self.rate_primary < 1.0):
            raise ValidationError(f"primary learning rate must be in (0, 1), got {self.rate_primary}")
        if not (0.0 <= self.rate_neighbor <= self.rate_primary):
            raise ValidationError(
                f"neighbor learning rate must be in [0, {self.rate_primary}], got {self.rate_neighbor}"
            )
        lo, hi = self.band
        if not (0.0 < lo < 1.0 < hi):
            raise ValidationError(f"convergence band must satisfy 0 < lo < 1 < hi, got {self.band}")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if self.stall_window < 1:
            raise ValidationError("stall_window must be >= 1")
        if self.total_time_guess is not None and not (self.total_time_guess > 0.0):
            raise ValidationError(f"total time guess must be > 0, got {self.total_time_guess}")


@dataclass(frozen=True)
class TraceEntry:
    """One outer iteration of the peak optimizer."""

    iteration: int
    phase: str  # "uniform-scale" | "per-segment"
    durations: tuple[float, ...]
    per_segment_max_kappa: tuple[float, ...]
    max_kappa: float
    total_time: float
    feasible: bool


@dataclass(frozen=True)
class IterationTrace:
    """Full optimization history plus the outcome flags."""

    entries: tuple[TraceEntry, ...]
    converged: bool
    best_iteration: int | None

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def final(self) -> TraceEntry:
        return self.entries[-1]


def update_segment_times(
    durations,
    report: PeakReport,
    config: PeakOptimizerConfig | None = None,
) -> np.ndarray:
    """One segment-time update from the peak report of the current iterate.

    If the global peak ratio exceeds the band's upper edge, every duration is
    multiplied by the single factor 1 - rate * (1 - max kappa), stretching
    the whole trajectory while preserving its shape. Otherwise each segment
    outside the band applies that factor to its own time and the
    neighbor-rate factor to its existing neighbors. All factors are computed
    from the old state and combined multiplicatively, so the result does not
    depend on segment ordering. Durations never drop below the floor.
    """
    config = config or PeakOptimizerConfig()
    tau = np.asarray(durations, dtype=float)
    kappas = report.per_segment_max
    if kappas.size != tau.size:
        raise ValidationError(
            f"report covers {kappas.size} segments, durations have {tau.size}"
        )
    lo, hi = config.band

    if kappas.max() > hi:
        factor = 1.0 - config.rate_primary * (1.0 - kappas.max())
        return np.maximum(tau * factor, config.min_duration)

    factors = np.ones_like(tau)
    for k, kap in enumerate(kappas):
        if lo <= kap <= hi:
            continue
        factors[k] *= 1.0 - config.rate_primary * (1.0 - kap)
        neighbor = 1.0 - config.rate_neighbor * (1.0 - kap)
        if k > 0:
            factors[k - 1] *= neighbor
        if k + 1 < tau.size:
            factors[k + 1] *= neighbor
    return np.maximum(tau * factors, config.min_duration)


def optimize(
    course: WaypointCourse,
    limits: MotionLimits,
    weights: CostWeights,
    config: PeakOptimizerConfig | None = None,
) -> tuple[PiecewiseTrajectory, IterationTrace]:
    """Minimize total running time subject to the motion limits.

    Starting from a distance-proportional time split, alternate the
    smoothness QP and the peak-driven time update until every segment's
    largest peak ratio lies inside the convergence band, the iteration cap
    is reached, or progress stalls. Among all iterates whose global peak
    ratio stayed within the feasibility slack, the one with the smallest
    total time is returned (the band-converged iterate is not necessarily
    the fastest feasible one seen).

    Returns:
        The fastest feasible trajectory and the full iteration trace.

    Raises:
        ConvergenceError: no feasible iterate within the cap, or uniform
            rescaling repeatedly failed to reduce the worst peak ratio.
    """
    config = config or PeakOptimizerConfig()
    if limits.acceleration <= limits.gravity:  # unreachable via MotionLimits, kept as a guard
        raise ConvergenceError("acceleration limit below gravity: hover is infeasible")
    lo, hi = config.band
    total_guess = config.total_time_guess
    if total_guess is None:
        total_guess = float(course.segment_count)
    tau = initial_guess(course, total_guess)

    entries: list[TraceEntry] = []
    best: tuple[float, int, PiecewiseTrajectory] | None = None
    best_history: list[float] = []
    uniform_stalls = 0
    previous: TraceEntry | None = None
    converged = False

    for iteration in range(config.max_iterations):
        trajectory = solve_smooth(course, tau, weights, order=config.order, method="peak")
        report = peak_report(trajectory, limits)
        kappas = report.per_segment_max
        max_kappa = float(kappas.max())
        total = trajectory.total_time
        feasible = max_kappa <= hi
        phase = "uniform-scale" if max_kappa > hi else "per-segment"
        entry = TraceEntry(
            iteration=iteration,
            phase=phase,
            durations=tuple(float(t) for t in tau),
            per_segment_max_kappa=tuple(float(k) for k in kappas),
            max_kappa=max_kappa,
            total_time=total,
            feasible=feasible,
        )
        entries.append(entry)

        if feasible and (best is None or total <= best[0]):
            best = (total, iteration, trajectory)
        best_history.append(best[0] if best is not None else np.inf)

        if np.all((kappas >= lo) & (kappas <= hi)):
            converged = True
            break

        # A uniform rescale must reduce the worst peak ratio; the QP re-solve
        # reshapes the path nonlinearly, so tolerate a couple of misses.
        if previous is not None and previous.phase == "uniform-scale":
            if max_kappa >= previous.max_kappa:
                uniform_stalls += 1
                if uniform_stalls > MAX_UNIFORM_STALLS:
                    trace = IterationTrace(tuple(entries), False, best[1] if best else None)
                    raise ConvergenceError(
                        "uniform rescaling stopped reducing the worst peak ratio", trace=trace
                    )
            else:
                uniform_stalls = 0

        if len(best_history) > config.stall_window:
            then = best_history[-config.stall_window - 1]
            now = best_history[-1]
            if np.isfinite(then) and (then - now) < config.stall_improvement * then:
                break

        previous = entry
        tau = update_segment_times(tau, report, config)

    trace = IterationTrace(tuple(entries), converged, best[1] if best else None)
    if best is None:
        raise ConvergenceError(
            f"no feasible iterate within {len(entries)} iterations "
            f"(last max kappa {entries[-1].max_kappa:.3f})",
            trace=trace,
        )
    return best[2], trace


def uniform_scale_to_feasibility(
    course: WaypointCourse,
    durations,
    weights: CostWeights,
    limits: MotionLimits,
    config: PeakOptimizerConfig | None = None,
    *,
    method: str = "initial",
    max_iterations: int = 300,
) -> tuple[PiecewiseTrajectory, PeakReport]:
    """Rescale all durations by one repeated factor until the worst peak
    ratio settles inside the convergence band.

    This is the fixed-shape fallback: the trajectory gets uniformly faster
    or slower until its most restrictive limit is just met.
    """
    config = config or PeakOptimizerConfig()
    lo, hi = config.band
    tau = np.asarray(durations, dtype=float).copy()
    for _ in range(max_iterations):
        trajectory = solve_smooth(course, tau, weights, order=config.order, method=method)
        report = peak_report(trajectory, limits)
        worst = report.max_kappa
        if lo <= worst <= hi:
            return trajectory, report
        factor = 1.0 - config.rate_primary * (1.0 - worst)
        tau = np.maximum(tau * factor, config.min_duration)
    raise ConvergenceError(
        f"uniform scaling did not settle into the band within {max_iterations} iterations"
    )


@dataclass(frozen=True)
class MethodResult:
    """Outcome of one allocation method inside a comparison run."""

    name: str
    total_time: float | None = None
    durations: tuple[float, ...] | None = None
    max_kappa: float | None = None
    feasible: bool | None = None
    converged: bool | None = None
    error: str | None = None
    trajectory: PiecewiseTrajectory | None = None
    report: PeakReport | None = None


@dataclass(frozen=True)
class ComparisonReport:
    """Totals and peak summaries of the three allocation methods."""

    initial: MethodResult
    mellinger: MethodResult
    peak: MethodResult

    @property
    def methods(self) -> tuple[MethodResult, ...]:
        return (self.initial, self.mellinger, self.peak)

    def reduction_percent(self, baseline: str) -> float | None:
        """Total-time reduction of the peak method versus a baseline, in %."""
        base = getattr(self, baseline)
        if base.total_time is None or self.peak.total_time is None:
            return None
        return 100.0 * (1.0 - self.peak.total_time / base.total_time)


def _min_feasible_scale(
    course: WaypointCourse,
    ratios: np.ndarray,
    weights: CostWeights,
    limits: MotionLimits,
    config: PeakOptimizerConfig,
    start_total: float,
) -> tuple[PiecewiseTrajectory, PeakReport]:
    """Bisect the total time applied to fixed ratios down to feasibility."""
    hi_edge = config.band[1]

    def feasible(total: float) -> bool:
        try:
            trajectory = solve_smooth(course, ratios * total, weights, order=config.order)
        except NumericalError:
            return False
        return peak_report(trajectory, limits).max_kappa <= hi_edge

    t_feasible = start_total
    growths = 0
    while not feasible(t_feasible):
        t_feasible *= 1.5
        growths += 1
        if growths > 60:
            raise ConvergenceError("no feasible total time found while bracketing")
    t_infeasible = t_feasible / 1.5
    while feasible(t_infeasible):
        t_feasible = t_infeasible
        t_infeasible /= 1.5
        if t_infeasible < 1e-9:
            break

    for _ in range(60):
        if (t_feasible - t_infeasible) <= 1e-9 * t_feasible:
            break
        mid = 0.5 * (t_feasible + t_infeasible)
        if feasible(mid):
            t_feasible = mid
        else:
            t_infeasible = mid

    trajectory = solve_smooth(
        course, ratios * t_feasible, weights, order=config.order, method="mellinger"
    )
    return trajectory, peak_report(trajectory, limits)


def compare_methods(
    course: WaypointCourse,
    limits: MotionLimits,
    weights: CostWeights,
    config: PeakOptimizerConfig | None = None,
    allocator_config: AllocatorConfig | None = None,
) -> ComparisonReport:
    """Benchmark the three time-allocation methods on one course.

    The distance-proportional guess is uniformly rescaled to the feasibility
    band; the fixed-total-time descent is run once for its time distribution
    and that shape is bisected to the smallest feasible total; the peak
    optimizer runs as-is. Failures are captured per method so a partial
    comparison still reports.
    """
    config = config or PeakOptimizerConfig()
    total_guess = config.total_time_guess
    if total_guess is None:
        total_guess = float(course.segment_count)

    def run(name: str, runner) -> MethodResult:
        try:
            trajectory, report, converged = runner()
        except TrajectoryToolError as exc:
            return MethodResult(name=name, error=str(exc))
        return MethodResult(
            name=name,
            total_time=trajectory.total_time,
            durations=tuple(float(t) for t in trajectory.durations),
            max_kappa=report.max_kappa,
            feasible=report.max_kappa <= config.band[1],
            converged=converged,
            trajectory=trajectory,
            report=report,
        )

    def run_initial():
        tau = initial_guess(course, total_guess)
        trajectory, report = uniform_scale_to_feasibility(
            course, tau, weights, limits, config, method="initial"
        )
        return trajectory, report, None

    def run_mellinger():
        tau = initial_guess(course, total_guess)
        alloc = allocator_config or AllocatorConfig()
        shaped = mellinger_descent(course, tau, weights, alloc, order=config.order)
        ratios = shaped / shaped.sum()
        trajectory, report = _min_feasible_scale(
            course, ratios, weights, limits, config, start_total=float(shaped.sum())
        )
        return trajectory, report, None

    def run_peak():
        trajectory, trace = optimize(course, limits, weights, config)
        return trajectory, peak_report(trajectory, limits), trace.converged

    return ComparisonReport(
        initial=run("initial", run_initial),
        mellinger=run("mellinger", run_mellinger),
        peak=run("peak", run_peak),
    )
