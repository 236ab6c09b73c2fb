"""Deterministic bounded-delay coordinate descent.

Runs the analyzed algorithm exactly: coordinates sampled with replacement,
gradients evaluated at an earlier iterate x_{k(j)} with j - k(j) <= tau,
and only coordinate i(j) written at each step.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.linalg

from asyscd import kernels, rng
from asyscd.errors import DelayBoundError, DiagnosticError, ProblemSizeError, UsageError
from asyscd.models import (
    DelaySchedule,
    RateEnvelope,
    RatioBand,
    Regime,
    ScheduleKind,
    StepPlan,
    Trace,
    TracePoint,
)
from asyscd.problem import (
    QuadraticProblem,
    as_point,
    compute_lipschitz,
    full_prox_step,
    gradient,
    objective,
    project,
    residual,
    residual_from_gradient,
)
from asyscd.theory import evaluate_envelope

logger = logging.getLogger(__name__)

MIN_RATIO_SEEDS = 30
REFERENCE_TOLERANCE = 1e-10
REFERENCE_MAX_EPOCHS = 50000
LSTSQ_LIMIT = 5000


class IterateHistory:
    """Ring buffer holding the last tau + 1 iterates x_{j-tau}, ..., x_j"""

    def __init__(self, x0: np.ndarray, tau: int):
        self.tau = tau
        self.buffer = np.empty((tau + 1, x0.shape[0]))
        self.buffer[0] = x0
        self.j = 0

    def lookup(self, k: int) -> np.ndarray:
        if not max(0, self.j - self.tau) <= k <= self.j:
            raise IndexError(f"iterate {k} is not held at step {self.j} with tau={self.tau}")
        return self.buffer[k % (self.tau + 1)]

    @property
    def current(self) -> np.ndarray:
        return self.buffer[self.j % (self.tau + 1)]


# Delay schedules
def schedule_lags(schedule: DelaySchedule, steps: int, run_seed: int = 0) -> np.ndarray:
    """Lag j - k(j) for steps 0..steps-1, validated against the schedule's tau"""
    j = np.arange(steps, dtype=np.int64)
    tau = schedule.tau
    if schedule.kind == ScheduleKind.ZERO:
        lags = np.zeros(steps, dtype=np.int64)
    elif schedule.kind == ScheduleKind.FIXED_TAU:
        # tau + 1 readers share one snapshot and write in turn
        lags = j % (tau + 1)
    elif schedule.kind == ScheduleKind.ADVERSARIAL:
        lags = np.minimum(j, tau)
    elif schedule.kind == ScheduleKind.RANDOM_UNIFORM:
        seed = run_seed if schedule.seed is None else schedule.seed
        u = rng.uniform(seed, rng.DELAYS, steps)
        lags = np.floor(u * (np.minimum(j, tau) + 1)).astype(np.int64)
    else:
        if len(schedule.lags) < steps:
            raise UsageError(
                f"replay schedule holds {len(schedule.lags)} lags but the run needs {steps}; "
                "record a longer pattern or shorten the run"
            )
        lags = np.asarray(schedule.lags[:steps], dtype=np.int64)
    check_lags(lags, tau)
    return lags


def check_lags(lags: np.ndarray, tau: int) -> None:
    j = np.arange(lags.shape[0], dtype=np.int64)
    bad = np.flatnonzero((lags < 0) | (lags > np.minimum(j, tau)))
    if bad.size:
        step = int(bad[0])
        raise DelayBoundError(step, int(lags[step]), tau)


def coordinate_stream(seed: int, n: int, steps: int) -> np.ndarray:
    """i(j) for j = 0..steps-1, uniform over the n coordinates"""
    return rng.integers(seed, rng.COORDINATES, np.arange(steps, dtype=np.uint64), n)


def _checkpoints(steps: int, stride: int) -> List[int]:
    marks = list(range(0, steps, stride))
    if marks[-1] != steps:
        marks.append(steps)
    return marks


def _trace_point(p: QuadraticProblem, x: np.ndarray, j: int, measure: Optional[float]) -> TracePoint:
    g = gradient(p, x)
    f = objective(p, x)
    gap = None if p.optimum_hint is None else f - p.optimum_hint
    dist_sq = None
    if p.solution_hint is not None:
        dist_sq = float(np.sum((x - p.solution_hint) ** 2))
    return TracePoint(
        j=j, epoch=j / p.n, residual=residual_from_gradient(p, x, g), objective=f, gap=gap,
        dist_sq=dist_sq, measure=measure,
    )


def _step_measure(p: QuadraticProblem, plan: StepPlan, x_read: np.ndarray, x_current: np.ndarray) -> float:
    """|grad f(x_j)|^2 unconstrained, |x_j - xbar_{j+1}|^2 constrained"""
    if plan.regime == Regime.UNCONSTRAINED:
        return float(np.sum(gradient(p, x_current) ** 2))
    x_bar = full_prox_step(p, x_read, x_current, plan.gamma, plan.l_max)
    return float(np.sum((x_current - x_bar) ** 2))


def run(p: QuadraticProblem, plan: StepPlan, schedule: DelaySchedule, x0, iterations: int,
        seed: int = 0, stride: Optional[int] = None) -> Tuple[np.ndarray, Trace]:
    """Execute iterations + 1 delayed coordinate updates from x0"""
    if iterations < 0:
        raise UsageError(f"iteration count must be nonnegative, got {iterations}")
    if schedule.tau > plan.tau:
        raise UsageError(f"schedule tau={schedule.tau} exceeds the plan's tau={plan.tau}")
    stride = stride or p.n
    steps = iterations + 1
    x0 = project(p.region, as_point(x0, p.n))
    lags = schedule_lags(schedule, steps, seed)
    coords = coordinate_stream(seed, p.n, steps)
    lo, hi = p.bounds
    scale = plan.step

    history = IterateHistory(x0, schedule.tau)
    points = []
    start = 0
    for mark in _checkpoints(steps, stride):
        if mark > start:
            kernels.delayed_steps(*p.kernel_args, p.linear, lo, hi, scale, history.buffer, coords, lags,
                                  start, mark)
            history.j = mark
            start = mark
        x = history.current
        x_read = history.lookup(mark - lags[mark]) if mark < steps else x
        points.append(_trace_point(p, x, mark, _step_measure(p, plan, x_read, x)))
    logger.debug("run seed=%d steps=%d tau=%d schedule=%s", seed, steps, schedule.tau, schedule.kind.value)
    return history.current.copy(), Trace(points=points, stride=stride)


def serial_reference(p: QuadraticProblem, gamma: float, x0, iterations: int, seed: int = 0,
                     stride: Optional[int] = None) -> Tuple[np.ndarray, Trace]:
    """Undelayed coordinate descent on the same coordinate stream as run"""
    stride = stride or p.n
    steps = iterations + 1
    x = project(p.region, as_point(x0, p.n)).copy()
    coords = coordinate_stream(seed, p.n, steps)
    l_max = compute_lipschitz(p).l_max
    lo, hi = p.bounds
    points = []
    start = 0
    for mark in _checkpoints(steps, stride):
        kernels.serial_steps(*p.kernel_args, p.linear, lo, hi, gamma / l_max, x, coords, start, mark)
        start = mark
        if p.regime == Regime.UNCONSTRAINED:
            measure = float(np.sum(gradient(p, x) ** 2))
        else:
            measure = float(np.sum((x - full_prox_step(p, x, x, gamma, l_max)) ** 2))
        points.append(_trace_point(p, x, mark, measure))
    return x, Trace(points=points, stride=stride)


def run_many(p: QuadraticProblem, plan: StepPlan, schedule: DelaySchedule, x0, iterations: int,
             seeds: Iterable[int], stride: Optional[int] = None, workers: Optional[int] = None) -> List[Trace]:
    """Independent seeded runs; the compiled steps release the GIL so a pool runs them in parallel"""
    seeds = list(seeds)

    def one(seed):
        return run(p, plan, schedule, x0, iterations, seed=seed, stride=stride)[1]

    if workers == 1:
        return [one(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, seeds))


def mean_curve(traces: Sequence[Trace]) -> pd.DataFrame:
    """Per-checkpoint means over seeds"""
    if not traces:
        raise DiagnosticError("no traces to aggregate")
    frames = [t.to_frame().assign(seed=k) for k, t in enumerate(traces)]
    merged = pd.concat(frames, ignore_index=True)
    numeric = ["epoch", "residual", "objective", "gap", "dist_sq", "measure"]
    curve = merged.groupby("j", sort=True)[numeric].mean().reset_index()
    curve["seeds"] = merged.groupby("j", sort=True).size().to_numpy()
    return curve


def combined_measure(curve: pd.DataFrame, gamma: float, l_max: float) -> pd.Series:
    """E|x_j - x*|^2 + (2 gamma / L_max)(E f(x_j) - f*)"""
    if curve["dist_sq"].isna().any() or curve["gap"].isna().any():
        raise DiagnosticError("combined measure needs solution and optimum hints; run reference_optimum first")
    return curve["dist_sq"] + (2 * gamma / l_max) * curve["gap"]


def ratio_diagnostic(traces: Sequence[Trace], plan: StepPlan, min_seeds: int = MIN_RATIO_SEEDS,
                     floor: float = 0.0) -> RatioBand:
    """Per-step ratios E m_{j-1} / E m_j of the recorded step measure"""
    if len(traces) < min_seeds:
        raise DiagnosticError(f"ratio diagnostic needs at least {min_seeds} seeds, got {len(traces)}")
    curve = mean_curve(traces)
    if curve["measure"].isna().any():
        raise DiagnosticError("traces carry no step measure")
    j = curve["j"].to_numpy()
    m = curve["measure"].to_numpy()
    ratios = []
    for a in range(len(m) - 1):
        if m[a] <= floor and m[a + 1] <= floor:
            ratios.append(1.0)
            continue
        if m[a + 1] == 0.0:
            ratios.append(float("inf"))
            continue
        ratios.append(float((m[a] / m[a + 1]) ** (1.0 / (j[a + 1] - j[a]))))
    if not ratios:
        ratios = [1.0]
    band = RatioBand(
        ratios=ratios, min_ratio=min(ratios), max_ratio=max(ratios), rho=plan.rho, regime=plan.regime,
        seeds=len(traces),
    )
    logger.info("ratio band min=%.6g max=%.6g rho=%s seeds=%d", band.min_ratio, band.max_ratio, plan.rho, band.seeds)
    return band


def reference_optimum(p: QuadraticProblem) -> QuadraticProblem:
    """Attach f* and a solution x* computed by a dense or serial oracle"""
    if p.regime == Regime.UNCONSTRAINED:
        if p.n > LSTSQ_LIMIT:
            raise ProblemSizeError(
                f"dense least-squares oracle is limited to n <= {LSTSQ_LIMIT}, got n={p.n}; "
                "supply optimum_hint from the generator instead"
            )
        x_star = scipy.linalg.lstsq(p.dense_hessian(), -np.asarray(p.linear))[0]
    else:
        x_star = _serial_box_solve(p)
    return p.with_hints(optimum_hint=objective(p, x_star), solution_hint=x_star)


def _serial_box_solve(p: QuadraticProblem) -> np.ndarray:
    lo, hi = p.bounds
    x = project(p.region, np.zeros(p.n))
    order = np.arange(p.n, dtype=np.int64)
    scale = 1.0 / compute_lipschitz(p).l_max
    for epoch in range(REFERENCE_MAX_EPOCHS):
        kernels.serial_steps(*p.kernel_args, p.linear, lo, hi, scale, x, order, 0, p.n)
        if epoch % 10 == 9 and residual(p, x) <= REFERENCE_TOLERANCE:
            break
    else:
        logger.warning("reference solve stopped at max epochs residual=%.3e", residual(p, x))
    return x


def trace_frame(trace: Trace, linear: Optional[RateEnvelope] = None,
                sublinear: Optional[RateEnvelope] = None, with_seconds: bool = False) -> pd.DataFrame:
    """Trace CSV layout: j, epoch, residual, objective, gap and optional envelope columns"""
    frame = trace.to_frame()
    columns = ["j", "epoch", "residual", "objective", "gap"]
    if with_seconds:
        columns.append("seconds")
    frame = frame[columns].copy()
    if linear is not None:
        frame["envelope_linear"] = evaluate_envelope(linear, frame["j"].to_numpy())
    if sublinear is not None:
        frame["envelope_sublinear"] = evaluate_envelope(sublinear, frame["j"].to_numpy())
    return frame
