"""Multicore coordinate descent engines.

`solve_async` is the lock-free epoch-based engine: worker threads own a
contiguous block of a shuffled coordinate order and update the shared iterate
in place through GIL-free compiled sweeps. `solve_locked` serializes every
coordinate update behind one lock and `solve_syngd` is synchronous parallel
gradient descent; both exist as baselines for `measure_speedup`.
"""
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from statistics import median
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from asyscd import kernels, rng
from asyscd.errors import UsageError
from asyscd.models import SolverConfig, SolverStats, SpeedupRow, Trace, TracePoint
from asyscd.problem import (
    QuadraticProblem,
    as_point,
    compute_lipschitz,
    objective,
    project,
    residual,
    residual_from_gradient,
)

logger = logging.getLogger(__name__)

CHUNK = 256
POWER_ITERATIONS = 200
POWER_TOLERANCE = 1e-6


class SharedIterate:
    """The shared point; one float64 cell per coordinate, written without locks"""

    def __init__(self, x0: np.ndarray):
        self.values = np.ascontiguousarray(x0, dtype=np.float64).copy()

    def snapshot(self) -> np.ndarray:
        return self.values.copy()


class UpdateRecorder:
    """Debug bookkeeping: per-round update counts and a per-thread write log"""

    def __init__(self, n: int, log_capacity: int = 0):
        self.n = n
        self.log_capacity = log_capacity
        self.counts = np.zeros(n, dtype=np.int64)
        self.rounds: List[np.ndarray] = []
        self.observed: List[np.ndarray] = []
        self._logs: List[Tuple[int, np.ndarray, np.ndarray, np.ndarray]] = []

    def thread_log(self, rank: int):
        if self.log_capacity == 0:
            return kernels.NO_LOG_COORDS, kernels.NO_LOG_VALUES, np.zeros(1, dtype=np.int64)
        log = (
            np.empty(self.log_capacity, dtype=np.int64),
            np.empty(self.log_capacity, dtype=np.float64),
            np.zeros(1, dtype=np.int64),
        )
        self._logs.append((rank,) + log)
        return log

    def close_round(self) -> None:
        self.rounds.append(self.counts.copy())
        self.counts[:] = 0

    def write_log(self) -> pd.DataFrame:
        """Every logged write as (rank, coord, value), merged across threads"""
        frames = [
            pd.DataFrame({"rank": rank, "coord": coords[: pos[0]], "value": values[: pos[0]]})
            for rank, coords, values, pos in self._logs
        ]
        if not frames:
            return pd.DataFrame(columns=["rank", "coord", "value"])
        return pd.concat(frames, ignore_index=True)


def _start_point(p: QuadraticProblem, x0) -> np.ndarray:
    x = np.zeros(p.n) if x0 is None else as_point(x0, p.n)
    return project(p.region, x)


def _epoch_engine(p: QuadraticProblem, cfg: SolverConfig, engine: str, x0=None,
                  recorder: Optional[UpdateRecorder] = None) -> Tuple[np.ndarray, Trace, SolverStats]:
    n = p.n
    threads = cfg.threads
    if threads > n:
        logger.warning("threads=%d exceeds n=%d; using %d", threads, n, n)
        threads = n
    scale = cfg.gamma / compute_lipschitz(p).l_max
    lo, hi = p.bounds
    args = p.kernel_args
    shared = SharedIterate(_start_point(p, x0))
    lock = threading.Lock() if engine == "locked" else None

    order = rng.permutation(cfg.seed, rng.SHUFFLE, n, 0)
    blocks = [(int(b[0]), int(b[-1]) + 1) for b in np.array_split(np.arange(n), threads)]
    updates = np.zeros(threads, dtype=np.int64)
    stop = threading.Event()
    shuffles = [0]
    check_seconds = [0.0]
    points = [_point(p, shared.values, 0, 0.0)]

    def reshuffle():
        shuffles[0] += 1
        order[:] = rng.permutation(cfg.seed, rng.SHUFFLE, n, shuffles[0])
        if recorder is not None:
            recorder.close_round()

    barrier = threading.Barrier(threads, action=reshuffle)
    counts = recorder.counts if recorder is not None else kernels.NO_COUNTS
    started = time.perf_counter()

    def check():
        t0 = time.perf_counter()
        x = shared.snapshot()
        if recorder is not None:
            recorder.observed.append(x)
        point = _point(p, x, int(updates.sum()), time.perf_counter() - started)
        if point.j > points[-1].j:
            points.append(point)
        check_seconds[0] += time.perf_counter() - t0
        return point.residual <= cfg.tolerance

    def worker(rank: int):
        start, stop_at = blocks[rank]
        log_coords, log_values, log_pos = (
            recorder.thread_log(rank) if recorder is not None
            else (kernels.NO_LOG_COORDS, kernels.NO_LOG_VALUES, kernels.NO_LOG_POS)
        )
        for epoch in range(1, cfg.max_epochs + 1):
            for chunk in range(start, stop_at, CHUNK):
                if stop.is_set():
                    return
                chunk_end = min(chunk + CHUNK, stop_at)
                if lock is None:
                    kernels.sweep(*args, p.linear, lo, hi, scale, shared.values, order, chunk, chunk_end,
                                  counts, log_coords, log_values, log_pos)
                else:
                    for k in range(chunk, chunk_end):
                        with lock:
                            kernels.sweep(*args, p.linear, lo, hi, scale, shared.values, order, k, k + 1,
                                          counts, log_coords, log_values, log_pos)
                updates[rank] += chunk_end - chunk
            if rank == 0 and epoch % cfg.check_interval == 0 and check():
                stop.set()
                barrier.abort()
                return
            if epoch % cfg.shuffle_period == 0 and epoch < cfg.max_epochs:
                try:
                    barrier.wait()
                except threading.BrokenBarrierError:
                    return

    workers = [threading.Thread(target=worker, args=(rank,), name=f"{engine}-{rank}") for rank in range(threads)]
    for t in workers:
        t.start()
    for t in workers:
        t.join()
    elapsed = time.perf_counter() - started
    if recorder is not None and recorder.counts.any():
        recorder.close_round()

    x = shared.snapshot()
    total = int(updates.sum())
    final = _point(p, x, total, elapsed)
    if final.j > points[-1].j:
        points.append(final)
    else:
        points[-1] = final
    stats = SolverStats(
        engine=engine, threads=threads, solve_seconds=elapsed - check_seconds[0],
        check_seconds=check_seconds[0], epochs=total / n, updates=total, final_residual=final.residual,
        tolerance=cfg.tolerance, tolerance_reached=final.residual <= cfg.tolerance,
    )
    _log_stats(stats)
    return x, Trace(points=points, stride=n * cfg.check_interval), stats


def _point(p: QuadraticProblem, x: np.ndarray, j: int, seconds: float) -> TracePoint:
    f = objective(p, x)
    return TracePoint(
        j=j, epoch=j / p.n, residual=residual(p, x), objective=f,
        gap=None if p.optimum_hint is None else f - p.optimum_hint, seconds=seconds,
    )


def _log_stats(stats: SolverStats) -> None:
    if not stats.tolerance_reached:
        logger.warning("tolerance_not_reached engine=%s threads=%d epochs=%.2f residual=%.3e tol=%.1e",
                       stats.engine, stats.threads, stats.epochs, stats.final_residual, stats.tolerance)
    logger.info("solved engine=%s threads=%d seconds=%.4f epochs=%.2f residual=%.3e", stats.engine,
                stats.threads, stats.solve_seconds, stats.epochs, stats.final_residual)


def solve_async(p: QuadraticProblem, cfg: SolverConfig, x0=None,
                recorder: Optional[UpdateRecorder] = None) -> Tuple[np.ndarray, Trace, SolverStats]:
    return _epoch_engine(p, cfg, "async", x0, recorder)


def solve_locked(p: QuadraticProblem, cfg: SolverConfig, x0=None,
                 recorder: Optional[UpdateRecorder] = None) -> Tuple[np.ndarray, Trace, SolverStats]:
    """Same traversal as solve_async with every coordinate update under one global lock"""
    return _epoch_engine(p, cfg, "locked", x0, recorder)


def power_iteration(p: QuadraticProblem, iterations: int = POWER_ITERATIONS, tol: float = POWER_TOLERANCE,
                    seed: int = 0) -> float:
    """Largest eigenvalue of Q"""
    v = rng.standard_normal(seed, rng.POWER_ITERATION, p.n)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(iterations):
        w = p.hessian @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            break
        v = w / norm
        if abs(norm - estimate) <= tol * norm:
            estimate = norm
            break
        estimate = norm
    return estimate


def solve_syngd(p: QuadraticProblem, cfg: SolverConfig, x0=None) -> Tuple[np.ndarray, Trace, SolverStats]:
    """x <- P(x - grad f(x) / L) with the gradient rows split across threads"""
    n = p.n
    l_full = power_iteration(p, seed=cfg.seed)
    x = _start_point(p, x0).copy()
    g = np.empty(n)
    threads = min(cfg.threads, n)
    blocks = [(int(b[0]), int(b[-1]) + 1) for b in np.array_split(np.arange(n), threads)]
    args = p.kernel_args

    def rows(block):
        kernels.gradient_rows(*args, p.linear, x, g, block[0], block[1])

    points = []
    check_seconds = 0.0
    iteration = 0
    started = time.perf_counter()
    with ThreadPoolExecutor(max_workers=threads) as pool:
        while True:
            list(pool.map(rows, blocks))
            if iteration % cfg.check_interval == 0 or iteration == cfg.max_epochs:
                t0 = time.perf_counter()
                res = residual_from_gradient(p, x, g)
                points.append(TracePoint(j=iteration * n, epoch=float(iteration), residual=res,
                                         objective=objective(p, x), seconds=t0 - started))
                check_seconds += time.perf_counter() - t0
                if res <= cfg.tolerance:
                    break
            if iteration == cfg.max_epochs:
                break
            x[:] = project(p.region, x - g / l_full)
            iteration += 1
    elapsed = time.perf_counter() - started
    final = residual(p, x)
    stats = SolverStats(
        engine="syngd", threads=threads, solve_seconds=elapsed - check_seconds, check_seconds=check_seconds,
        epochs=float(iteration), updates=iteration * n, final_residual=final, tolerance=cfg.tolerance,
        tolerance_reached=final <= cfg.tolerance,
    )
    _log_stats(stats)
    return x, Trace(points=points, stride=n * cfg.check_interval), stats


ENGINES: Dict[str, Callable] = {
    "async": solve_async,
    "locked": solve_locked,
    "syngd": solve_syngd,
}


def measure_speedup(p: QuadraticProblem, cfg: SolverConfig, thread_list: Sequence[int], reps: int = 1,
                    engine: str = "async") -> List[SpeedupRow]:
    """Speedup t_1 / t_P at equal tolerance, medians over reps"""
    if engine not in ENGINES:
        raise UsageError(f"unknown engine '{engine}'; choose one of {', '.join(ENGINES)}")
    if reps < 1:
        raise UsageError("reps must be at least 1")
    counts = sorted(set(thread_list) | {1})
    solve = ENGINES[engine]
    measured = {}
    for threads in counts:
        runs = [solve(p, cfg.model_copy(update={"threads": threads}))[2] for _ in range(reps)]
        measured[threads] = (
            median(s.solve_seconds for s in runs),
            median(s.epochs for s in runs),
            all(s.tolerance_reached for s in runs),
        )
    base_seconds, _, base_reached = measured[1]
    rows = []
    for threads in counts:
        seconds, epochs, reached = measured[threads]
        speedup = base_seconds / seconds if reached and base_reached and seconds > 0 else None
        if threads == 1 and reached:
            speedup = 1.0
        rows.append(SpeedupRow(threads=threads, median_sec=seconds, speedup=speedup, epochs=epochs, reached=reached))
        logger.info("speedup engine=%s threads=%d median_sec=%.4f speedup=%s", engine, threads, seconds, speedup)
    return rows


def speedup_frame(rows: Sequence[SpeedupRow]) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in rows], columns=["threads", "median_sec", "speedup", "epochs", "reached"])
