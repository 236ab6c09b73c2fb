"""Command-line entry point: generate, solve, bench, theory, verify."""
import argparse
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError

from asyscd import __version__, theory
from asyscd.errors import (
    AdmissibilityError,
    AscdError,
    ParseError,
    ProblemSizeError,
    UsageError,
    VerificationFailure,
)
from asyscd.formats import load_edge_list, load_libsvm, load_problem, save_problem
from asyscd.generators import (
    gen_svm_dual,
    gen_synthetic_qp,
    gen_vertex_cover,
    random_graph,
    random_svm_spec,
)
from asyscd.models import DelaySchedule, Regime, RunManifest, ScheduleKind, SolverConfig, SyntheticSpec
from asyscd.problem import QuadraticProblem, compute_lipschitz, estimate_modulus, objective, project
from asyscd.settings import settings
from asyscd.simulator import LSTSQ_LIMIT, reference_optimum, run, serial_reference, trace_frame
from asyscd.solver import ENGINES, measure_speedup, speedup_frame
from asyscd.verify import run_suites

logger = logging.getLogger("asyscd")

# exception class -> process exit code; first match wins
EXIT_CODES = [
    (UsageError, 2),
    (AdmissibilityError, 2),
    (ParseError, 2),
    (ProblemSizeError, 2),
    (VerificationFailure, 1),
    (AscdError, 1),
]

DESK_FAMILIES = {
    "qp": lambda seed: gen_synthetic_qp(SyntheticSpec(m=300, n=1000, alpha=0.5, seed=seed)),
    "qpc": lambda seed: gen_synthetic_qp(SyntheticSpec(m=300, n=1000, alpha=0.5, seed=seed, constrained=True)),
    "weakc": lambda seed: gen_synthetic_qp(SyntheticSpec(m=300, n=1000, alpha=0.0, seed=seed, constrained=True)),
    "vc": lambda seed: gen_vertex_cover(random_graph(300, 0.02, seed=seed)),
    "svm": lambda seed: gen_svm_dual(random_svm_spec(400, 50, density=0.2, seed=seed)),
}


# Output helpers
def write_csv(frame: pd.DataFrame, path: Path, manifest: RunManifest) -> Path:
    """CSV plus its `<stem>.manifest.json` sibling"""
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    logger.info("wrote path=%s rows=%d", path, len(frame))
    write_manifest(path, manifest)
    return path


def write_manifest(path: Path, manifest: RunManifest) -> None:
    manifest.outputs.append(str(path))
    manifest.finished_at = datetime.now(timezone.utc)
    path.with_name(f"{path.stem}.manifest.json").write_text(manifest.model_dump_json(indent=2))


def new_manifest(args: argparse.Namespace, **fields) -> RunManifest:
    arguments = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "handler"}
    return RunManifest(subcommand=args.command, arguments=arguments, seeds=[args.seed], **fields)


def print_kv(**values) -> None:
    print(" ".join(f"{k}={_fmt(v)}" for k, v in values.items()))


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return "-" if v is None else str(v)


def _int_list(text: str) -> List[int]:
    try:
        return [int(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got '{text}'")


def _str_list(text: str) -> List[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def describe(p: QuadraticProblem) -> Dict[str, object]:
    c = compute_lipschitz(p)
    return dict(name=p.name, n=p.n, nnz=p.nnz, regime=p.regime.value, l_max=c.l_max, l_res=c.l_res, ratio=c.ratio)


def with_reference(p: QuadraticProblem) -> QuadraticProblem:
    if p.optimum_hint is not None and p.solution_hint is not None:
        return p
    if p.n > LSTSQ_LIMIT:
        logger.warning("reference optimum skipped n=%d limit=%d", p.n, LSTSQ_LIMIT)
        return p
    return reference_optimum(p)


# generate
def cmd_generate(args: argparse.Namespace) -> int:
    family = args.family
    if family in ("qp", "qpc"):
        spec = SyntheticSpec(m=args.m, n=args.n, alpha=args.alpha, seed=args.seed, constrained=family == "qpc")
        p = gen_synthetic_qp(spec)
    elif family == "vc":
        if args.edges:
            graph = load_edge_list(args.edges, beta=args.beta)
        else:
            graph = random_graph(args.vertices, args.edge_prob, seed=args.seed, beta=args.beta)
        p = gen_vertex_cover(graph.model_copy(update={"rhs": args.rhs}))
    else:
        spec = load_libsvm(args.libsvm, C=args.C) if args.libsvm else random_svm_spec(
            args.samples, args.features, density=args.density, seed=args.seed, C=args.C)
        p = gen_svm_dual(spec)

    out = Path(args.output) if args.output else Path(args.out_dir) / f"{family}.txt"
    save_problem(p, out)
    write_manifest(out, new_manifest(args, problem_source=str(args.edges or args.libsvm or family)))
    print_kv(problem=out, **describe(p))
    return 0


# solve
def solver_config(args: argparse.Namespace, gamma: float) -> SolverConfig:
    return SolverConfig(
        threads=args.threads, gamma=gamma, shuffle_period=args.shuffle_period, tolerance=args.tol,
        max_epochs=args.max_epochs, seed=args.seed, check_interval=args.check_interval,
    )


def cmd_solve(args: argparse.Namespace) -> int:
    p = load_problem(args.problem)
    engine = args.baseline or args.engine
    if args.envelopes or args.reference:
        p = with_reference(p)
    c = compute_lipschitz(p)
    tau = args.tau if args.tau is not None else args.threads - 1
    if engine == "syngd":
        plan = None
        gamma = 1.0
    else:
        plan = theory.plan_for(p.regime, p.n, c.l_max, c.l_res, 0 if engine == "serial" else tau, args.gamma)
        gamma = plan.gamma
    out = Path(args.output) if args.output else Path(args.out_dir) / f"trace_{engine}.csv"
    manifest = new_manifest(args, problem_source=str(args.problem),
                            plan=plan.model_dump(mode="json") if plan else None)
    x0 = np.zeros(p.n)
    iterations = args.iterations if args.iterations is not None else args.max_epochs * p.n - 1

    if engine in ("simulator", "serial"):
        if engine == "simulator":
            kind = ScheduleKind(args.schedule) if args.schedule else (
                ScheduleKind.FIXED_TAU if tau else ScheduleKind.ZERO)
            schedule = DelaySchedule.zero() if kind == ScheduleKind.ZERO else DelaySchedule(kind=kind, tau=tau)
            x, trace = run(p, plan, schedule, x0, iterations, seed=args.seed, stride=args.stride)
        else:
            x, trace = serial_reference(p, gamma, x0, iterations, seed=args.seed, stride=args.stride)
        linear = sublinear = None
        if args.envelopes:
            linear, sublinear = envelopes_for(p, plan, project(p.region, x0))
        frame = trace_frame(trace, linear, sublinear)
        print_kv(engine=engine, updates=iterations + 1, epochs=(iterations + 1) / p.n,
                 residual=trace.last.residual, objective=trace.last.objective, gap=trace.last.gap)
    else:
        cfg = solver_config(args, gamma)
        manifest.solver_config = cfg.model_dump()
        x, trace, stats = ENGINES[engine](p, cfg)
        frame = trace_frame(trace, with_seconds=True)
        write_csv(stats.to_frame(), out.with_name(f"{out.stem}_stats.csv"), manifest)
        print_kv(engine=engine, threads=stats.threads, seconds=stats.solve_seconds, check_seconds=stats.check_seconds,
                 epochs=stats.epochs, residual=stats.final_residual,
                 status="tolerance_reached" if stats.tolerance_reached else "tolerance_not_reached")
    write_csv(frame, out, manifest)
    write_csv(pd.DataFrame({"x": x}), out.with_name(f"{out.stem}_x.csv"), manifest)
    return 0


def envelopes_for(p: QuadraticProblem, plan, x0: np.ndarray):
    """Linear and sublinear envelopes for a run from x0; None where a constant is missing"""
    if p.optimum_hint is None or (plan.psi is None and plan.regime == Regime.UNCONSTRAINED):
        logger.warning("envelopes need an optimum and a theory plan; columns omitted")
        return None, None
    f0_gap = objective(p, x0) - p.optimum_hint
    r0 = float(np.linalg.norm(x0 - p.solution_hint))
    modulus = estimate_modulus(p).value
    linear = theory.linear_envelope(plan, modulus, f0_gap, r0) if modulus > 0 else None
    sublinear = None
    if f0_gap > 0 and r0 > 0:
        # R is taken as R0
        logger.info("sublinear envelope uses R=R0=%.6g", r0)
        sublinear = theory.sublinear_envelope(plan, f0_gap, r0)
    return linear, sublinear


# bench
def cmd_bench(args: argparse.Namespace) -> int:
    engine = args.baseline or args.engine
    cfg = solver_config(args, args.gamma)
    if args.problem:
        problems = {Path(args.problem).stem: load_problem(args.problem)}
    else:
        unknown = [f for f in args.family if f not in DESK_FAMILIES]
        if unknown:
            raise UsageError(f"unknown family {', '.join(unknown)}; choose from {', '.join(DESK_FAMILIES)}")
        problems = {f: DESK_FAMILIES[f](args.seed) for f in args.family}
    manifest = new_manifest(args, problem_source=str(args.problem or ",".join(args.family)),
                            solver_config=cfg.model_dump())
    frames = []
    for name, p in problems.items():
        rows = measure_speedup(p, cfg, args.threads_list, reps=args.reps, engine=engine)
        frame = speedup_frame(rows)
        for row in rows:
            print_kv(problem=name, threads=row.threads, median_sec=row.median_sec, speedup=row.speedup,
                     epochs=row.epochs, reached=row.reached)
        frames.append(frame.assign(problem=name))
    out = Path(args.output) if args.output else Path(args.out_dir) / "speedup.csv"
    table = pd.concat(frames, ignore_index=True)
    write_csv(table[["problem", *frame.columns]], out, manifest)
    return 0


# theory
def cmd_theory(args: argparse.Namespace) -> int:
    regime = Regime(args.regime)
    modulus, f0_gap, r0 = args.modulus, args.f0_gap, args.r0
    if args.problem:
        p = with_reference(load_problem(args.problem))
        c = compute_lipschitz(p)
        n, l_max, l_res, regime = p.n, c.l_max, c.l_res, p.regime
        x0 = project(p.region, np.zeros(n))
        modulus = estimate_modulus(p).value if modulus is None else modulus
        if p.optimum_hint is not None:
            f0_gap = objective(p, x0) - p.optimum_hint
            r0 = float(np.linalg.norm(x0 - p.solution_hint))
    else:
        if args.n is None:
            raise UsageError("theory needs --n (with --ratio or --l-res) or --problem")
        n, l_max = args.n, args.l_max
        l_res = args.l_res if args.l_res is not None else args.ratio * l_max

    print_kv(regime=regime.value, n=n, l_max=l_max, l_res=l_res, ratio=l_res / l_max,
             max_admissible_tau=theory.max_admissible_tau(regime, n, l_max, l_res))
    if args.rho is not None:
        plan = theory.plan_unconstrained_general(n, l_max, l_res, args.tau, args.rho)
    else:
        plan = theory.plan_for(regime, n, l_max, l_res, args.tau, args.gamma)
    print_kv(plan=plan.provenance.value, gamma=plan.gamma, rho=plan.rho, psi=plan.psi, tau=plan.tau,
             active_bound=plan.active_bound, step=plan.step)

    if f0_gap is None:
        return 0
    radius = args.radius if args.radius is not None else r0
    if radius is None and regime == Regime.CONSTRAINED:
        raise UsageError("constrained envelopes need --r0 or --problem")
    if modulus and modulus > 0:
        env = theory.linear_envelope(plan, modulus, f0_gap, r0)
        print_kv(envelope=env.kind.value, measure=env.measure.value, factor=env.factor, initial=env.initial)
    else:
        if radius is None:
            raise UsageError("sublinear envelopes need --radius (R) or --r0")
        env = theory.sublinear_envelope(plan, f0_gap, radius)
        print_kv(envelope=env.kind.value, initial=env.initial, slope=env.slope)
    if args.eps is not None:
        strong = bool(modulus and modulus > 0)
        count = theory.iterations_for_confidence(regime, strong, n, l_max, f0_gap, args.eps, args.eta,
                                                 modulus=modulus, radius=radius)
        print_kv(eps=args.eps, eta=args.eta, iterations=count)

    iterations = args.iterations if args.iterations is not None else 10 * n
    j = np.unique(np.linspace(0, iterations, args.points).round().astype(np.int64))
    out = Path(args.output) if args.output else Path(args.out_dir) / "theory_curve.csv"
    manifest = new_manifest(args, problem_source=str(args.problem) if args.problem else None,
                            plan=plan.model_dump(mode="json"))
    write_csv(pd.DataFrame({"j": j, "bound": theory.evaluate_envelope(env, j)}), out, manifest)
    return 0


# verify
def cmd_verify(args: argparse.Namespace) -> int:
    results = run_suites(args.suites or ["all"], seed=args.seed, seeds=args.seeds, samples=args.samples,
                         families=tuple(args.family))
    for r in results:
        print(f"{'✓' if r.passed else '❌'} {r.line()}")
    out = Path(args.output) if args.output else Path(args.out_dir) / "verify.csv"
    write_csv(pd.DataFrame([r.model_dump() for r in results]), out, new_manifest(args))
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise VerificationFailure(f"{len(failed)} check(s) failed: {', '.join(failed)}")
    print(f"all {len(results)} checks passed")
    return 0


# Parser
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asyscd", description=__doc__)
    parser.add_argument("--version", action="version", version=f"asyscd {__version__}")
    parser.add_argument("--seed", type=int, default=settings.seed)
    parser.add_argument("--out-dir", default=settings.out_dir)
    parser.add_argument("--quiet", action="store_true")

    # the global flags are also accepted after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out-dir", default=argparse.SUPPRESS)
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    common.add_argument("--output", default=None)

    engine = argparse.ArgumentParser(add_help=False)
    engine.add_argument("--shuffle-period", type=int, default=1)
    engine.add_argument("--tol", type=float, default=1e-5)
    engine.add_argument("--max-epochs", type=int, default=100)
    engine.add_argument("--check-interval", type=int, default=settings.check_interval)
    engine.add_argument("--baseline", choices=list(ENGINES), default=None)

    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", parents=[common], help="build a problem file")
    gen.add_argument("family", choices=["qp", "qpc", "vc", "svm"])
    gen.add_argument("--m", type=int, default=600)
    gen.add_argument("--n", type=int, default=2000)
    gen.add_argument("--alpha", type=float, default=0.5)
    gen.add_argument("--edges", default=None, help="edge-list file for vc")
    gen.add_argument("--vertices", type=int, default=100)
    gen.add_argument("--edge-prob", type=float, default=0.05)
    gen.add_argument("--beta", type=float, default=5.0)
    gen.add_argument("--rhs", type=float, default=0.0, help="right-hand side b of the cover rows")
    gen.add_argument("--libsvm", default=None, help="LIBSVM file for svm")
    gen.add_argument("--samples", type=int, default=200)
    gen.add_argument("--features", type=int, default=20)
    gen.add_argument("--density", type=float, default=0.2)
    gen.add_argument("--C", type=float, default=1.0)
    gen.set_defaults(handler=cmd_generate)

    solve = sub.add_parser("solve", parents=[common, engine], help="run an engine on a problem file")
    solve.add_argument("--problem", required=True)
    solve.add_argument("--threads", type=int, default=1)
    solve.add_argument("--engine", choices=[*ENGINES, "serial", "simulator"], default="async")
    solve.add_argument("--gamma", type=float, default=None, help="force a steplength instead of the theory plan")
    solve.add_argument("--tau", type=int, default=None, help="delay bound for the plan (default threads - 1)")
    solve.add_argument("--schedule", choices=[k.value for k in ScheduleKind if k != ScheduleKind.REPLAY],
                       default=None)
    solve.add_argument("--iterations", type=int, default=None)
    solve.add_argument("--stride", type=int, default=None)
    solve.add_argument("--envelopes", action="store_true")
    solve.add_argument("--reference", action="store_true", help="compute f* so the gap column is filled")
    solve.set_defaults(handler=cmd_solve)

    bench = sub.add_parser("bench", parents=[common, engine], help="speedup table")
    bench.add_argument("--problem", default=None)
    bench.add_argument("--family", type=_str_list, default=["qp"])
    bench.add_argument("--threads", dest="threads_list", type=_int_list, default=[1, 2, 4, 8])
    bench.add_argument("--reps", type=int, default=3)
    bench.add_argument("--engine", choices=list(ENGINES), default="async")
    bench.add_argument("--gamma", type=float, default=1.0)
    bench.set_defaults(handler=cmd_bench, threads=1)

    th = sub.add_parser("theory", parents=[common], help="plans, envelopes and iteration counts")
    th.add_argument("--problem", default=None)
    th.add_argument("--regime", choices=[r.value for r in Regime], default=Regime.UNCONSTRAINED.value)
    th.add_argument("--n", type=int, default=None)
    th.add_argument("--l-max", type=float, default=1.0)
    th.add_argument("--l-res", type=float, default=None)
    th.add_argument("--ratio", type=float, default=1.0)
    th.add_argument("--tau", type=int, default=0)
    th.add_argument("--rho", type=float, default=None, help="use the general plan with this rho")
    th.add_argument("--gamma", type=float, default=None)
    th.add_argument("--modulus", type=float, default=None)
    th.add_argument("--f0-gap", type=float, default=None)
    th.add_argument("--r0", type=float, default=None)
    th.add_argument("--radius", type=float, default=None)
    th.add_argument("--eps", type=float, default=None)
    th.add_argument("--eta", type=float, default=0.1)
    th.add_argument("--iterations", type=int, default=None)
    th.add_argument("--points", type=int, default=101)
    th.set_defaults(handler=cmd_theory)

    ver = sub.add_parser("verify", parents=[common], help="run verification suites")
    ver.add_argument("suites", nargs="*")
    ver.add_argument("--seeds", type=int, default=100)
    ver.add_argument("--samples", type=int, default=10_000)
    ver.add_argument("--family", type=_str_list, default=["qp", "qpc", "weak", "weakc"])
    ver.set_defaults(handler=cmd_verify)
    return parser


def exit_code(exc: BaseException) -> int:
    for cls, code in EXIT_CODES:
        if isinstance(exc, cls):
            return code
    return 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING if args.quiet else getattr(logging, settings.log_level, logging.INFO)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s %(message)s")
    try:
        return args.handler(args)
    except AscdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code(exc)
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
