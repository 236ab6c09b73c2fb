"""Verification suites: each returns a list of CheckResult lines."""
import logging
import math
from typing import Callable, Dict, List, Optional

import numpy as np

from asyscd import theory
from asyscd.errors import AdmissibilityError, AscdError, UsageError
from asyscd.generators import gen_synthetic_qp, random_diagonally_dominant, random_quadratic
from asyscd.models import CheckResult, DelaySchedule, Measure, Regime, ScheduleKind, SyntheticSpec
from asyscd.problem import (
    compute_lipschitz,
    coordinate_gradient,
    estimate_modulus,
    finite_difference_gradient,
    gradient,
    objective,
    project,
)
from asyscd.simulator import combined_measure, mean_curve, ratio_diagnostic, reference_optimum, run, run_many, serial_reference

logger = logging.getLogger(__name__)

ENVELOPE_SLACK = 1.1
MONOTONE_ALLOWANCE = 0.02
RATIO_SLACK = (0.8, 1.2)


def _check(name: str, passed: bool, detail: str = "") -> CheckResult:
    result = CheckResult(name=name, passed=bool(passed), detail=detail)
    (logger.info if result.passed else logger.warning)("check %s", result.line())
    return result


# Problem core
def gradcheck(instances: int = 100, seed: int = 0) -> List[CheckResult]:
    gen = np.random.default_rng(seed)
    worst = 0.0
    mismatched = 0
    for k in range(instances):
        n = int(gen.integers(1, 21))
        p = random_quadratic(n, seed + k)
        x = gen.standard_normal(n)
        g = gradient(p, x)
        fd = finite_difference_gradient(p, x)
        worst = max(worst, float(np.max(np.abs(g - fd) / np.maximum(np.abs(g), 1.0))))
        mismatched += sum(coordinate_gradient(p, x, i) != g[i] for i in range(n))

    pairs_bad = 0
    for k in range(1000):
        n = int(gen.integers(1, 21))
        region = random_quadratic(n, seed + k, box=True).region
        x, y = 3 * gen.standard_normal(n), 3 * gen.standard_normal(n)
        px, py = project(region, x), project(region, y)
        if np.linalg.norm(px - py) > np.linalg.norm(x - y) * (1 + 1e-12) or not np.array_equal(project(region, px), px):
            pairs_bad += 1
    return [
        _check("gradcheck.finite_difference", worst <= 1e-6, f"max_rel_err={worst:.2e} instances={instances}"),
        _check("gradcheck.coordinate", mismatched == 0, f"mismatches={mismatched}"),
        _check("gradcheck.projection", pairs_bad == 0, f"violations={pairs_bad} pairs=1000"),
    ]


def lipschitz(instances: int = 1000, dominant: int = 200, seed: int = 0) -> List[CheckResult]:
    gen = np.random.default_rng(seed)
    bad = 0
    for k in range(instances):
        n = int(gen.integers(1, 51))
        try:
            c = compute_lipschitz(random_quadratic(n, seed + k, ridge=0.0 if k % 2 else 1e-2))
            if not c.l_max <= c.l_res <= math.sqrt(n) * c.l_max * (1 + 1e-12):
                bad += 1
        except (AscdError, ValueError):
            bad += 1
    worst_ratio = 0.0
    for k in range(dominant):
        n = int(gen.integers(2, 51))
        worst_ratio = max(worst_ratio, compute_lipschitz(random_diagonally_dominant(n, seed + k)).ratio)

    growth_bad = 0
    for k in range(100):
        n = int(gen.integers(1, 11))
        p = random_quadratic(n, seed + 10_000 + k, ridge=0.1)
        l = estimate_modulus(p).value
        f_star = objective(p, np.linalg.solve(p.dense_hessian(), -np.asarray(p.linear)))
        x = gen.standard_normal(n)
        lhs = float(np.sum(gradient(p, x) ** 2))
        if lhs < 2 * l * (objective(p, x) - f_star) * (1 - 1e-9):
            growth_bad += 1
    return [
        _check("lipschitz.order", bad == 0, f"violations={bad} instances={instances}"),
        _check("lipschitz.diagonal_dominance", worst_ratio <= 2.0, f"max_ratio={worst_ratio:.4f}"),
        _check("lipschitz.gradient_growth", growth_bad == 0, f"violations={growth_bad} instances=100"),
    ]


# Theory
def plans(samples: int = 10_000, seed: int = 0) -> List[CheckResult]:
    gen = np.random.default_rng(seed)
    unc_bad = con_bad = 0
    drawn = 0
    while drawn < samples:
        n = int(10 ** gen.uniform(math.log10(30), 8))
        ratio = gen.uniform(1.0, max(1.0, math.sqrt(n) / (2 * math.e)))
        max_tau = theory.max_admissible_tau(Regime.UNCONSTRAINED, n, 1.0, ratio)
        if max_tau is None:
            continue
        drawn += 1
        tau = int(gen.integers(0, max_tau + 1))
        try:
            plan = theory.plan_unconstrained_corollary(n, 1.0, ratio, tau)
            bounds = theory.unconstrained_gamma_bounds(n, 1.0, ratio, tau, plan.rho)
            ok = all(plan.gamma <= b * (1 + 1e-12) for b in bounds.values())
            ok = ok and plan.psi <= 2.0 and plan.rho ** (tau + 1) <= math.e * (1 + 1e-12)
        except AscdError:
            ok = False
        unc_bad += not ok

    drawn = 0
    while drawn < samples:
        n = int(10 ** gen.uniform(math.log10(5), 8))
        ratio = 10 ** gen.uniform(0.0, math.log10(math.sqrt(n)))
        max_tau = theory.max_admissible_tau(Regime.CONSTRAINED, n, 1.0, ratio)
        if max_tau is None:
            continue
        drawn += 1
        tau = int(gen.integers(1, max_tau + 1))
        try:
            plan = theory.plan_constrained_corollary(n, 1.0, ratio, tau)
            bounds = theory.constrained_gamma_bounds(n, 1.0, ratio, tau, plan.rho)
            ok = all(0.5 <= b * (1 + 1e-12) for b in bounds.values())
            ok = ok and plan.psi <= 2.0 and plan.rho ** (tau + 1) <= math.e * (1 + 1e-12)
        except AscdError:
            ok = False
        con_bad += not ok
    return [
        _check("plans.unconstrained", unc_bad == 0, f"counterexamples={unc_bad} samples={samples}"),
        _check("plans.constrained", con_bad == 0, f"counterexamples={con_bad} samples={samples}"),
    ]


# Simulator
def equivalence(problems: int = 20, steps: int = 100_000, seed: int = 0) -> List[CheckResult]:
    gen = np.random.default_rng(seed)
    differing = 0
    stride = max(1, steps // 20)
    for k in range(problems):
        n = int(gen.integers(2, 101))
        p = random_quadratic(n, seed + k, box=bool(k % 2))
        c = compute_lipschitz(p)
        plan = theory.fixed_plan(1.0, 0, p.regime, n, c.l_max, c.l_res)
        x0 = gen.standard_normal(n)
        x_sim, trace_sim = run(p, plan, DelaySchedule.zero(), x0, steps - 1, seed=seed + k, stride=stride)
        x_ref, trace_ref = serial_reference(p, 1.0, x0, steps - 1, seed=seed + k, stride=stride)
        if not (np.array_equal(x_sim, x_ref) and trace_sim.to_frame().equals(trace_ref.to_frame())):
            differing += 1
    return [_check("equivalence.zero_delay", differing == 0, f"differing={differing} problems={problems} steps={steps}")]


def unconstrained_plan(n: int, l_max: float, l_res: float):
    """Corollary plan at the largest admissible delay, else the undelayed general plan"""
    tau = theory.max_admissible_tau(Regime.UNCONSTRAINED, n, l_max, l_res)
    if tau is None:
        logger.warning("no admissible delay n=%d ratio=%.4g; using tau=0 general plan", n, l_res / l_max)
        return theory.plan_unconstrained_general(n, l_max, l_res, 0, rho=2.0)
    return theory.plan_unconstrained_corollary(n, l_max, l_res, tau)


# family -> (alpha, constrained)
EXPERIMENT_FAMILIES = {
    "qp": (0.5, False),
    "qpc": (0.5, True),
    "weak": (0.0, False),
    "weakc": (0.0, True),
}


class Experiment:
    """Monte-Carlo runs of one desk-scale family with its plan and envelopes"""

    def __init__(self, family: str, seeds: int = 100, epochs: int = 60, m: int = 100, n: int = 200,
                 seed: int = 0, workers: Optional[int] = None):
        if family not in EXPERIMENT_FAMILIES:
            raise UsageError(f"unknown family {family}; choose from {', '.join(EXPERIMENT_FAMILIES)}")
        alpha, constrained = EXPERIMENT_FAMILIES[family]
        p = gen_synthetic_qp(SyntheticSpec(m=m, n=n, alpha=alpha, seed=seed, constrained=constrained))
        if constrained:
            p = reference_optimum(p)
        c = compute_lipschitz(p)
        if constrained:
            try:
                plan = theory.plan_constrained_corollary(n, c.l_max, c.l_res, 1)
            except AdmissibilityError:
                # corollary plans need a larger n at this ratio
                plan = theory.fixed_plan(0.5, 1, Regime.CONSTRAINED, n, c.l_max, c.l_res)
        else:
            plan = unconstrained_plan(n, c.l_max, c.l_res)
        schedule = (DelaySchedule(kind=ScheduleKind.FIXED_TAU, tau=plan.tau) if plan.tau
                    else DelaySchedule.zero())
        x0 = np.zeros(n)
        self.family, self.problem, self.plan = family, p, plan
        self.strong = alpha > 0
        self.f0_gap = objective(p, x0) - p.optimum_hint
        self.r0 = float(np.linalg.norm(x0 - p.solution_hint))
        self.traces = run_many(p, plan, schedule, x0, epochs * n, range(seed, seed + seeds), stride=n,
                               workers=workers)
        self.curve = mean_curve(self.traces)
        logger.info("experiment family=%s seeds=%d epochs=%d tau=%d gamma=%.4g", family, seeds, epochs,
                    plan.tau, plan.gamma)

    def envelope(self):
        if not self.strong:
            # R is taken as R0
            return theory.sublinear_envelope(self.plan, self.f0_gap, self.r0)
        modulus = estimate_modulus(self.problem).value
        return theory.linear_envelope(self.plan, modulus, self.f0_gap, self.r0)

    @property
    def measure(self) -> Measure:
        # sublinear box envelopes bound the gap alone
        if self.plan.regime == Regime.CONSTRAINED and self.strong:
            return Measure.COMBINED
        return Measure.GAP

    def measured(self) -> np.ndarray:
        if self.measure == Measure.COMBINED:
            return combined_measure(self.curve, self.plan.gamma, self.plan.l_max).to_numpy()
        return self.curve["gap"].to_numpy()


def envelopes(families=("qp", "qpc", "weak", "weakc"), seeds: int = 100, epochs: int = 60, seed: int = 0,
              experiments: Optional[Dict[str, Experiment]] = None) -> List[CheckResult]:
    results = []
    for family in families:
        exp = (experiments or {}).get(family) or Experiment(family, seeds=seeds, epochs=epochs, seed=seed)
        env = exp.envelope()
        bound = theory.evaluate_envelope(env, exp.curve["j"].to_numpy())
        measured = exp.measured()
        # stop comparing once iterates reach the residual floor
        active = exp.curve["residual"].to_numpy() >= 1e-6
        active[0] = True
        ratio = measured[active] / np.maximum(bound[active], 1e-300)
        worst = float(np.max(ratio))
        results.append(_check(
            f"envelopes.{family}", worst <= ENVELOPE_SLACK,
            f"max_mean_over_envelope={worst:.4f} measure={exp.measure.value} kind={env.kind.value} seeds={len(exp.traces)}",
        ))
    return results


def monotonicity(families=("qp", "qpc"), seeds: int = 100, epochs: int = 60, seed: int = 0,
                 experiments: Optional[Dict[str, Experiment]] = None) -> List[CheckResult]:
    results = []
    for family in families:
        exp = (experiments or {}).get(family) or Experiment(family, seeds=seeds, epochs=epochs, seed=seed)
        f = exp.curve["objective"].to_numpy()
        rises = np.diff(f) > 1e-12 * np.maximum(1.0, np.abs(f[:-1]))
        share = float(np.mean(rises)) if rises.size else 0.0
        results.append(_check(f"monotonicity.{family}", share <= MONOTONE_ALLOWANCE,
                              f"increasing_pairs={int(rises.sum())}/{rises.size}"))
    return results


def confidence(runs: int = 500, seed: int = 0) -> List[CheckResult]:
    results = []
    for regime in (Regime.UNCONSTRAINED, Regime.CONSTRAINED):
        box = regime == Regime.CONSTRAINED
        p = reference_optimum(random_quadratic(10, seed, box=box, ridge=0.5))
        c = compute_lipschitz(p)
        gamma = 0.5 if box else 1.0
        plan = theory.fixed_plan(gamma, 0, regime, p.n, c.l_max, c.l_res)
        x0 = np.zeros(p.n) if not box else project(p.region, np.ones(p.n))
        f0_gap = objective(p, x0) - p.optimum_hint
        eps, eta = 0.25 * f0_gap, 0.2
        r0 = float(np.linalg.norm(x0 - p.solution_hint))
        j = theory.iterations_for_confidence(regime, True, p.n, c.l_max, f0_gap, eps, eta,
                                             modulus=estimate_modulus(p).value, radius=r0)
        misses = 0
        for s in range(runs):
            x, _ = run(p, plan, DelaySchedule.zero(), x0, max(j - 1, 0), seed=seed + s, stride=max(j, 1))
            misses += objective(p, x) - p.optimum_hint > eps
        share = misses / runs
        results.append(_check(f"confidence.{regime.value}", share <= eta,
                              f"j={j} miss_share={share:.3f} eta={eta} runs={runs}"))
    return results


def ratios(seeds: int = 100, steps: int = 400, seed: int = 0) -> List[CheckResult]:
    n = 200
    p = gen_synthetic_qp(SyntheticSpec(m=100, n=n, alpha=0.5, seed=seed))
    c = compute_lipschitz(p)
    plan = unconstrained_plan(n, c.l_max, c.l_res)
    schedule = DelaySchedule(kind=ScheduleKind.FIXED_TAU, tau=plan.tau) if plan.tau else DelaySchedule.zero()
    traces = run_many(p, plan, schedule, np.zeros(n), steps, range(seed, seed + seeds), stride=1)
    band = ratio_diagnostic(traces, plan, floor=1e-20)
    low, high = RATIO_SLACK[0] / plan.rho, RATIO_SLACK[1] * plan.rho
    return [_check("ratios.unconstrained", low <= band.min_ratio and band.max_ratio <= high,
                   f"min={band.min_ratio:.4f} max={band.max_ratio:.4f} band=[{low:.4f}, {high:.4f}]")]


SUITES: Dict[str, Callable[..., List[CheckResult]]] = {
    "gradcheck": gradcheck,
    "lipschitz": lipschitz,
    "plans": plans,
    "equivalence": equivalence,
    "envelopes": envelopes,
    "monotonicity": monotonicity,
    "confidence": confidence,
    "ratios": ratios,
}


def run_suites(names, seed: int = 0, seeds: int = 100, samples: int = 10_000,
               families=("qp", "qpc", "weak", "weakc")) -> List[CheckResult]:
    """Run suites by name; `all` runs every suite and shares Monte-Carlo experiments"""
    names = list(SUITES) if "all" in names else list(names)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise UsageError(f"unknown verify suite(s): {', '.join(unknown)}; choose from {', '.join(SUITES)} or all")
    experiments: Dict[str, Experiment] = {}
    if "envelopes" in names or "monotonicity" in names:
        wanted = set(families) if "envelopes" in names else set()
        if "monotonicity" in names:
            wanted |= {"qp", "qpc"}
        experiments = {f: Experiment(f, seeds=seeds, seed=seed) for f in sorted(wanted)}
    options = {
        "envelopes": dict(families=families, experiments=experiments),
        "monotonicity": dict(experiments=experiments),
        "plans": dict(samples=samples),
        "ratios": dict(seeds=seeds),
    }
    results: List[CheckResult] = []
    for name in names:
        logger.info("suite %s", name)
        results += SUITES[name](seed=seed, **options.get(name, {}))
    return results
