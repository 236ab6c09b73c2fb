"""Steplength plans, rate envelopes and high-probability iteration counts."""
import logging
import math
from typing import Optional

import numpy as np

from asyscd.errors import AdmissibilityError, TheoryError
from asyscd.models import EnvelopeKind, Measure, PlanSource, RateEnvelope, Regime, StepPlan

logger = logging.getLogger(__name__)

E = math.e


def _check_constants(n: int, l_max: float, l_res: float, tau: int):
    if n < 1:
        raise TheoryError(f"dimension must be positive, got {n}")
    if not l_max > 0:
        raise TheoryError(f"l_max must be positive, got {l_max}")
    if l_res < l_max:
        raise TheoryError(f"l_res={l_res} must be at least l_max={l_max}")
    if tau < 0 or int(tau) != tau:
        raise TheoryError(f"tau must be a nonnegative integer, got {tau}")


# Admissible delays
def unconstrained_tau_bound(n: int, l_max: float, l_res: float) -> float:
    """Right-hand side of tau + 1 <= sqrt(n) L_max / (2 e L_res)"""
    return math.sqrt(n) * l_max / (2 * E * l_res)


def constrained_tau_bound(n: int, l_max: float, l_res: float) -> float:
    """Right-hand side of tau (tau + 1) <= sqrt(n) L_max / (4 e L_res)"""
    return math.sqrt(n) * l_max / (4 * E * l_res)


def max_admissible_tau(regime: Regime, n: int, l_max: float, l_res: float) -> Optional[int]:
    """Largest delay the corollary plan accepts, or None if there is none"""
    if regime == Regime.UNCONSTRAINED:
        tau = math.floor(unconstrained_tau_bound(n, l_max, l_res)) - 1
        return tau if tau >= 0 else None
    if n < 5:
        return None
    bound = constrained_tau_bound(n, l_max, l_res)
    tau = int((math.sqrt(1 + 4 * bound) - 1) // 2)
    while tau * (tau + 1) > bound:
        tau -= 1
    while (tau + 1) * (tau + 2) <= bound:
        tau += 1
    return tau if tau >= 1 else None


# Unconstrained plans
def unconstrained_psi(n: int, l_max: float, l_res: float, tau: int, rho: float) -> float:
    return 1 + 2 * tau * rho ** tau * l_res / (math.sqrt(n) * l_max)


def unconstrained_gamma_bounds(n: int, l_max: float, l_res: float, tau: int, rho: float) -> dict:
    """The three upper bounds a steplength must respect when reads lag by up to tau"""
    root_n = math.sqrt(n)
    psi = unconstrained_psi(n, l_max, l_res, tau, rho)
    return {
        "psi": 1 / psi,
        "stale": (rho - 1) * root_n * l_max / (2 * rho ** (tau + 1) * l_res),
        "ratio": (rho - 1) * root_n * l_max / (l_res * rho ** tau * (2 + l_res / (root_n * l_max))),
    }


def plan_unconstrained_corollary(n: int, l_max: float, l_res: float, tau: int) -> StepPlan:
    _check_constants(n, l_max, l_res, tau)
    if tau + 1 > unconstrained_tau_bound(n, l_max, l_res):
        raise AdmissibilityError(
            f"tau={tau} is too large for n={n} and L_res/L_max={l_res / l_max:.4g}",
            max_admissible_tau(Regime.UNCONSTRAINED, n, l_max, l_res),
        )
    rho = 1 + 2 * E * l_res / (math.sqrt(n) * l_max)
    psi = unconstrained_psi(n, l_max, l_res, tau, rho)
    if psi > 2:
        raise TheoryError(f"psi={psi} exceeds 2 under an admissible delay")
    return StepPlan(
        gamma=1 / psi, rho=rho, psi=psi, tau=tau, regime=Regime.UNCONSTRAINED, n=n,
        ratio=l_res / l_max, l_max=l_max, provenance=PlanSource.COROLLARY, active_bound="psi",
    )


def plan_unconstrained_general(n: int, l_max: float, l_res: float, tau: int, rho: float) -> StepPlan:
    _check_constants(n, l_max, l_res, tau)
    if not rho > 1:
        raise TheoryError(f"rho must exceed 1, got {rho}")
    bounds = unconstrained_gamma_bounds(n, l_max, l_res, tau, rho)
    active = min(bounds, key=bounds.get)
    gamma = bounds[active]
    logger.info("plan=general tau=%d rho=%.6g active_bound=%s gamma=%.6g", tau, rho, active, gamma)
    return StepPlan(
        gamma=gamma, rho=rho, psi=unconstrained_psi(n, l_max, l_res, tau, rho), tau=tau,
        regime=Regime.UNCONSTRAINED, n=n, ratio=l_res / l_max, l_max=l_max,
        provenance=PlanSource.GENERAL, active_bound=active,
    )


# Constrained plans
def constrained_psi(n: int, l_max: float, l_res: float, tau: int, rho: float) -> float:
    root_n = math.sqrt(n)
    return 1 + (l_res * tau * rho ** tau / (root_n * l_max)) * (2 + l_max / (root_n * l_res) + 2 * tau / n)


def constrained_gamma_bounds(n: int, l_max: float, l_res: float, tau: int, rho: float) -> dict:
    root_n = math.sqrt(n)
    return {
        "psi": 1 / constrained_psi(n, l_max, l_res, tau, rho),
        "stale": (1 - 1 / rho - 2 / root_n) * root_n * l_max / (4 * l_res * tau * rho ** tau),
    }


def plan_constrained_corollary(n: int, l_max: float, l_res: float, tau: int) -> StepPlan:
    _check_constants(n, l_max, l_res, tau)
    max_tau = max_admissible_tau(Regime.CONSTRAINED, n, l_max, l_res)
    if n < 5:
        raise AdmissibilityError(f"box-constrained plans need n >= 5, got n={n}", None)
    if tau < 1:
        raise AdmissibilityError(f"box-constrained plans need tau >= 1, got tau={tau}", max_tau)
    if tau * (tau + 1) > constrained_tau_bound(n, l_max, l_res):
        raise AdmissibilityError(
            f"tau={tau} is too large for n={n} and L_res/L_max={l_res / l_max:.4g}", max_tau
        )
    rho = 1 + 4 * E * tau * l_res / (math.sqrt(n) * l_max)
    if rho <= 1 / (1 - 2 / math.sqrt(n)):
        raise TheoryError(f"rho={rho} does not exceed (1 - 2/sqrt(n))^-1")
    psi = constrained_psi(n, l_max, l_res, tau, rho)
    gamma = 0.5
    bounds = constrained_gamma_bounds(n, l_max, l_res, tau, rho)
    if psi > 2 or any(gamma > b for b in bounds.values()):
        raise TheoryError(f"gamma=1/2 violates a steplength bound: psi={psi}, bounds={bounds}")
    return StepPlan(
        gamma=gamma, rho=rho, psi=psi, tau=tau, regime=Regime.CONSTRAINED, n=n,
        ratio=l_res / l_max, l_max=l_max, provenance=PlanSource.COROLLARY,
    )


def fixed_plan(gamma: float, tau: int, regime: Regime, n: int, l_max: float, l_res: float) -> StepPlan:
    """A user-forced steplength; no bound is verified"""
    _check_constants(n, l_max, l_res, tau)
    return StepPlan(
        gamma=gamma, tau=tau, regime=regime, n=n, ratio=l_res / l_max, l_max=l_max,
        provenance=PlanSource.FORCED,
    )


def plan_for(regime: Regime, n: int, l_max: float, l_res: float, tau: int,
             gamma: Optional[float] = None) -> StepPlan:
    """Corollary plan for the regime, or a forced plan when gamma is given"""
    if gamma is not None:
        logger.warning("steplength forced gamma=%.6g tau=%d; theory bounds not verified", gamma, tau)
        return fixed_plan(gamma, tau, regime, n, l_max, l_res)
    if regime == Regime.UNCONSTRAINED:
        return plan_unconstrained_corollary(n, l_max, l_res, tau)
    # a plan for delays up to 1 also covers tau = 0
    return plan_constrained_corollary(n, l_max, l_res, max(tau, 1))


# Envelopes
def linear_envelope(plan: StepPlan, modulus: float, f0_gap: float, r0: Optional[float] = None,
                    measure: Optional[Measure] = None) -> RateEnvelope:
    if not modulus > 0:
        raise TheoryError("linear envelopes need a positive modulus; use sublinear_envelope")
    if f0_gap < 0:
        raise TheoryError(f"initial gap must be nonnegative, got {f0_gap}")
    n, l_max, gamma = plan.n, plan.l_max, plan.gamma
    if plan.regime == Regime.UNCONSTRAINED:
        if plan.provenance == PlanSource.COROLLARY:
            factor = 1 - modulus / (2 * n * l_max)
        elif plan.psi is None:
            raise TheoryError("a forced unconstrained plan has no psi; no envelope applies")
        else:
            factor = 1 - (2 * modulus * gamma / (n * l_max)) * (1 - plan.psi * gamma / 2)
        measure = measure or Measure.GAP
        if measure != Measure.GAP:
            raise TheoryError("unconstrained envelopes bound the objective gap only")
        initial = f0_gap
    else:
        if r0 is None:
            raise TheoryError("constrained envelopes need the initial distance r0")
        factor = 1 - modulus / (n * (modulus + l_max / gamma))
        measure = measure or Measure.COMBINED
        initial = r0 ** 2 + (2 * gamma / l_max) * f0_gap
        if measure == Measure.GAP:
            initial *= l_max / (2 * gamma)
    return RateEnvelope(
        kind=EnvelopeKind.LINEAR, regime=plan.regime, provenance=plan.provenance, measure=measure,
        n=n, l_max=l_max, gamma=gamma, initial=initial, factor=factor, modulus=modulus,
        psi=plan.psi, r0=r0, f0_gap=f0_gap,
    )


def sublinear_envelope(plan: StepPlan, f0_gap: float, radius: float) -> RateEnvelope:
    """1/K envelope; radius is R for unconstrained plans and R_0 for constrained ones"""
    if not f0_gap > 0:
        raise TheoryError(f"sublinear envelopes need a positive initial gap, got {f0_gap}")
    n, l_max, gamma = plan.n, plan.l_max, plan.gamma
    if plan.regime == Regime.UNCONSTRAINED:
        if not radius > 0:
            raise TheoryError("the distance bound R must be positive")
        if plan.provenance == PlanSource.COROLLARY:
            slope = 1 / (4 * n * l_max * radius ** 2)
        elif plan.psi is None:
            raise TheoryError("a forced unconstrained plan has no psi; no envelope applies")
        else:
            slope = gamma * (1 - plan.psi * gamma / 2) / (n * l_max * radius ** 2)
        return RateEnvelope(
            kind=EnvelopeKind.SUBLINEAR, regime=plan.regime, provenance=plan.provenance, n=n,
            l_max=l_max, gamma=gamma, initial=f0_gap, slope=slope, psi=plan.psi, radius=radius,
            f0_gap=f0_gap,
        )
    initial = (radius ** 2 * l_max + 2 * gamma * f0_gap) / (2 * gamma)
    return RateEnvelope(
        kind=EnvelopeKind.SUBLINEAR, regime=plan.regime, provenance=plan.provenance, n=n,
        l_max=l_max, gamma=gamma, initial=initial, psi=plan.psi, r0=radius, f0_gap=f0_gap,
    )


def evaluate_envelope(env: RateEnvelope, j):
    """Envelope value at iteration j (scalar or array)"""
    j = np.asarray(j, dtype=np.float64)
    if env.kind == EnvelopeKind.LINEAR:
        value = env.initial * env.factor ** j
    elif env.regime == Regime.UNCONSTRAINED:
        value = 1.0 / (1.0 / env.initial + env.slope * j)
    else:
        value = env.n * env.initial / (env.n + j)
    return float(value) if value.ndim == 0 else value


# High-probability counts
def iterations_for_confidence(regime: Regime, strong: bool, n: int, l_max: float, f0_gap: float,
                              eps: float, eta: float, modulus: Optional[float] = None,
                              radius: Optional[float] = None) -> int:
    """Smallest j with P(f(x_j) - f* <= eps) >= 1 - eta

    radius is R (unconstrained, general case) or R_0 (constrained).
    """
    if not 0 < eps < f0_gap:
        raise TheoryError(f"eps must lie in (0, f(x0) - f*) = (0, {f0_gap}), got {eps}")
    if not 0 < eta < 1:
        raise TheoryError(f"eta must lie in (0, 1), got {eta}")
    if strong and not (modulus is not None and modulus > 0):
        raise TheoryError("the strongly convex count needs a positive modulus")
    if (not strong or regime == Regime.CONSTRAINED) and radius is None:
        raise TheoryError("this count needs a distance bound")
    target = eps * eta
    if regime == Regime.UNCONSTRAINED:
        if strong:
            j = (2 * n * l_max / modulus) * math.log(f0_gap / target)
        else:
            j = 4 * n * l_max * radius ** 2 * (1 / target - 1 / f0_gap)
    else:
        start = l_max * radius ** 2 + f0_gap
        if strong:
            j = (n * (modulus + 2 * l_max) / modulus) * abs(math.log(start / target))
        else:
            j = n * start / target - n
    return max(0, math.ceil(j))
