import math

import numpy as np
import pytest

from asyscd import theory
from asyscd.errors import AdmissibilityError, TheoryError
from asyscd.models import EnvelopeKind, Measure, PlanSource, Regime
from asyscd.verify import plans


def test_corollary_without_delay_is_a_full_step():
    plan = theory.plan_unconstrained_corollary(100, 1.0, 1.0, 0)
    assert plan.psi == 1.0
    assert plan.gamma == 1.0
    assert plan.provenance == PlanSource.COROLLARY


def test_corollary_with_delay_matches_formula():
    n, tau = 10_000, 10
    plan = theory.plan_unconstrained_corollary(n, 1.0, 1.0, tau)
    rho = 1 + 2 * math.e / 100
    psi = 1 + 2 * tau * rho ** tau / 100
    assert plan.rho == pytest.approx(rho, rel=1e-12)
    assert plan.psi == pytest.approx(psi, rel=1e-12)
    assert plan.psi == pytest.approx(1.3396, abs=1e-3)
    assert plan.gamma == pytest.approx(1 / psi, rel=1e-12)


def test_inadmissible_delay_reports_largest_tau():
    with pytest.raises(AdmissibilityError) as info:
        theory.plan_unconstrained_corollary(100, 1.0, 1.0, 1)
    assert info.value.max_tau == 0
    assert "largest admissible tau is 0" in str(info.value)


@pytest.mark.parametrize("regime, n, expected", [
    (Regime.UNCONSTRAINED, 10_000, 17),
    (Regime.UNCONSTRAINED, 4, None),
    (Regime.CONSTRAINED, 1_000_000, 9),
    (Regime.CONSTRAINED, 4, None),
    (Regime.CONSTRAINED, 100, None),
])
def test_max_admissible_tau(regime, n, expected):
    assert theory.max_admissible_tau(regime, n, 1.0, 1.0) == expected


def test_general_plan_picks_smallest_bound():
    plan = theory.plan_unconstrained_general(10_000, 1.0, 2.0, 5, rho=1.1)
    bounds = theory.unconstrained_gamma_bounds(10_000, 1.0, 2.0, 5, 1.1)
    assert plan.gamma == min(bounds.values())
    assert plan.active_bound == min(bounds, key=bounds.get)


def test_general_plan_steplength_shrinks_with_delay():
    gammas = [theory.plan_unconstrained_general(10_000, 1.0, 2.0, tau, rho=1.1).gamma for tau in range(8)]
    assert all(b <= a for a, b in zip(gammas, gammas[1:]))


def test_general_plan_rejects_rho_at_one():
    with pytest.raises(TheoryError):
        theory.plan_unconstrained_general(100, 1.0, 1.0, 0, rho=1.0)


def test_constrained_corollary():
    plan = theory.plan_constrained_corollary(1_000_000, 1.0, 1.0, 1)
    assert plan.gamma == 0.5
    assert plan.rho == pytest.approx(1 + 4 * math.e / 1000, rel=1e-12)
    assert plan.psi <= 2.0


@pytest.mark.parametrize("n, tau", [(4, 1), (1_000_000, 0), (1_000_000, 10)])
def test_constrained_corollary_rejections(n, tau):
    with pytest.raises(AdmissibilityError):
        theory.plan_constrained_corollary(n, 1.0, 1.0, tau)


@pytest.mark.parametrize("n, l_max, l_res, tau", [(0, 1.0, 1.0, 0), (10, 0.0, 1.0, 0), (10, 2.0, 1.0, 0),
                                                  (10, 1.0, 1.0, -1)])
def test_bad_constants(n, l_max, l_res, tau):
    with pytest.raises(TheoryError):
        theory.fixed_plan(0.5, tau, Regime.UNCONSTRAINED, n, l_max, l_res)


def test_plan_for_forced_and_constrained_default():
    forced = theory.plan_for(Regime.UNCONSTRAINED, 100, 1.0, 1.0, 5, gamma=0.3)
    assert forced.provenance == PlanSource.FORCED and forced.gamma == 0.3
    plan = theory.plan_for(Regime.CONSTRAINED, 1_000_000, 1.0, 1.0, 0)
    assert plan.tau == 1


def test_linear_envelope_factors():
    plan = theory.plan_unconstrained_corollary(100, 1.0, 1.0, 0)
    env = theory.linear_envelope(plan, 0.5, 2.0)
    assert env.factor == pytest.approx(0.9975)
    assert theory.evaluate_envelope(env, 0) == 2.0

    forced = theory.fixed_plan(0.5, 1, Regime.CONSTRAINED, 10, 1.0, 1.0)
    env = theory.linear_envelope(forced, 1.0, 1.0, r0=1.0)
    assert env.factor == pytest.approx(1 - 1 / 30)
    assert env.measure == Measure.COMBINED
    assert env.initial == pytest.approx(2.0)
    gap_env = theory.linear_envelope(forced, 1.0, 1.0, r0=1.0, measure=Measure.GAP)
    assert gap_env.initial == pytest.approx(2.0)


def test_envelope_preconditions():
    plan = theory.plan_unconstrained_corollary(100, 1.0, 1.0, 0)
    with pytest.raises(TheoryError):
        theory.linear_envelope(plan, 0.0, 1.0)
    with pytest.raises(TheoryError):
        theory.linear_envelope(theory.fixed_plan(1.0, 0, Regime.UNCONSTRAINED, 100, 1.0, 1.0), 0.5, 1.0)
    with pytest.raises(TheoryError):
        theory.linear_envelope(theory.fixed_plan(0.5, 1, Regime.CONSTRAINED, 10, 1.0, 1.0), 0.5, 1.0)


def test_sublinear_envelopes():
    plan = theory.plan_unconstrained_corollary(100, 1.0, 1.0, 0)
    env = theory.sublinear_envelope(plan, 4.0, 2.0)
    assert env.kind == EnvelopeKind.SUBLINEAR
    assert theory.evaluate_envelope(env, 0) == pytest.approx(4.0)
    assert theory.evaluate_envelope(env, 1600) == pytest.approx(1 / (0.25 + 1600 / 1600))

    forced = theory.fixed_plan(0.5, 1, Regime.CONSTRAINED, 10, 1.0, 1.0)
    env = theory.sublinear_envelope(forced, 1.0, 1.0)
    assert theory.evaluate_envelope(env, 0) == pytest.approx(2.0)
    assert theory.evaluate_envelope(env, 10) == pytest.approx(1.0)


def test_envelope_curves_decrease():
    plan = theory.plan_unconstrained_corollary(100, 1.0, 1.0, 0)
    j = np.arange(0, 5000, 100)
    for env in (theory.linear_envelope(plan, 0.5, 3.0), theory.sublinear_envelope(plan, 3.0, 1.0)):
        values = theory.evaluate_envelope(env, j)
        assert np.all(np.diff(values) < 0)


@pytest.mark.parametrize("regime, expected", [(Regime.UNCONSTRAINED, 93), (Regime.CONSTRAINED, 159)])
def test_iterations_for_confidence_examples(regime, expected):
    count = theory.iterations_for_confidence(regime, True, 10, 1.0, 1.0, 0.1, 0.1, modulus=1.0, radius=1.0)
    assert count == expected


def test_iterations_for_confidence_monotone():
    counts = [theory.iterations_for_confidence(Regime.UNCONSTRAINED, True, 10, 1.0, 1.0, eps, 0.1, modulus=1.0)
              for eps in (0.9, 0.5, 0.1, 0.01)]
    assert counts == sorted(counts)
    counts = [theory.iterations_for_confidence(Regime.UNCONSTRAINED, False, 10, 1.0, 1.0, 0.1, eta, radius=1.0)
              for eta in (0.9, 0.5, 0.1, 0.01)]
    assert counts == sorted(counts)


@pytest.mark.parametrize("eps, eta", [(1.0, 0.1), (0.0, 0.1), (0.5, 0.0), (0.5, 1.0)])
def test_iterations_for_confidence_rejects_bad_targets(eps, eta):
    with pytest.raises(TheoryError):
        theory.iterations_for_confidence(Regime.UNCONSTRAINED, True, 10, 1.0, 1.0, eps, eta, modulus=1.0)


def test_plan_fuzz():
    assert all(r.passed for r in plans(samples=300, seed=7))
