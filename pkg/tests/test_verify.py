import numpy as np
import pytest

from asyscd import theory, verify
from asyscd.errors import UsageError
from asyscd.models import EnvelopeKind, Measure, PlanSource, Regime


def all_pass(results):
    failed = [r.line() for r in results if not r.passed]
    assert not failed, failed


def test_gradcheck():
    all_pass(verify.gradcheck(instances=10, seed=1))


def test_lipschitz():
    all_pass(verify.lipschitz(instances=50, dominant=20, seed=1))


def test_equivalence():
    all_pass(verify.equivalence(problems=4, steps=2000, seed=2))


def test_confidence():
    all_pass(verify.confidence(runs=40, seed=3))


def test_ratios():
    all_pass(verify.ratios(seeds=30, steps=100, seed=1))


def test_unconstrained_plan_falls_back_to_general():
    plan = verify.unconstrained_plan(100, 1.0, 2.0)
    assert plan.provenance == PlanSource.GENERAL and plan.tau == 0
    plan = verify.unconstrained_plan(10_000, 1.0, 1.0)
    assert plan.provenance == PlanSource.COROLLARY and plan.tau == 17


@pytest.fixture(scope="module")
def experiments():
    return {family: verify.Experiment(family, seeds=20, epochs=20, m=50, n=100, seed=1)
            for family in ("qp", "qpc", "weak", "weakc")}


def test_envelopes_hold(experiments):
    all_pass(verify.envelopes(families=("qp", "qpc"), experiments=experiments))


@pytest.mark.parametrize("family,regime", [("weak", Regime.UNCONSTRAINED), ("weakc", Regime.CONSTRAINED)])
def test_weakly_convex_runs_stay_under_sublinear_envelope(experiments, family, regime):
    exp = experiments[family]
    env = exp.envelope()
    assert env.kind == EnvelopeKind.SUBLINEAR
    assert env.regime == regime
    assert exp.measure == Measure.GAP
    bound = theory.evaluate_envelope(env, exp.curve["j"].to_numpy())
    assert bound[0] >= exp.f0_gap * (1 - 1e-12)
    assert np.all(np.diff(bound) < 0)
    all_pass(verify.envelopes(families=(family,), experiments=experiments))


def test_unknown_experiment_family():
    with pytest.raises(UsageError):
        verify.Experiment("lasso", seeds=1, epochs=1, m=5, n=10)


def test_objective_mostly_decreases(experiments):
    all_pass(verify.monotonicity(experiments=experiments))


def test_unknown_suite():
    with pytest.raises(UsageError):
        verify.run_suites(["nope"])


def test_run_suites_by_name():
    results = verify.run_suites(["gradcheck", "plans"], seed=4, samples=100)
    assert [r.name for r in results] == [
        "gradcheck.finite_difference", "gradcheck.coordinate", "gradcheck.projection",
        "plans.unconstrained", "plans.constrained",
    ]
