import os

import numpy as np
import pytest

from asyscd.generators import gen_synthetic_qp
from asyscd.models import SyntheticSpec
from asyscd.problem import FeasibleRegion, QuadraticProblem
from asyscd.simulator import reference_optimum

multicore = pytest.mark.skipif((os.cpu_count() or 1) < 4, reason="needs at least 4 cores")


@pytest.fixture
def identity2():
    return QuadraticProblem(hessian=np.eye(2), linear=np.zeros(2), region=FeasibleRegion.unconstrained())


@pytest.fixture
def two_by_two():
    return QuadraticProblem(
        hessian=np.array([[2.0, 1.0], [1.0, 2.0]]), linear=np.array([-1.0, -1.0]),
        region=FeasibleRegion.unconstrained(),
    )


@pytest.fixture
def unit_box():
    return QuadraticProblem(hessian=np.eye(3), linear=np.ones(3), region=FeasibleRegion.box(0.0, 1.0, n=3))


@pytest.fixture(scope="session")
def small_qp():
    return gen_synthetic_qp(SyntheticSpec(m=50, n=100, alpha=0.5, seed=3))


@pytest.fixture(scope="session")
def small_qpc():
    return reference_optimum(gen_synthetic_qp(SyntheticSpec(m=50, n=100, alpha=0.5, seed=3, constrained=True)))
