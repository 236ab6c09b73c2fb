"""Convex quadratic problems f(x) = 1/2 x'Qx + c'x over a separable region."""
import logging
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, PrivateAttr, field_validator, model_validator

from asyscd import kernels
from asyscd.errors import DimensionError, ProblemError
from asyscd.models import ModulusEstimate, Regime

logger = logging.getLogger(__name__)

SYMMETRY_RTOL = 1e-12
MODULUS_DENSE_LIMIT = 2000


def _frozen_vector(v) -> np.ndarray:
    arr = np.array(v, dtype=np.float64, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


def as_point(x, n: int) -> np.ndarray:
    """Validate a point at an API boundary"""
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if arr.shape[0] != n:
        raise DimensionError(f"point has length {arr.shape[0]}, problem dimension is {n}")
    if not np.all(np.isfinite(arr)):
        raise DimensionError("point contains NaN or infinite entries")
    return arr


class RegionKind(str, Enum):
    UNCONSTRAINED = "unc"
    BOX = "box"


class FeasibleRegion(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    kind: RegionKind
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    @field_validator("lower", "upper", mode="before")
    @classmethod
    def to_array(cls, v):
        return None if v is None else _frozen_vector(v)

    @model_validator(mode="after")
    def check_bounds(self):
        if self.kind == RegionKind.UNCONSTRAINED:
            if self.lower is not None or self.upper is not None:
                raise ValueError("an unconstrained region carries no bounds")
            return self
        if self.lower is None or self.upper is None or self.lower.shape != self.upper.shape:
            raise ValueError("a box needs lower and upper bounds of equal length")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise ValueError("box bounds must not be NaN")
        bad = np.flatnonzero(self.lower > self.upper)
        if bad.size:
            i = int(bad[0])
            raise ValueError(f"box bound {i} is empty: lo={self.lower[i]} > hi={self.upper[i]}")
        return self

    @classmethod
    def unconstrained(cls) -> "FeasibleRegion":
        return cls(kind=RegionKind.UNCONSTRAINED)

    @classmethod
    def box(cls, lower, upper, n: Optional[int] = None) -> "FeasibleRegion":
        """Box region; scalar bounds are broadcast to dimension n"""
        if n is not None:
            lower = np.broadcast_to(np.asarray(lower, dtype=np.float64), (n,))
            upper = np.broadcast_to(np.asarray(upper, dtype=np.float64), (n,))
        return cls(kind=RegionKind.BOX, lower=lower, upper=upper)

    @property
    def regime(self) -> Regime:
        return Regime.UNCONSTRAINED if self.kind == RegionKind.UNCONSTRAINED else Regime.CONSTRAINED

    def bounds(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        """Per-coordinate (lo, hi); infinite for an unconstrained region"""
        if self.kind == RegionKind.UNCONSTRAINED:
            return np.full(n, -np.inf), np.full(n, np.inf)
        if self.lower.shape[0] != n:
            raise DimensionError(f"box has {self.lower.shape[0]} bounds, problem dimension is {n}")
        return self.lower, self.upper


class LipschitzConstants(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    per_coordinate: np.ndarray
    l_max: float
    l_res: float
    modulus: Optional[float] = None

    @field_validator("per_coordinate", mode="before")
    @classmethod
    def to_array(cls, v):
        return _frozen_vector(v)

    @model_validator(mode="after")
    def check_order(self):
        n = self.per_coordinate.shape[0]
        if self.l_max != float(np.max(self.per_coordinate)):
            raise ValueError("l_max must equal the largest coordinate constant")
        if self.l_res < self.l_max:
            raise ValueError(f"l_res={self.l_res} is below l_max={self.l_max}")
        if self.l_res > np.sqrt(n) * self.l_max * (1.0 + 1e-12):
            raise ValueError(f"l_res={self.l_res} exceeds sqrt(n) * l_max")
        return self

    @property
    def ratio(self) -> float:
        return self.l_res / self.l_max


class QuadraticProblem(BaseModel):
    """Objective 1/2 x'Qx + c'x with Q stored as CSR or as a dense array"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    hessian: Union[np.ndarray, sp.csr_matrix]
    linear: np.ndarray
    region: FeasibleRegion
    optimum_hint: Optional[float] = None
    solution_hint: Optional[np.ndarray] = None
    modulus_hint: Optional[float] = None
    psd_certified: bool = False
    name: str = "qp"

    _kernel_args: tuple = PrivateAttr()
    _bounds: tuple = PrivateAttr()

    @field_validator("hessian", mode="before")
    @classmethod
    def canonical_hessian(cls, q):
        if sp.issparse(q):
            q = sp.csr_matrix(q, dtype=np.float64, copy=True)
            q.sum_duplicates()
            q.sort_indices()
            return q
        q = np.array(q, dtype=np.float64, copy=True)
        if q.ndim != 2:
            raise ValueError("hessian must be a matrix")
        q.setflags(write=False)
        return q

    @field_validator("linear", "solution_hint", mode="before")
    @classmethod
    def to_array(cls, v):
        return None if v is None else _frozen_vector(v)

    @model_validator(mode="after")
    def check_invariants(self):
        q = self.hessian
        rows, cols = q.shape
        if rows != cols:
            raise ProblemError(f"hessian must be square, got {rows}x{cols}")
        n = rows
        if self.linear.shape[0] != n:
            raise ProblemError(f"linear term has length {self.linear.shape[0]}, hessian is {n}x{n}")
        values = q.data if sp.issparse(q) else q
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(self.linear))):
            raise ProblemError("hessian and linear term must be finite")
        scale = float(np.max(np.abs(values))) if values.size else 0.0
        asym = abs(q - q.T)
        asym = float(asym.max()) if asym.shape[0] else 0.0
        if asym > SYMMETRY_RTOL * scale:
            raise ProblemError(f"hessian is not symmetric: max |Q_ij - Q_ji| = {asym:.3e}")
        diagonal = q.diagonal()
        bad = np.flatnonzero(diagonal <= 0.0)
        if bad.size:
            i = int(bad[0])
            raise ProblemError(
                f"diagonal entry Q[{i},{i}] = {diagonal[i]} is not positive; coordinate steps are undefined"
            )
        self.region.bounds(n)
        if self.solution_hint is not None and self.solution_hint.shape[0] != n:
            raise ProblemError("solution hint has the wrong length")
        return self

    def model_post_init(self, __context) -> None:
        n = self.n
        if sp.issparse(self.hessian):
            q = self.hessian
            self._kernel_args = (q.indptr, q.indices, q.data, False)
        else:
            self._kernel_args = (
                np.arange(n + 1, dtype=np.int64) * n,
                np.empty(0, dtype=np.int32),
                np.ascontiguousarray(self.hessian).reshape(-1),
                True,
            )
        lo, hi = self.region.bounds(n)
        self._bounds = (np.ascontiguousarray(lo), np.ascontiguousarray(hi))

    @property
    def n(self) -> int:
        return self.hessian.shape[0]

    @property
    def nnz(self) -> int:
        if sp.issparse(self.hessian):
            return int(self.hessian.nnz)
        return int(np.count_nonzero(self.hessian))

    @property
    def is_dense(self) -> bool:
        return not sp.issparse(self.hessian)

    @property
    def regime(self) -> Regime:
        return self.region.regime

    @property
    def kernel_args(self) -> tuple:
        """(indptr, indices, data, dense) for the compiled kernels"""
        return self._kernel_args

    @property
    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        return self._bounds

    def dense_hessian(self) -> np.ndarray:
        return self.hessian.toarray() if sp.issparse(self.hessian) else np.array(self.hessian)

    def with_hints(self, **hints) -> "QuadraticProblem":
        return self.model_copy(update=hints)


# Derivatives
def objective(p: QuadraticProblem, x) -> float:
    x = as_point(x, p.n)
    return float(0.5 * x @ (p.hessian @ x) + p.linear @ x)


def gradient(p: QuadraticProblem, x) -> np.ndarray:
    x = as_point(x, p.n)
    out = np.empty(p.n)
    kernels.gradient_rows(*p.kernel_args, p.linear, x, out, 0, p.n)
    return out


def coordinate_gradient(p: QuadraticProblem, x, i: int) -> float:
    x = as_point(x, p.n)
    if not 0 <= i < p.n:
        raise DimensionError(f"coordinate {i} is out of range for dimension {p.n}")
    return kernels.row_dot(*p.kernel_args, i, x) + p.linear[i]


def finite_difference_gradient(p: QuadraticProblem, x, h: float = 1e-6) -> np.ndarray:
    """Central differences of the objective, one coordinate at a time"""
    x0 = as_point(x, p.n)
    grad = np.empty(p.n)
    for i in range(p.n):
        x = x0.copy()
        x[i] = x0[i] + h
        f_plus = objective(p, x)
        x[i] = x0[i] - h
        f_minus = objective(p, x)
        grad[i] = (f_plus - f_minus) / (2 * h)
    return grad


# Geometry
def project(region: FeasibleRegion, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if region.kind == RegionKind.UNCONSTRAINED:
        return x.copy()
    lo, hi = region.bounds(x.shape[0])
    return np.clip(x, lo, hi)


def project_coordinate(region: FeasibleRegion, i: int, v: float) -> float:
    if region.kind == RegionKind.UNCONSTRAINED:
        return float(v)
    return float(min(max(v, region.lower[i]), region.upper[i]))


def residual(p: QuadraticProblem, x) -> float:
    g = gradient(p, x)
    return residual_from_gradient(p, x, g)


def residual_from_gradient(p: QuadraticProblem, x, g: np.ndarray) -> float:
    if p.region.kind == RegionKind.UNCONSTRAINED:
        return float(np.linalg.norm(g))
    x = np.asarray(x, dtype=np.float64)
    return float(np.linalg.norm(x - project(p.region, x - g)))


def full_prox_step(p: QuadraticProblem, x_read, x_current, gamma: float, l_max: Optional[float] = None) -> np.ndarray:
    """Apply the single-coordinate update to every coordinate of x_current at once"""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if l_max is None:
        l_max = float(np.max(p.hessian.diagonal()))
    x_current = as_point(x_current, p.n)
    return project(p.region, x_current - (gamma / l_max) * gradient(p, x_read))


def distance_to_solution(p: QuadraticProblem, x) -> float:
    if p.solution_hint is None:
        raise ProblemError("problem has no solution hint; run simulator.reference_optimum first")
    return float(np.linalg.norm(as_point(x, p.n) - p.solution_hint))


# Constants
def compute_lipschitz(p: QuadraticProblem) -> LipschitzConstants:
    diagonal = np.asarray(p.hessian.diagonal(), dtype=np.float64)
    if np.any(diagonal <= 0):
        raise ProblemError("hessian diagonal must be positive")
    if sp.issparse(p.hessian):
        col_sq = np.asarray(p.hessian.multiply(p.hessian).sum(axis=1)).reshape(-1)
    else:
        col_sq = np.einsum("ij,ij->j", p.hessian, p.hessian)
    l_max = float(diagonal.max())
    # a column norm dominates its diagonal entry; guard against rounding below it
    l_res = max(float(np.sqrt(col_sq.max())), l_max)
    cap = float(np.sqrt(p.n)) * l_max
    if l_res > cap:
        # only an indefinite Q gets here; the plan it yields carries no rate guarantee
        logger.warning("l_res exceeds sqrt(n) * l_max l_res=%.6g cap=%.6g psd_certified=%s; clipping",
                       l_res, cap, p.psd_certified)
        l_res = cap
    return LipschitzConstants(per_coordinate=diagonal, l_max=l_max, l_res=l_res, modulus=p.modulus_hint)


def estimate_modulus(p: QuadraticProblem) -> ModulusEstimate:
    if p.modulus_hint is not None:
        return ModulusEstimate(value=p.modulus_hint, known=True, source="generator")
    if p.n <= MODULUS_DENSE_LIMIT:
        smallest = scipy.linalg.eigh(p.dense_hessian(), eigvals_only=True, subset_by_index=[0, 0])[0]
        return ModulusEstimate(value=max(float(smallest), 0.0), known=True, source="eigensolve")
    logger.warning("modulus unknown n=%d limit=%d", p.n, MODULUS_DENSE_LIMIT)
    return ModulusEstimate(value=0.0, known=False, source="unknown")
