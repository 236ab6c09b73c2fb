"""Problem families: synthetic least squares, vertex-cover penalty, kernel SVM dual."""
import logging
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from asyscd import rng
from asyscd.errors import ProblemError, ProblemSizeError
from asyscd.models import GraphSpec, SvmSample, SvmSpec, SyntheticSpec
from asyscd.problem import FeasibleRegion, QuadraticProblem, objective
from asyscd.settings import settings

logger = logging.getLogger(__name__)

OPTIMUM_SOLVE_LIMIT = 5000


def store_hessian(q: np.ndarray, density_threshold: Optional[float] = None):
    """Dense array above the density threshold, CSR below it"""
    threshold = settings.density_threshold if density_threshold is None else density_threshold
    density = np.count_nonzero(q) / q.size if q.size else 0.0
    return q if density > threshold else sp.csr_matrix(q)


def gen_synthetic_qp(spec: SyntheticSpec, density_threshold: Optional[float] = None) -> QuadraticProblem:
    """1/2 |Ax - b|^2 + alpha/2 |x|^2 with unit-norm columns, or its shifted box variant"""
    m, n, seed = spec.m, spec.n, spec.seed
    a = rng.standard_normal(seed, rng.MATRIX, m * n).reshape(m, n)
    a /= np.linalg.norm(a, axis=0)
    x_tilde = rng.standard_normal(seed, rng.TRUTH, n)
    delta = rng.standard_normal(seed, rng.NOISE, m)
    ax = a @ x_tilde
    b = ax + delta * np.linalg.norm(ax) / (5 * m)

    q = a.T @ a
    q = 0.5 * (q + q.T)
    q[np.diag_indices(n)] += spec.alpha
    modulus = spec.alpha if spec.alpha > 0 else None
    hessian = store_hessian(q, density_threshold)

    if spec.constrained:
        region = FeasibleRegion.box(0.0, np.inf, n=n)
        p = QuadraticProblem(
            hessian=hessian, linear=-(q @ x_tilde), region=region, modulus_hint=modulus,
            psd_certified=True, name="qpc",
        )
    else:
        p = QuadraticProblem(
            hessian=hessian, linear=-(a.T @ b), region=FeasibleRegion.unconstrained(),
            modulus_hint=modulus, psd_certified=True, name="qp",
        )
        if n <= OPTIMUM_SOLVE_LIMIT:
            if spec.alpha > 0:
                x_star = scipy.linalg.solve(q, -p.linear, assume_a="pos")
            else:
                x_star = scipy.linalg.lstsq(q, -p.linear)[0]
            p = p.with_hints(optimum_hint=objective(p, x_star), solution_hint=x_star)
    logger.info("generated %s m=%d n=%d alpha=%g seed=%d dense=%s", p.name, m, n, spec.alpha, seed, p.is_dense)
    return p


def gen_vertex_cover(spec: GraphSpec) -> QuadraticProblem:
    """c'x + beta/2 |Ax - b|^2 + 1/(2 beta) |x|^2 over [0, 1]^n, vertices first then edge slacks"""
    if not spec.edges:
        raise ProblemError("vertex-cover graph has no edges; supply at least one edge")
    pairs = sorted({(min(u, v), max(u, v)) for u, v in spec.edges})
    labels = np.unique(np.asarray(pairs, dtype=np.int64))
    index = {int(v): k for k, v in enumerate(labels)}
    n_vertices, n_edges = len(labels), len(pairs)
    n = n_vertices + n_edges

    rows = np.repeat(np.arange(n_edges), 3)
    cols = np.empty(3 * n_edges, dtype=np.int64)
    cols[0::3] = [index[u] for u, _ in pairs]
    cols[1::3] = [index[v] for _, v in pairs]
    cols[2::3] = n_vertices + np.arange(n_edges)
    vals = np.tile([1.0, 1.0, -1.0], n_edges)
    a = sp.csr_matrix((vals, (rows, cols)), shape=(n_edges, n))

    beta = spec.beta
    q = (beta * (a.T @ a) + (1.0 / beta) * sp.identity(n, format="csr")).tocsr()
    c = np.concatenate([np.ones(n_vertices), np.zeros(n_edges)])
    if spec.rhs != 0.0:
        c -= beta * spec.rhs * np.asarray(a.sum(axis=0)).reshape(-1)
    logger.info("generated vc vertices=%d edges=%d beta=%g nnz=%d", n_vertices, n_edges, beta, q.nnz)
    return QuadraticProblem(
        hessian=q, linear=c, region=FeasibleRegion.box(0.0, 1.0, n=n), modulus_hint=1.0 / beta,
        psd_certified=True, name="vc",
    )


def svm_features(spec: SvmSpec) -> sp.csr_matrix:
    indptr = np.cumsum([0] + [len(s.indices) for s in spec.samples])
    indices = np.concatenate([np.asarray(s.indices, dtype=np.int64) for s in spec.samples])
    values = np.concatenate([np.asarray(s.values, dtype=np.float64) for s in spec.samples])
    return sp.csr_matrix((values, indices, indptr), shape=(len(spec.samples), max(spec.n_features, 1)))


def gen_svm_dual(spec: SvmSpec, max_samples: Optional[int] = None) -> QuadraticProblem:
    """Dual of the intercept-free SVM with kernel (x_i'x_j)^2"""
    cap = settings.svm_max_samples if max_samples is None else max_samples
    count = len(spec.samples)
    if count > cap:
        raise ProblemSizeError(
            f"SVM dual with {count} samples exceeds the dense cap of {cap}; "
            "subsample the data set or raise ASCD_SVM_MAX_SAMPLES"
        )
    labels = np.array([s.label for s in spec.samples], dtype=np.float64)
    if count < 2 or not (np.any(labels > 0) and np.any(labels < 0)):
        raise ProblemError("SVM dual needs at least two samples and both classes present")
    x = svm_features(spec)
    kernel = np.asarray((x @ x.T).toarray()) ** 2
    q = np.outer(labels, labels) * kernel
    logger.info("generated svm samples=%d features=%d C=%g", count, spec.n_features, spec.C)
    return QuadraticProblem(
        hessian=q, linear=-np.ones(count), region=FeasibleRegion.box(0.0, spec.C, n=count),
        psd_certified=True, name="svm",
    )


# Random instances
def random_graph(vertices: int, edge_prob: float, seed: int = 0, beta: float = 5.0) -> GraphSpec:
    """Erdos-Renyi graph G(vertices, edge_prob)"""
    u, v = np.triu_indices(vertices, 1)
    keep = rng.uniform(seed, rng.GRAPH, u.shape[0]) < edge_prob
    edges = list(zip(u[keep].tolist(), v[keep].tolist()))
    return GraphSpec(edges=edges, beta=beta)


def random_svm_spec(samples: int, features: int, density: float = 0.1, seed: int = 0,
                    C: float = 1.0) -> SvmSpec:
    mask = (rng.uniform(seed, rng.SVM_FEATURES, samples * features) < density).reshape(samples, features)
    values = rng.standard_normal(seed + 1, rng.SVM_FEATURES, samples * features).reshape(samples, features)
    signs = np.where(rng.uniform(seed, rng.SVM_LABELS, samples) < 0.5, 1, -1)
    signs[:2] = (1, -1)
    out = []
    for k in range(samples):
        idx = np.flatnonzero(mask[k])
        if idx.size == 0:
            idx = np.array([k % features])
        out.append(SvmSample(label=int(signs[k]), indices=idx.tolist(), values=values[k, idx].tolist()))
    return SvmSpec(samples=out, C=C)


def random_quadratic(n: int, seed: int, box: bool = False, ridge: float = 1e-2) -> QuadraticProblem:
    """Gram-plus-ridge quadratic with Gaussian linear term"""
    gen = np.random.default_rng(seed)
    b = gen.standard_normal((n + 2, n))
    q = b.T @ b + ridge * np.eye(n)
    q = 0.5 * (q + q.T)
    region = FeasibleRegion.box(-1.0, 1.0, n=n) if box else FeasibleRegion.unconstrained()
    return QuadraticProblem(
        hessian=q, linear=gen.standard_normal(n), region=region, psd_certified=True, name="random",
    )


def random_diagonally_dominant(n: int, seed: int) -> QuadraticProblem:
    gen = np.random.default_rng(seed)
    off = gen.uniform(-1.0, 1.0, (n, n))
    off = np.triu(off, 1)
    off = off + off.T
    q = off + np.diag(np.abs(off).sum(axis=1) + gen.uniform(0.1, 1.0, n))
    return QuadraticProblem(
        hessian=q, linear=gen.standard_normal(n), region=FeasibleRegion.unconstrained(),
        psd_certified=True, name="diagdom",
    )
