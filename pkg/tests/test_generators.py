import numpy as np
import pytest
import scipy.sparse as sp
from pydantic import ValidationError

from asyscd.errors import ParseError, ProblemError, ProblemSizeError
from asyscd.formats import load_edge_list, load_libsvm, load_problem, save_problem
from asyscd.generators import (
    gen_svm_dual,
    gen_synthetic_qp,
    gen_vertex_cover,
    random_graph,
    random_svm_spec,
    store_hessian,
)
from asyscd.models import GraphSpec, SvmSample, SvmSpec, SyntheticSpec
from asyscd.problem import compute_lipschitz, estimate_modulus, residual


def test_synthetic_diagonal_and_modulus():
    p = gen_synthetic_qp(SyntheticSpec(m=40, n=80, alpha=0.5, seed=1))
    np.testing.assert_allclose(p.dense_hessian().diagonal(), 1.5, atol=1e-12)
    c = compute_lipschitz(p)
    assert c.l_max == pytest.approx(1.5, abs=1e-12)
    assert estimate_modulus(p).value == 0.5
    assert residual(p, p.solution_hint) <= 1e-8


def test_synthetic_one_by_one():
    p = gen_synthetic_qp(SyntheticSpec(m=1, n=1, alpha=0.0))
    c = compute_lipschitz(p)
    assert c.l_max == pytest.approx(1.0) and c.l_res == pytest.approx(1.0)
    assert p.modulus_hint is None


def test_synthetic_ratio_band():
    c = compute_lipschitz(gen_synthetic_qp(SyntheticSpec(m=300, n=1000, alpha=0.5, seed=0)))
    assert 1.5 <= c.ratio <= 3.0


def test_synthetic_is_deterministic(tmp_path):
    spec = SyntheticSpec(m=20, n=30, seed=9, constrained=True)
    a = save_problem(gen_synthetic_qp(spec), tmp_path / "a.txt")
    b = save_problem(gen_synthetic_qp(spec), tmp_path / "b.txt")
    assert a.read_bytes() == b.read_bytes()


def test_constrained_variant_has_known_solution():
    p = gen_synthetic_qp(SyntheticSpec(m=20, n=30, seed=2, constrained=True))
    assert p.region.kind.value == "box"
    assert np.all(p.region.lower == 0.0) and np.all(np.isinf(p.region.upper))


def test_store_hessian_threshold():
    assert isinstance(store_hessian(np.eye(10), 0.25), sp.csr_matrix)
    assert isinstance(store_hessian(np.ones((3, 3)), 0.25), np.ndarray)


def test_vertex_cover_single_edge():
    p = gen_vertex_cover(GraphSpec(edges=[(0, 1)], beta=5.0))
    expected = 5.0 * np.array([[1.0, 1.0, -1.0], [1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]) + 0.2 * np.eye(3)
    np.testing.assert_allclose(p.dense_hessian(), expected)
    np.testing.assert_array_equal(p.linear, [1.0, 1.0, 0.0])
    assert np.all(p.region.lower == 0.0) and np.all(p.region.upper == 1.0)
    assert p.modulus_hint == pytest.approx(0.2)


def test_vertex_cover_triangle():
    p = gen_vertex_cover(GraphSpec(edges=[(0, 1), (1, 2), (0, 2)], beta=5.0))
    q = p.dense_hessian()
    assert p.n == 6
    np.testing.assert_allclose(q.diagonal()[:3], 10.2)
    np.testing.assert_allclose(q.diagonal()[3:], 5.2)
    nonzeros = np.count_nonzero(q, axis=1)
    assert np.all(nonzeros[3:] == 3)
    assert np.all(nonzeros[:3] <= 2 * 2 + 1 + 2)


def test_vertex_cover_rhs_shifts_linear_term():
    p = gen_vertex_cover(GraphSpec(edges=[(0, 1)], beta=5.0, rhs=1.0))
    np.testing.assert_allclose(p.linear, [-4.0, -4.0, 5.0])


def test_vertex_cover_relabels_and_dedups():
    p = gen_vertex_cover(GraphSpec(edges=[(10, 20), (20, 10), (20, 30)]))
    assert p.n == 3 + 2


def test_vertex_cover_rejections():
    with pytest.raises(ValidationError):
        GraphSpec(edges=[(1, 1)])
    with pytest.raises(ProblemError):
        gen_vertex_cover(GraphSpec(edges=[]))


def test_svm_two_points():
    spec = SvmSpec(samples=[SvmSample(label=1, indices=[0], values=[1.0]),
                            SvmSample(label=-1, indices=[0], values=[1.0])], C=2.0)
    p = gen_svm_dual(spec)
    np.testing.assert_array_equal(p.dense_hessian(), [[1.0, -1.0], [-1.0, 1.0]])
    np.testing.assert_array_equal(p.linear, [-1.0, -1.0])
    np.testing.assert_array_equal(p.region.upper, [2.0, 2.0])


def test_svm_kernel_is_psd():
    spec = random_svm_spec(50, 8, density=0.5, seed=3)
    q = gen_svm_dual(spec).dense_hessian()
    norms = np.array([np.sum(np.square(s.values)) for s in spec.samples])
    np.testing.assert_allclose(q.diagonal(), norms ** 2)
    assert np.linalg.eigvalsh(q)[0] >= -1e-9 * np.max(np.abs(q))


def test_svm_rejections():
    one_class = SvmSpec(samples=[SvmSample(label=1, indices=[0], values=[1.0])] * 3)
    with pytest.raises(ProblemError):
        gen_svm_dual(one_class)
    with pytest.raises(ProblemSizeError):
        gen_svm_dual(random_svm_spec(20, 4), max_samples=10)


def test_random_graph_is_deterministic():
    a, b = random_graph(30, 0.2, seed=4), random_graph(30, 0.2, seed=4)
    assert a.edges == b.edges
    assert all(u < v for u, v in a.edges)


# File formats
def test_problem_file_round_trip(tmp_path):
    p = gen_synthetic_qp(SyntheticSpec(m=20, n=30, seed=5, constrained=True))
    loaded = load_problem(save_problem(p, tmp_path / "qpc.txt"))
    np.testing.assert_array_equal(loaded.dense_hessian(), p.dense_hessian())
    np.testing.assert_array_equal(loaded.linear, p.linear)
    np.testing.assert_array_equal(loaded.region.upper, p.region.upper)
    assert loaded.psd_certified

    vc = gen_vertex_cover(random_graph(12, 0.3, seed=1))
    back = load_problem(save_problem(vc, tmp_path / "vc.txt"))
    np.testing.assert_array_equal(back.dense_hessian(), vc.dense_hessian())
    np.testing.assert_array_equal(back.region.lower, vc.region.lower)


def test_box_without_bounds_section(tmp_path):
    path = tmp_path / "p.txt"
    path.write_text("qp 2 2 box\nc 0 0\n0 0 1.0\n1 1 2.0\n")
    p = load_problem(path)
    assert np.all(np.isinf(p.region.lower)) and np.all(np.isinf(p.region.upper))


@pytest.mark.parametrize("text, line", [
    ("qp 2 two unc\n", 1),
    ("qp 2 1 unc\nc 0\n", 2),
    ("qp 2 2 unc\nc 0 0\n0 0 1.0\n5 1 1.0\n", 4),
    ("qp 2 1 unc\nc 0 0\n0 0\n", 3),
    ("qp 1 1 box\nc 0\n0 0 1.0\nbounds\n2 1\n", 5),
    ("qp 1 1 unc\nc 0\n0 0 1.0\nextra\n", 4),
])
def test_problem_parse_errors(tmp_path, text, line):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(ParseError) as info:
        load_problem(path)
    assert info.value.line == line


def test_non_psd_file_is_flagged(tmp_path):
    path = tmp_path / "indefinite.txt"
    path.write_text("qp 2 4 unc\nc 0 0\n0 0 1.0\n0 1 2.0\n1 0 2.0\n1 1 1.0\n")
    assert not load_problem(path).psd_certified


def test_edge_list(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("# triangle\n0 1\n1 2  # second\n\n2 1\n0 2\n")
    graph = load_edge_list(path)
    assert graph.edges == [(0, 1), (1, 2), (0, 2)]
    path.write_text("0 1\n3 3\n")
    with pytest.raises(ParseError) as info:
        load_edge_list(path)
    assert info.value.line == 2
    path.write_text("0 x\n")
    with pytest.raises(ParseError):
        load_edge_list(path)


def test_libsvm(tmp_path):
    path = tmp_path / "d.libsvm"
    path.write_text("+1 1:0.5 3:2\n-1 2:1\n")
    spec = load_libsvm(path, C=0.5)
    assert spec.n_features == 3
    assert spec.samples[0].indices == [0, 2]
    assert [s.label for s in spec.samples] == [1, -1]
    assert gen_svm_dual(spec).n == 2


@pytest.mark.parametrize("text", ["2 1:1\n", "+1 0:1\n", "+1 3:1 2:1\n", "+1 1-1\n"])
def test_libsvm_errors(tmp_path, text):
    path = tmp_path / "bad.libsvm"
    path.write_text(text)
    with pytest.raises(ParseError) as info:
        load_libsvm(path)
    assert info.value.line == 1
