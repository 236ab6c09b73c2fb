"""Problem, edge-list and LIBSVM files."""
import io
import logging
from pathlib import Path
from typing import List

import numpy as np
import pandas as pd
import scipy.linalg
import scipy.sparse as sp

from asyscd.errors import ParseError
from asyscd.generators import store_hessian
from asyscd.models import GraphSpec, SvmSample, SvmSpec
from asyscd.problem import MODULUS_DENSE_LIMIT, FeasibleRegion, QuadraticProblem, RegionKind

logger = logging.getLogger(__name__)

PSD_RTOL = 1e-10


def save_problem(p: QuadraticProblem, path) -> Path:
    """Header `qp n nnz region`, a `c` line, 0-based `i j value` triplets, optional bounds"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    coo = sp.coo_matrix(p.hessian)
    triplets = pd.DataFrame({"i": coo.row, "j": coo.col, "v": coo.data}).sort_values(["i", "j"], kind="stable")
    with open(path, "w", newline="\n") as f:
        f.write(f"qp {p.n} {len(triplets)} {p.region.kind.value}\n")
        f.write("c " + " ".join(repr(float(v)) for v in p.linear) + "\n")
        # repr keeps the shortest round-trip form of every value
        f.writelines(
            f"{i} {j} {v!r}\n" for i, j, v in zip(triplets["i"].tolist(), triplets["j"].tolist(), triplets["v"].tolist())
        )
        if p.region.kind == RegionKind.BOX:
            f.write("bounds\n")
            f.writelines(f"{lo!r} {hi!r}\n" for lo, hi in zip(p.region.lower.tolist(), p.region.upper.tolist()))
    logger.info("saved problem path=%s n=%d nnz=%d", path, p.n, len(triplets))
    return path


def load_problem(path, name: str = "loaded") -> QuadraticProblem:
    path = Path(path)
    if not path.exists():
        raise ParseError(path, 0, "problem file not found. Please run `asyscd generate` first")
    lines = path.read_text().splitlines()
    if not lines:
        raise ParseError(path, 1, "empty problem file")

    header = lines[0].split()
    if len(header) != 4 or header[0] != "qp" or header[3] not in ("unc", "box"):
        raise ParseError(path, 1, "header must read `qp <n> <nnz> <unc|box>`")
    try:
        n, nnz = int(header[1]), int(header[2])
    except ValueError:
        raise ParseError(path, 1, "n and nnz must be integers")
    if n < 1 or nnz < 0:
        raise ParseError(path, 1, f"invalid sizes n={n} nnz={nnz}")

    if len(lines) < 2 or not lines[1].startswith("c"):
        raise ParseError(path, 2, "expected the `c` line with the linear term")
    c_tokens = lines[1].split()[1:]
    if len(c_tokens) != n:
        raise ParseError(path, 2, f"`c` line holds {len(c_tokens)} values, expected {n}")
    try:
        linear = np.array([float(t) for t in c_tokens])
    except ValueError as exc:
        raise ParseError(path, 2, f"bad real in `c` line: {exc}")

    block = lines[2:2 + nnz]
    if len(block) < nnz:
        raise ParseError(path, len(lines) + 1, f"expected {nnz} triplet lines, found {len(block)}")
    for offset, line in enumerate(block):
        if len(line.split()) != 3:
            raise ParseError(path, 3 + offset, "triplet line must read `i j value`")
    try:
        triplets = pd.read_csv(
            io.StringIO("\n".join(block)), sep=r"\s+", header=None, names=["i", "j", "v"],
            dtype={"i": np.int64, "j": np.int64, "v": np.float64}, float_precision="round_trip",
            engine="c",
        ) if nnz else pd.DataFrame({"i": np.empty(0, np.int64), "j": np.empty(0, np.int64), "v": np.empty(0)})
    except ValueError as exc:
        raise ParseError(path, _first_bad_triplet(block) + 3, f"bad triplet: {exc}")
    bad = np.flatnonzero((triplets["i"] < 0) | (triplets["i"] >= n) | (triplets["j"] < 0) | (triplets["j"] >= n))
    if bad.size:
        raise ParseError(path, int(bad[0]) + 3, f"index out of range for n={n}")

    region = FeasibleRegion.unconstrained()
    rest = lines[2 + nnz:]
    line_no = 3 + nnz
    if header[3] == "box":
        lower, upper = np.full(n, -np.inf), np.full(n, np.inf)
        if rest and rest[0].strip() == "bounds":
            if len(rest) < n + 1:
                raise ParseError(path, line_no + len(rest), f"bounds section needs {n} lines")
            for k in range(n):
                parts = rest[1 + k].split()
                try:
                    lower[k], upper[k] = float(parts[0]), float(parts[1])
                except (ValueError, IndexError):
                    raise ParseError(path, line_no + 1 + k, "bounds line must read `lo hi`")
                if lower[k] > upper[k]:
                    raise ParseError(path, line_no + 1 + k, f"empty interval lo={lower[k]} > hi={upper[k]}")
            rest = rest[n + 1:]
            line_no += n + 1
        region = FeasibleRegion.box(lower, upper)
    for k, line in enumerate(rest):
        if line.strip():
            raise ParseError(path, line_no + k, "unexpected content after the problem data")

    q = sp.csr_matrix((triplets["v"].to_numpy(), (triplets["i"].to_numpy(), triplets["j"].to_numpy())), shape=(n, n))
    hessian = store_hessian(q.toarray()) if n <= MODULUS_DENSE_LIMIT else q
    p = QuadraticProblem(hessian=hessian, linear=linear, region=region, name=name)
    certified = _psd_check(p)
    logger.info("loaded problem path=%s n=%d nnz=%d region=%s", path, n, nnz, header[3])
    return p.with_hints(psd_certified=certified)


def _first_bad_triplet(block: List[str]) -> int:
    for k, line in enumerate(block):
        i, j, v = line.split()
        try:
            int(i), int(j), float(v)
        except ValueError:
            return k
    return 0


def _psd_check(p: QuadraticProblem) -> bool:
    if p.n > MODULUS_DENSE_LIMIT:
        logger.warning("positive semidefiniteness not verified n=%d", p.n)
        return False
    q = p.dense_hessian()
    smallest = scipy.linalg.eigh(q, eigvals_only=True, subset_by_index=[0, 0])[0]
    if smallest < -PSD_RTOL * max(float(np.max(np.abs(q))), 1.0):
        logger.warning("hessian is not positive semidefinite lambda_min=%.3e; rates do not apply", smallest)
        return False
    return True


def load_edge_list(path, beta: float = 5.0) -> GraphSpec:
    """Whitespace-separated `u v` pairs; `#` starts a comment; duplicates dropped"""
    path = Path(path)
    seen = set()
    edges = []
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            u, v = int(parts[0]), int(parts[1])
        except (ValueError, IndexError):
            raise ParseError(path, line_no, "edge line must read `u v` with integer vertices")
        if len(parts) != 2:
            raise ParseError(path, line_no, "edge line must hold exactly two vertices")
        if u == v:
            raise ParseError(path, line_no, f"self-loop on vertex {u}; vertex-cover graphs need u != v")
        key = (min(u, v), max(u, v))
        if key not in seen:
            seen.add(key)
            edges.append((u, v))
    logger.info("read edge list path=%s edges=%d", path, len(edges))
    return GraphSpec(edges=edges, beta=beta)


def load_libsvm(path, C: float = 1.0) -> SvmSpec:
    """`label idx:val ...` lines with 1-based feature indices"""
    path = Path(path)
    samples = []
    positive = negative = 0
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        parts = raw.split()
        if not parts:
            continue
        try:
            label = float(parts[0])
        except ValueError:
            raise ParseError(path, line_no, f"bad label '{parts[0]}'")
        if label not in (1.0, -1.0):
            raise ParseError(path, line_no, f"label must be +1 or -1, got {parts[0]}")
        indices, values = [], []
        for token in parts[1:]:
            try:
                idx, val = token.split(":")
                indices.append(int(idx) - 1)
                values.append(float(val))
            except ValueError:
                raise ParseError(path, line_no, f"feature must read `index:value`, got '{token}'")
        if any(i < 0 for i in indices):
            raise ParseError(path, line_no, "feature indices start at 1")
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ParseError(path, line_no, "feature indices must be sorted and unique")
        samples.append(SvmSample(label=int(label), indices=indices, values=values))
        if label > 0:
            positive += 1
        else:
            negative += 1
        if len(samples) % 2000 == 0:
            logger.info("read %d points, %d positive %d negative", len(samples), positive, negative)
    logger.info("read libsvm path=%s points=%d positive=%d negative=%d", path, len(samples), positive, negative)
    return SvmSpec(samples=samples, C=C)
