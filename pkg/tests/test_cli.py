import json

import numpy as np
import pandas as pd
import pytest

from asyscd.cli import main
from asyscd.formats import save_problem
from asyscd.generators import gen_synthetic_qp
from asyscd.models import SyntheticSpec
from asyscd.problem import FeasibleRegion, QuadraticProblem


@pytest.fixture
def qp_file(tmp_path):
    return str(save_problem(gen_synthetic_qp(SyntheticSpec(m=50, n=100, seed=1)), tmp_path / "qp.txt"))


def test_generate_writes_problem_and_manifest(tmp_path, capsys):
    assert main(["--out-dir", str(tmp_path), "generate", "qp", "--m", "20", "--n", "40"]) == 0
    assert (tmp_path / "qp.txt").exists()
    manifest = json.loads((tmp_path / "qp.manifest.json").read_text())
    assert manifest["subcommand"] == "generate"
    assert "l_max=1.5" in capsys.readouterr().out


def test_global_flags_after_subcommand(tmp_path):
    assert main(["generate", "vc", "--vertices", "10", "--edge-prob", "0.4", "--out-dir", str(tmp_path),
                 "--seed", "3"]) == 0
    assert (tmp_path / "vc.txt").read_text().startswith("qp ")


def test_generate_vc_from_edge_list(tmp_path):
    edges = tmp_path / "g.txt"
    edges.write_text("0 1\n1 2\n")
    out = tmp_path / "vc.txt"
    assert main(["generate", "vc", "--edges", str(edges), "--output", str(out)]) == 0
    header = out.read_text().splitlines()[0].split()
    assert header[1] == "5" and header[3] == "box"


def test_simulator_without_delay_matches_serial(tmp_path, qp_file):
    common = ["solve", "--problem", qp_file, "--gamma", "1", "--iterations", "500", "--stride", "50"]
    assert main(common + ["--engine", "simulator", "--output", str(tmp_path / "sim.csv")]) == 0
    assert main(common + ["--engine", "serial", "--output", str(tmp_path / "serial.csv")]) == 0
    assert (tmp_path / "sim_x.csv").read_text() == (tmp_path / "serial_x.csv").read_text()
    assert (tmp_path / "sim.csv").read_text() == (tmp_path / "serial.csv").read_text()


def test_simulator_with_envelopes(tmp_path, qp_file):
    out = tmp_path / "env.csv"
    assert main(["solve", "--problem", qp_file, "--engine", "simulator", "--gamma", "1", "--iterations", "999",
                 "--envelopes", "--output", str(out)]) == 0
    frame = pd.read_csv(out)
    assert frame.columns.tolist()[:5] == ["j", "epoch", "residual", "objective", "gap"]
    assert frame["gap"].notna().all()


def test_inadmissible_delay_exits_with_hint(qp_file, capsys):
    assert main(["solve", "--problem", qp_file, "--engine", "simulator", "--threads", "4"]) == 2
    assert "--gamma" in capsys.readouterr().err


def test_syngd_on_identity(tmp_path, capsys):
    problem = save_problem(
        QuadraticProblem(hessian=np.eye(3), linear=-np.ones(3), region=FeasibleRegion.unconstrained()),
        tmp_path / "eye.txt",
    )
    out = tmp_path / "syngd.csv"
    assert main(["solve", "--problem", str(problem), "--engine", "syngd", "--tol", "1e-10",
                 "--output", str(out)]) == 0
    stats = pd.read_csv(tmp_path / "syngd_stats.csv")
    assert stats["epochs"].iloc[0] == 1.0
    assert "status=tolerance_reached" in capsys.readouterr().out
    assert "seconds" in pd.read_csv(out).columns


@pytest.mark.parametrize("engine", ["async", "simulator"])
def test_solve_indefinite_file_runs(tmp_path, engine, caplog):
    path = tmp_path / "indefinite.txt"
    path.write_text("qp 2 4 box\nc 1 -1\n0 0 1.0\n0 1 2.0\n1 0 2.0\n1 1 1.0\nbounds\n0 1\n0 1\n")
    out = tmp_path / "indef.csv"
    assert main(["solve", "--problem", str(path), "--engine", engine, "--gamma", "1", "--threads", "1",
                 "--max-epochs", "20", "--output", str(out)]) == 0
    assert "rates do not apply" in caplog.text
    x = pd.read_csv(tmp_path / "indef_x.csv")["x"].to_numpy()
    assert np.all((x >= 0.0) & (x <= 1.0))


def test_async_solve_reaches_tolerance(tmp_path, qp_file):
    out = tmp_path / "async.csv"
    assert main(["solve", "--problem", qp_file, "--threads", "2", "--gamma", "1", "--max-epochs", "300",
                 "--output", str(out)]) == 0
    stats = pd.read_csv(tmp_path / "async_stats.csv")
    assert bool(stats["tolerance_reached"].iloc[0])
    assert len(pd.read_csv(tmp_path / "async_x.csv")) == 100


def test_bench_table(tmp_path, qp_file):
    out = tmp_path / "speedup.csv"
    assert main(["bench", "--problem", qp_file, "--threads", "1,2", "--reps", "1", "--max-epochs", "300",
                 "--output", str(out)]) == 0
    frame = pd.read_csv(out)
    assert frame.columns.tolist() == ["problem", "threads", "median_sec", "speedup", "epochs", "reached"]
    assert (frame["problem"] == "qp").all()
    assert frame["reached"].all()
    assert frame["threads"].tolist() == [1, 2]
    assert frame["speedup"].iloc[0] == 1.0


def test_theory_plan_and_curve(tmp_path, capsys):
    out = tmp_path / "curve.csv"
    assert main(["theory", "--n", "10000", "--ratio", "1", "--tau", "10", "--f0-gap", "1", "--modulus", "0.5",
                 "--eps", "0.1", "--eta", "0.1", "--output", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "plan=corollary" in printed
    assert "max_admissible_tau=17" in printed
    assert "iterations=" in printed
    curve = pd.read_csv(out)
    assert curve.columns.tolist() == ["j", "bound"]
    assert curve["bound"].iloc[0] == 1.0
    assert curve["bound"].is_monotonic_decreasing


def test_theory_rejects_inadmissible_delay():
    assert main(["theory", "--n", "100", "--tau", "1"]) == 2


def test_verify_suite(tmp_path, capsys):
    assert main(["--out-dir", str(tmp_path), "verify", "gradcheck"]) == 0
    assert "✓" in capsys.readouterr().out
    report = pd.read_csv(tmp_path / "verify.csv")
    assert report["passed"].all()


def test_unknown_verify_suite(tmp_path):
    assert main(["--out-dir", str(tmp_path), "verify", "nope"]) == 2


def test_invalid_solver_config(qp_file):
    assert main(["solve", "--problem", qp_file, "--threads", "0", "--gamma", "1", "--tau", "0"]) == 2


def test_missing_problem_file(tmp_path):
    assert main(["solve", "--problem", str(tmp_path / "absent.txt"), "--gamma", "1"]) == 2


def test_bad_arguments_exit_two():
    with pytest.raises(SystemExit) as info:
        main(["solve"])
    assert info.value.code == 2
