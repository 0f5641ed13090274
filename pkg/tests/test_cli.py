import json
import math
import subprocess
import sys

import httpx
import pytest
from fastapi.testclient import TestClient

from privfunnel import cli
from privfunnel.service.app import app
from privfunnel.sweep import read_curve_csv

from helpers import I_SX_UNIFORM, SYNTH_CHANNEL, UNIFORM


@pytest.fixture
def dist_file(tmp_path):
    path = tmp_path / "synthetic.json"
    path.write_text(json.dumps({"p_x": UNIFORM, "p_s_given_x": SYNTH_CHANNEL}))
    return str(path)


@pytest.fixture
def csv_file(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("s,x,y\n0,a,1\n1,b,1\n1,a,0\n0,b,0\n1,b,1\n")
    return str(path)


@pytest.fixture
def via_service(monkeypatch):
    """Route the thin client's HTTP calls into the app in-process."""
    client = TestClient(app)

    def post(url, json=None, timeout=None):
        return client.post(httpx.URL(url).path, json=json)

    monkeypatch.setattr(httpx, "post", post)
    return "http://service"


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestValidate:
    def test_prints_entropy_and_mi(self, dist_file, capsys):
        code, out, _ = run(["validate", "--dist", dist_file], capsys)
        assert code == 0
        assert f"H(X) = {math.log(3):.12g}" in out
        assert f"I(S;X) = {I_SX_UNIFORM:.12g}" in out

    def test_bad_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"p_x": [0.5, 0.6], "p_s_given_x": [[1, 1]]}))
        code, _, err = run(["validate", "--dist", str(bad)], capsys)
        assert code == 1 and "deviates" in err

    def test_missing_file(self, tmp_path, capsys):
        code, _, err = run(["validate", "--dist", str(tmp_path / "nope.json")], capsys)
        assert code == 1 and "error" in err

    def test_no_input(self, capsys):
        assert run(["validate"], capsys)[0] == 1

    def test_csv_input(self, csv_file, capsys):
        code, out, _ = run(["validate", "--csv", csv_file, "--s-cols", "s", "--x-cols", "x,y"], capsys)
        assert code == 0 and "M = 4, K = 2" in out


class TestSolve:
    def test_solve_and_trace(self, dist_file, tmp_path, capsys):
        trace = tmp_path / "trace.csv"
        out_json = tmp_path / "res.json"
        code, out, _ = run(["solve", "--dist", dist_file, "--R", "0.5", "--N", "4", "--trace", str(trace),
                            "--out", str(out_json)], capsys)
        assert code == 0
        for label in ("I(S;Y)", "I(X;Y)", "f~", "iterations", "KKT residual max"):
            assert label in out
        lines = trace.read_text().splitlines()
        assert lines[0].startswith("iter,objective,i_sy,i_xy,lam,kl_q")
        assert len(lines) > 2
        assert json.loads(out_json.read_text())["converged"] is True

    def test_threshold_above_entropy(self, dist_file, capsys):
        code, _, err = run(["solve", "--dist", dist_file, "--R", "1.2", "--N", "4"], capsys)
        assert code == 1 and "no feasible mapping" in err

    def test_nonconvergence_exit(self, dist_file, capsys):
        code, _, err = run(["solve", "--dist", dist_file, "--R", "0.5", "--max-iter", "2", "--init", "random"],
                           capsys)
        assert code == 2 and "not converged" in err

    def test_bad_config(self, dist_file, capsys):
        assert run(["solve", "--dist", dist_file, "--R", "0.5", "--tol", "0"], capsys)[0] == 1


class TestSweep:
    def test_deterministic_bytes(self, dist_file, tmp_path, capsys):
        paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
        for p in paths:
            code, _, _ = run(["sweep", "--dist", dist_file, "--N", "4", "--points", "4", "--trials", "1",
                              "--seed", "3", "--out", str(p)], capsys)
            assert code == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()
        pts = read_curve_csv(paths[0].read_text())
        assert len(pts) == 4 and pts[0].r_target == 0.0

    def test_stdout_and_verbose(self, dist_file, tmp_path, capsys, monkeypatch):
        monkeypatch.chdir(tmp_path)
        code, out, _ = run(["sweep", "--dist", dist_file, "--N", "4", "--points", "2", "--trials", "2", "-v",
                            "--max-iter", "50"], capsys)
        assert out.startswith("r_target,i_xy,i_sy,best_trial,iters,converged\n")
        detail = json.loads((tmp_path / "sweep_trials.json").read_text())
        assert detail[0]["trials"][0]["trace"]
        assert code in (0, 2)


class TestOracle:
    def test_compare(self, tmp_path, capsys):
        path = tmp_path / "d.json"
        path.write_text(json.dumps({"p_x": [0.4, 0.6], "p_s_given_x": [[0.8, 0.3], [0.2, 0.7]]}))
        code, out, _ = run(["oracle", "--dist", str(path), "--R", "0.3", "--N", "2", "--step", "0.01"], capsys)
        assert code == 0
        diff = float(out.rsplit("=", 1)[1])
        assert abs(diff) <= 1e-2

    def test_guard_exit(self, dist_file, capsys):
        code, _, err = run(["oracle", "--dist", dist_file, "--R", "0.5", "--N", "4"], capsys)
        assert code == 3 and "free coordinates" in err


class TestIngest:
    def test_writes_json(self, csv_file, tmp_path, capsys):
        out = tmp_path / "dist.json"
        code, _, err = run(["ingest", "--csv", csv_file, "--s-cols", "s", "--x-cols", "x", "--out", str(out)],
                           capsys)
        assert code == 0 and "K = 2, M = 2" in err
        doc = json.loads(out.read_text())
        assert doc["x_alphabet"] == [["a"], ["b"]]
        assert run(["validate", "--dist", str(out)], capsys)[0] == 0

    def test_missing_column(self, csv_file, capsys):
        code, _, err = run(["ingest", "--csv", csv_file, "--s-cols", "nope", "--x-cols", "x"], capsys)
        assert code == 1 and "nope" in err


class TestThinClient:
    def test_solve_matches_local(self, dist_file, via_service, capsys):
        argv = ["solve", "--dist", dist_file, "--R", "0.5", "--N", "4"]
        local = run(argv, capsys)
        remote = run(argv + ["--server", via_service], capsys)
        assert local == remote

    def test_sweep_matches_local(self, dist_file, via_service, tmp_path, capsys):
        argv = ["sweep", "--dist", dist_file, "--N", "4", "--points", "3", "--trials", "2"]
        assert run(argv, capsys)[1] == run(argv + ["--server", via_service], capsys)[1]

    def test_error_exit_codes(self, dist_file, via_service, capsys):
        code, _, err = run(["solve", "--dist", dist_file, "--R", "1.2", "--server", via_service], capsys)
        assert code == 1 and "no feasible mapping" in err
        code, _, _ = run(["oracle", "--dist", dist_file, "--R", "0.5", "--N", "4", "--server", via_service],
                         capsys)
        assert code == 3

    def test_unreachable(self, dist_file, capsys):
        code, _, err = run(["validate", "--dist", dist_file, "--server", "http://127.0.0.1:9"], capsys)
        assert code == 1 and "cannot reach" in err


def test_console_entry_point(dist_file):
    proc = subprocess.run([sys.executable, "-m", "privfunnel.cli", "validate", "--dist", dist_file],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "I(S;X)" in proc.stdout
