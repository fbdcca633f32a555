import json
import subprocess
import sys

from ultraflow.cli import main

RUN = [sys.executable, "-m", "ultraflow.cli"]


def run_cli(*args):
    proc = subprocess.run(RUN + list(args), capture_output=True, text=True, timeout=600)
    return proc.returncode, proc.stdout, proc.stderr


class TestConstantsCommand:
    def test_gamma1_vanishes_at_sharp(self):
        rc, out, _ = run_cli("constants", "--d", "5", "--p", "3.1875")
        assert rc == 0
        assert abs(json.loads(out)["gamma1"]) < 1e-14

    def test_near_critical_root(self):
        rc, out, _ = run_cli("constants", "--d", "5", "--p", "3.3333", "--beta", "1.5")
        assert rc == 0
        assert abs(json.loads(out)["gamma"]) < 1e-3

    def test_infinite_sentinel(self):
        rc, out, _ = run_cli("constants", "--d", "2", "--p", "7")
        assert rc == 0
        assert json.loads(out)["two_star"] == "inf"

    def test_parameter_error_exit_code(self):
        rc, _, err = run_cli("constants", "--d", "0.5", "--p", "3")
        assert rc == 2
        assert json.loads(err)["error"] == "parameter"


class TestRegionCommand:
    def test_sweep_csv_and_manifest(self, tmp_path):
        out_dir = str(tmp_path)
        rc, _, _ = run_cli("region", "--d", "5", "--grid", "31", "--out", out_dir)
        assert rc == 0
        lines = (tmp_path / "region.csv").read_text().splitlines()
        assert lines[0] == "p,beta,m,gamma,admissible,A,A_positive"
        assert len(lines) == 1 + 31 * 31
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["schema_version"] == 1

    def test_reproducible_bytes(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out_dir in (a, b):
            rc, _, _ = run_cli("region", "--d", "4", "--grid", "21", "--out", str(out_dir))
            assert rc == 0
        assert (a / "region.csv").read_bytes() == (b / "region.csv").read_bytes()
        assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()

    def test_beta_curves(self, tmp_path):
        rc, _, _ = run_cli("region", "--d", "3", "--curves", "3,4,5,6,7,8,9,10",
                           "--grid", "24", "--out", str(tmp_path))
        assert rc == 0
        lines = (tmp_path / "beta_curves.csv").read_text().splitlines()
        assert lines[0] == "d,p,beta_minus,beta_plus"
        from ultraflow import Params, beta_roots, two_sharp

        # above p = 2 the lower-root curves are ordered upward in d, and each
        # crosses beta = 1 exactly at that dimension's threshold exponent
        vals = [beta_roots(Params(float(d), 2.2)).minus for d in range(4, 11)]
        assert all(a < b for a, b in zip(vals, vals[1:]))
        for d in range(3, 11):
            crossing = beta_roots(Params(float(d), two_sharp(float(d)))).minus
            assert abs(crossing - 1.0) < 1e-10


class TestFlowCommand:
    def test_heat_flow_run(self, tmp_path):
        rc, _, _ = run_cli(
            "flow", "--form", "heat", "--d", "5", "--p", "3", "--init", "random:3,8",
            "--t-end", "0.4", "--samples", "20", "--n", "96", "--out", str(tmp_path),
        )
        assert rc == 0
        report = json.loads((tmp_path / "flow.json").read_text())
        assert report["F_monotone_nonincreasing"] is True
        assert report["conservation_drift"] < 1e-13
        lines = (tmp_path / "trajectory.csv").read_text().splitlines()
        assert lines[0] == "t,F,E_p,I_p,conserved,moment_z"
        assert len(lines) == 21

    def test_w_flow_with_beta(self, tmp_path):
        rc, _, _ = run_cli(
            "flow", "--form", "w", "--d", "5", "--p", "3.3", "--beta", "1.212671265218024",
            "--init", "perturb:0.2,2", "--t-end", "0.05", "--samples", "6", "--n", "64",
            "--out", str(tmp_path),
        )
        assert rc == 0
        report = json.loads((tmp_path / "flow.json").read_text())
        assert report["F_monotone_nonincreasing"] is True

    def test_missing_beta_is_parameter_error(self):
        rc, _, _ = run_cli("flow", "--form", "fde", "--d", "5", "--p", "3.3",
                           "--init", "const:1", "--t-end", "0.1")
        assert rc == 2

    def test_conformal_init_heat(self, tmp_path):
        rc, _, _ = run_cli(
            "flow", "--form", "heat", "--d", "4", "--p", "4", "--init", "conformal:1,0.3",
            "--t-end", "0.2", "--samples", "10", "--n", "96", "--out", str(tmp_path),
        )
        assert rc == 0
        report = json.loads((tmp_path / "flow.json").read_text())
        # deficit starts at the minimum and rises: not monotone
        assert report["F_monotone_nonincreasing"] is False


class TestCounterexampleCommand:
    def test_full_report(self):
        rc, out, _ = run_cli("counterexample", "--d", "5", "--p", "3.25")
        assert rc == 0
        rep = json.loads(out)
        assert rep["second_obstruction"]["positive"] is True
        assert rep["first_obstruction"]["heat_mismatch"] > 1e-3

    def test_out_of_window_p(self):
        rc, _, _ = run_cli("counterexample", "--d", "5", "--p", "3.0")
        assert rc == 2


class TestImproveCommand:
    def test_estimate(self):
        rc, out, _ = run_cli("improve", "--d", "4", "--p", "3", "--restarts", "4",
                             "--samples", "100")
        assert rc == 0
        rep = json.loads(out)
        assert 4.0 < rep["lambda_star"] <= 10.0 + 1e-6
        assert rep["verify"]["violations"] == 0


class TestVerifyCommand:
    def test_quadrature_suite(self):
        rc, out, _ = run_cli("verify", "quadrature")
        assert rc == 0
        lines = out.splitlines()
        assert lines[0].startswith("1..")
        assert all(l.startswith("ok") for l in lines[1:])

    def test_unknown_suite(self):
        rc, _, _ = run_cli("verify", "nope")
        assert rc == 2

    def test_second_obstruction_suite(self):
        rc, out, _ = run_cli("verify", "second-obstruction", "--d", "5", "--p", "3.25")
        assert rc == 0
        assert "ok 1" in out


class TestInProcessEntry:
    def test_main_returns_zero(self, capsys):
        assert main(["constants", "--d", "3", "--p", "2"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["two_star"] == 6.0

    def test_main_parameter_error(self, capsys):
        assert main(["constants", "--d", "3", "--p", "9"]) == 2
