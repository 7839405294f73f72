import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from suphom import cli
from suphom.errors import SolverError


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


@pytest.fixture
def cfg_file(tmp_path):
    def write(doc, name="c.json"):
        p = tmp_path / name
        p.write_text(json.dumps(doc))
        return str(p)
    return write


def harmonic_doc(**over):
    doc = cli.shipped_config("harmonic1d")
    doc.update(over)
    return doc


def test_eval_harmonic(capsys):
    code, out, _ = run(capsys, "eval", "--config", "harmonic1d", "--Z", "1")
    rec = json.loads(out)
    assert code == 0
    assert rec["value"] == pytest.approx(4 / 3, abs=2e-3)
    assert rec["M_lo"] <= rec["M_hi"] == rec["value"] and not rec["conservative"]
    code, out, _ = run(capsys, "eval", "--config", "harmonic1d", "--Z", "0")
    assert code == 0 and json.loads(out)["value"] == 0.0


def test_eval_negative_and_matrix_Z(capsys):
    code, out, _ = run(capsys, "eval", "--config", "laminate2d", "--Z", "-1,0")
    assert code == 0 and json.loads(out)["value"] == pytest.approx(4 / 3, abs=2e-2)
    assert cli.parse_Z("1,2;3,4", 2, 2).tolist() == [[1, 2], [3, 4]]


@pytest.mark.parametrize("argv", [
    ["eval", "--config", "harmonic1d", "--Z", "1", "--N", "1"],
    ["eval", "--config", "harmonic1d", "--Z", "1", "--N", "63"],
    ["eval", "--config", "harmonic1d", "--Z", "1,2"],
    ["eval", "--config", "harmonic1d", "--Z", "one"],
    ["eval", "--config", "/nonexistent/c.json", "--Z", "1"],
    ["eval", "--Z", "1"],
    ["sweep", "--config", "harmonic1d", "--grid-of-Z", "0:1"],
    ["frobnicate"],
    ["oracle", "--case", "laminate2d", "--z", "1,0", "--p", "2"],
])
def test_malformed_input_exits_1(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 1 and err


@pytest.mark.parametrize("edit", [
    lambda d: d["grid"].update(N=1),
    lambda d: d.update(colour="blue"),
    lambda d: d["solver"].update(feasibility={"tol_feas": -1}),
    lambda d: d["solver"].update(ps=[4, 2]),
    lambda d: d["density"].update(coeff={"m": 2, "values": [1]}),
    lambda d: d.update(seed=-3),
])
def test_malformed_config_exits_1(capsys, cfg_file, edit):
    doc = harmonic_doc()
    edit(doc)
    code, _, err = run(capsys, "eval", "--config", cfg_file(doc), "--Z", "1")
    assert code == 1 and "suphom:" in err


def test_invalid_json(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert run(capsys, "eval", "--config", str(p), "--Z", "1")[0] == 1


def test_bare_density_document(capsys, cfg_file):
    doc = harmonic_doc()["density"]
    code, out, _ = run(capsys, "eval", "--config", cfg_file(doc), "--Z", "1")
    assert code == 0 and json.loads(out)["N"] == 64


def test_conservative_exit_2(capsys, cfg_file):
    doc = cli.shipped_config("laminate2d")
    doc["solver"]["feasibility"] = {"max_iter": 2, "method": "alternating"}
    code, out, _ = run(capsys, "eval", "--config", cfg_file(doc), "--Z", "0.6,0.8")
    assert code == 2 and json.loads(out)["conservative"]


def test_solver_failure_exit_3(capsys, monkeypatch):
    def boom(*a, **k):
        raise SolverError("CG projection stalled", residual=0.5)
    monkeypatch.setattr(cli, "solve_sup_cell", boom)
    code, _, err = run(capsys, "eval", "--config", "harmonic1d", "--Z", "1")
    assert code == 3 and "0.5" in err


def test_sweep_1d(capsys):
    code, out, _ = run(capsys, "sweep", "--config", "harmonic1d", "--grid-of-Z", "-2:2:41")
    table = rows(out)
    assert code == 0
    assert table[0] == ["z1", "value", "M_lo", "M_hi", "bracket_width", "conservative"]
    assert len(table) == 42
    z = np.array([float(r[0]) for r in table[1:]])
    v = np.array([float(r[1]) for r in table[1:]])
    assert np.abs(v - 4 / 3 * np.abs(z)).max() <= 2e-3


def test_sweep_empty_grid(capsys):
    code, out, _ = run(capsys, "sweep", "--config", "harmonic1d", "--grid-of-Z", "")
    assert code == 0 and rows(out) == [["z1", "value", "M_lo", "M_hi", "bracket_width", "conservative"]]


def test_sweep_laminate(capsys):
    code, out, _ = run(capsys, "sweep", "--config", "laminate2d", "--grid-of-Z", "-1:1:9,-1:1:9",
                       "--threads", "4")
    table = rows(out)
    assert code == 0 and len(table) == 82
    vals = {(float(r[0]), float(r[1])): float(r[2]) for r in table[1:]}
    assert vals[(1.0, 0.0)] == pytest.approx(4 / 3, abs=2e-2)
    assert vals[(0.0, 1.0)] == pytest.approx(2.0, abs=2e-2)


def test_sweep_deterministic_across_threads(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(capsys, "sweep", "--config", "harmonic1d", "--grid-of-Z", "-1:1:7", "--out", str(a))
    run(capsys, "sweep", "--config", "harmonic1d", "--grid-of-Z", "-1:1:7", "--out", str(b), "--threads", "3")
    assert a.read_bytes() == b.read_bytes()


def test_sweep_timing_column(capsys):
    _, out, _ = run(capsys, "sweep", "--config", "harmonic1d", "--grid-of-Z", "0:1:2", "--timing")
    table = rows(out)
    assert table[0][-1] == "wall_time" and float(table[1][-1]) >= 0


def test_p_curve(capsys, tmp_path):
    out_path = tmp_path / "curve.csv"
    code, _, _ = run(capsys, "p-curve", "--config", "harmonic1d", "--Z", "1", "--ps", "2,4,8",
                     "--out", str(out_path))
    table = rows(out_path.read_text())
    assert code == 0 and table[0] == ["p", "energy", "value_root", "converged"]
    roots = [float(r[2]) for r in table[1:]]
    assert roots[0] == pytest.approx(1.26491, abs=1e-4) and roots == sorted(roots)
    assert run(capsys, "p-curve", "--config", "harmonic1d", "--Z", "1", "--ps", "2,1.5")[0] == 1


def test_effective_set(capsys, tmp_path):
    out_path = tmp_path / "set.csv"
    code, _, _ = run(capsys, "effective-set", "--config", "laminate2d", "--level", "1", "--dirs", "8",
                     "--hull", "--out", str(out_path))
    table = rows(out_path.read_text())
    assert code == 0 and table[0] == ["e1", "e2", "t_star", "t_upper", "conservative"] and len(table) == 9
    assert float(table[1][2]) == pytest.approx(0.75, abs=2e-2)
    hull = rows((tmp_path / "set_hull.csv").read_text())
    assert hull[0] == ["p1", "p2"] and len(hull) == 9


def test_effective_set_level_too_low(capsys, cfg_file):
    doc = harmonic_doc()
    doc["density"]["form"] = "coeff_psi"
    code, _, err = run(capsys, "effective-set", "--config", cfg_file(doc), "--level", "0.5")
    assert code == 1 and "empty" in err


def test_oracle(capsys):
    code, out, _ = run(capsys, "oracle", "--case", "harmonic1d", "--z", "1", "--p", "4")
    rec = json.loads(out)
    assert code == 0 and rec["value"] == pytest.approx(4 / 3, abs=1e-10)
    assert rec["lp_value_root"] == pytest.approx(0.698425 ** -0.75, abs=1e-6)
    code, out, _ = run(capsys, "oracle", "--case", "laminate2d", "--z", "0,1")
    assert code == 0 and json.loads(out)["value"] == pytest.approx(2.0, abs=1e-10)


def test_oracle_uses_config_coefficients(capsys, cfg_file):
    doc = harmonic_doc()
    doc["density"]["coeff"]["values"] = [3.0, 3.0]
    code, out, _ = run(capsys, "oracle", "--case", "harmonic1d", "--z", "1", "--config", cfg_file(doc))
    assert code == 0 and json.loads(out)["value"] == pytest.approx(3.0)


def test_verify_shipped(capsys):
    code, out, _ = run(capsys, "verify", "--config", "harmonic1d")
    assert code == 0 and "FAIL" not in out and out.count("PASS") >= 9


def test_verify_shipped_laminate(capsys):
    code, out, _ = run(capsys, "verify", "--config", "laminate2d")
    assert code == 0 and "FAIL" not in out


def test_verify_broken_growth(capsys, cfg_file):
    doc = harmonic_doc()
    doc["density"]["alpha"] = 5.0
    code, out, _ = run(capsys, "verify", "--config", cfg_file(doc))
    assert code != 0
    assert any(line.startswith("FAIL") and "growth" in line for line in out.splitlines())


def test_verify_is_seeded(capsys):
    first = run(capsys, "verify", "--config", "harmonic1d", "--seed", "7")[1]
    second = run(capsys, "verify", "--config", "harmonic1d", "--seed", "7")[1]
    assert first == second


def test_dump_corrector(capsys, tmp_path):
    p = tmp_path / "u.csv"
    code, _, _ = run(capsys, "eval", "--config", "harmonic1d", "--Z", "1", "--dump-corrector", str(p))
    lines = p.read_text().splitlines()
    assert code == 0 and lines[0] == "i0,c0" and len(lines) == 65


def test_log_level(capsys, monkeypatch):
    monkeypatch.setenv("SUPHOM_LOG", "loud")
    assert run(capsys, "oracle", "--case", "harmonic1d", "--z", "1")[0] == 1
    monkeypatch.setenv("SUPHOM_LOG", "debug")
    assert run(capsys, "oracle", "--case", "harmonic1d", "--z", "1")[0] == 0


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "suphom.cli", "oracle", "--case", "harmonic1d", "--z", "2"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["value"] == pytest.approx(8 / 3)
