import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from distsl import cli

PI = math.pi


def write_cfg(tmp_path, **data):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_spectrum_zero(tmp_path):
    cfg = write_cfg(tmp_path, potential="zero", N=5)
    assert cli.main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = read_rows(tmp_path / "o" / "spectrum.csv")
    assert list(rows[0]) == cli.SPECTRUM_HEADER
    assert [float(r["re_lambda"]) for r in rows] == pytest.approx([1, 4, 9, 16, 25], abs=1e-10)
    for r in rows:
        assert float(r["abs_rho"]) <= 1e-10
        assert float(r["upsilon"]) == 0.0
        assert r["rho_over_upsilon2"] == "nan"
        assert r["simple"] == "1"


def test_spectrum_constant_q(tmp_path):
    cfg = write_cfg(tmp_path, potential="linear(5)", N=5)
    assert cli.main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    lam = [float(r["re_lambda"]) for r in read_rows(tmp_path / "o" / "spectrum.csv")]
    assert lam == pytest.approx([6, 9, 14, 21, 30], abs=1e-10)


def test_seventeen_digits(tmp_path):
    cfg = write_cfg(tmp_path, potential="step(2, pi/2)", N=3)
    cli.main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "o")])
    row = read_rows(tmp_path / "o" / "spectrum.csv")[0]
    assert float(row["re_lambda"]) == pytest.approx(1.9481846230262246895, abs=1e-14)
    assert len(row["re_lambda"].replace(".", "").lstrip("0")) == 17


@pytest.mark.parametrize(
    "data,field",
    [
        ({"potential": "zero"}, "N"),
        ({"N": 3}, "potential"),
        ({"potential": "zero", "N": 0}, "N"),
        ({"potential": "zero", "N": 3, "tol": 1e-2}, "tol"),
        ({"potential": "zero", "N": 3, "alpha": -1}, "alpha"),
        ({"potential": "nope(1)", "N": 3}, "potential"),
        ({"potential": "zero", "N": 3, "colour": "red"}, "colour"),
        ({"potential": "zero", "N": 3, "checks": ["bogus"]}, "checks"),
        ({"potential": "zero", "N": 3, "eigenfunction_range": [2, 9]}, "eigenfunction_range"),
        ({"potential": {"samples": "missing.csv"}, "N": 3}, "potential"),
    ],
)
def test_config_errors_name_the_field(tmp_path, capsys, data, field):
    cfg = write_cfg(tmp_path, **data)
    assert cli.main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert f"'{field}'" in err


def test_json_syntax_error_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "N": 3,\n  "potential": zero\n}', encoding="utf-8")
    assert cli.main(["spectrum", "--config", str(path)]) == cli.EXIT_CONFIG
    assert "line 3" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert cli.main(["spectrum", "--config", str(tmp_path / "none.json")]) == cli.EXIT_CONFIG


def test_seed_override_only_for_rough(tmp_path, capsys):
    cfg = write_cfg(tmp_path, potential="zero", N=2)
    assert cli.main(["spectrum", "--config", str(cfg), "--seed", "3"]) == cli.EXIT_CONFIG


def test_eigenfunctions_zero(tmp_path):
    cfg = write_cfg(tmp_path, potential="zero", N=3, eigenfunction_range=[1, 2])
    assert cli.main(["eigenfunctions", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = read_rows(tmp_path / "o" / "eigenfunction_00001.csv")
    x = np.array([float(r["x"]) for r in rows])
    y = np.array([float(r["re_y"]) for r in rows])
    assert np.max(np.abs(y - math.sqrt(2 / PI) * np.sin(x))) <= 1e-8
    summary = read_rows(tmp_path / "o" / "remainders.csv")
    assert [r["n"] for r in summary] == ["1", "2"]


def test_eigenfunctions_real_step_y_equals_v(tmp_path):
    cfg = write_cfg(tmp_path, potential="step(2, pi/2)", N=4)
    assert cli.main(["eigenfunctions", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    for n in range(1, 5):
        rows = read_rows(tmp_path / "o" / f"eigenfunction_{n:05d}.csv")
        for r in rows[::50]:
            assert float(r["re_y"]) == pytest.approx(float(r["re_v"]), abs=1e-12)
            assert float(r["im_y"]) == pytest.approx(float(r["im_v"]), abs=1e-12)


def test_eigenfunctions_complex_step_trend(tmp_path):
    cfg = write_cfg(tmp_path, potential="step(2i, pi/2)", N=100, eigenfunction_range=[20, 100])
    assert cli.main(["eigenfunctions", "--config", str(cfg), "--out", str(tmp_path / "o"), "--threads", "2"]) == 0
    summary = read_rows(tmp_path / "o" / "remainders.csv")
    n = np.array([int(r["n"]) for r in summary], float)
    ry = np.array([float(r["r_y"]) for r in summary])
    slope = np.polyfit(n, ry, 1)[0]
    assert slope < 0


def test_reports_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path, potential="rough_fourier(0.6, 16, 7)", N=8)
    for out in ("a", "b"):
        assert cli.main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / out), "--threads", "3"]) == 0
    assert (tmp_path / "a" / "spectrum.csv").read_bytes() == (tmp_path / "b" / "spectrum.csv").read_bytes()
    cli.main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "c"), "--threads", "1"])
    assert (tmp_path / "a" / "spectrum.csv").read_bytes() == (tmp_path / "c" / "spectrum.csv").read_bytes()


def test_seed_and_mean_zero_flags(tmp_path):
    cfg = write_cfg(tmp_path, potential="rough_fourier(0.6, 16, 7)", N=4)
    cli.main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "a")])
    cli.main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "8"])
    cli.main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "c"), "--mean-zero"])
    a = read_rows(tmp_path / "a" / "spectrum.csv")
    b = read_rows(tmp_path / "b" / "spectrum.csv")
    c = read_rows(tmp_path / "c" / "spectrum.csv")
    assert a[0]["re_lambda"] != b[0]["re_lambda"]
    # the eigenvalues do not depend on the gauge
    assert float(a[0]["re_lambda"]) == pytest.approx(float(c[0]["re_lambda"]), abs=1e-9)


def test_n_override(tmp_path):
    cfg = write_cfg(tmp_path, potential="zero", N=3)
    cli.main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "o"), "--n", "6"])
    assert len(read_rows(tmp_path / "o" / "spectrum.csv")) == 6


def test_verify_zero(tmp_path):
    cfg = write_cfg(tmp_path, potential="zero", N=6)
    assert cli.main(["verify", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "verify.json").read_text())
    statuses = {c["name"]: c for c in report["checks"]}
    assert statuses["eigenvalue_asymptotics"]["status"] == "skipped"
    assert "degenerate-Upsilon" in statuses["eigenvalue_asymptotics"]["note"]
    for c in report["checks"]:
        assert set(c) >= {"name", "status", "measured", "threshold"}
        assert c["status"] in ("pass", "skipped")


def test_verify_delta(tmp_path):
    cfg = write_cfg(tmp_path, potential="step(2, pi/2)", N=30,
                    checks=["biorthogonality", "normalization_identity", "completeness"])
    assert cli.main(["verify", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "verify.json").read_text())
    for c in report["checks"]:
        assert c["status"] == "pass"
        assert c["measured"] < 1e-6 or c["name"] == "completeness"


def test_verify_rough_comparability(tmp_path):
    cfg = write_cfg(tmp_path, potential="rough_fourier(0.6, 64, 7)", N=10, checks=["upsilon_comparability"])
    assert cli.main(["verify", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    c = json.loads((tmp_path / "o" / "verify.json").read_text())["checks"][0]
    assert c["status"] == "pass" and c["measured"] <= 1.0


def test_verify_failure_exit_code(tmp_path, monkeypatch):
    from distsl import diagnostics

    def failing(*args, **kwargs):
        return diagnostics.Check("characteristic_residual", diagnostics.FAIL, 1.0, 1e-9)

    monkeypatch.setattr(diagnostics, "check_residuals", failing)
    cfg = write_cfg(tmp_path, potential="zero", N=2, checks=["characteristic_residual"])
    assert cli.main(["verify", "--config", str(cfg), "--out", str(tmp_path / "o")]) == cli.EXIT_VERIFY


def test_solver_failure_exit_code(tmp_path, monkeypatch):
    from distsl import spectrum

    def boom(*args, **kwargs):
        raise spectrum.CompletenessError("forced", (0, 1, 0, 1))

    monkeypatch.setattr(spectrum, "compute_spectrum", boom)
    cfg = write_cfg(tmp_path, potential="zero", N=2)
    assert cli.main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "o")]) == cli.EXIT_SOLVER


def test_samples_config(tmp_path):
    (tmp_path / "u.csv").write_text("x,u\n0,0\n1.5707963267948966,1\n3.141592653589793,0\n", encoding="utf-8")
    cfg = write_cfg(tmp_path, potential={"samples": "u.csv"}, N=3)
    assert cli.main(["spectrum", "--config", str(cfg)]) == 0
    assert (tmp_path / "results" / "spectrum.csv").exists()


def test_module_entry_point(tmp_path):
    cfg = write_cfg(tmp_path, potential="zero", N=2)
    proc = subprocess.run([sys.executable, "-m", "distsl", "spectrum", "--config", str(cfg), "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr


def test_verify_opt_in_gauge(tmp_path):
    cfg = write_cfg(tmp_path, potential="sawtooth(1.5, 3)", N=12, checks=["gauge_invariance"])
    assert cli.main(["verify", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    c = json.loads((tmp_path / "o" / "verify.json").read_text())["checks"][0]
    assert c["name"] == "gauge_invariance" and c["measured"] <= 1e-8
