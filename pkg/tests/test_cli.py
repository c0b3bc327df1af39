import csv
import json

import pytest

from multisym import cli

SMALL_EVOLVE = ["--nx", "16", "--nt", "12", "--dx", "0.2", "--dt", "0.1"]
SMALL_PERTURB = ["--nx", "32", "--nt", "48", "--dx", "0.125", "--dt", "0.0625", "--t1", "2.0"]


def _header(path):
    with open(path, newline="") as fh:
        return next(csv.reader(fh))


def _is_sorted_json(path):
    text = path.read_text()
    data = json.loads(text)
    return text == json.dumps(data, sort_keys=True, indent=2) + "\n"


def test_unknown_flag_is_usage_error(capsys):
    assert cli.main(["evolve", "--bogus"]) == 2
    assert cli.main([]) == 2


def test_cfl_violation_is_usage_error(capsys):
    assert cli.main(["evolve", "--dx", "0.1", "--dt", "0.2"]) == 2
    assert "dt/dx" in capsys.readouterr().err


def test_bad_thread_count(monkeypatch, capsys):
    monkeypatch.setenv("MULTISYM_THREADS", "zero")
    assert cli.main(["suite", "--only", "11"]) == 2


def test_evolve_rerun_is_byte_identical(tmp_path):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["evolve", *SMALL_EVOLVE, "--lambda", "0.3", "--init", "noise:4"]
    assert cli.main([*args, "--out", str(first)]) == 0
    assert cli.main(["evolve", "--config", str(first.with_suffix(".json")), "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    header = _header(first)
    assert header[0] == "t" and header[1] == "phi_0" and header[-1] == "e_15"
    assert _is_sorted_json(first.with_suffix(".json"))


def test_config_with_unknown_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"config": {"bogus": 1}}))
    assert cli.main(["evolve", "--config", str(cfg)]) == 2


def test_legendre_table(tmp_path):
    out = tmp_path / "leg.csv"
    assert cli.main(["legendre", "--problem", "harmonic", "--points", "5", "--out", str(out)]) == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 5 and "abs_error" in rows[0]


def test_legendre_impossible_tolerance_fails(tmp_path):
    assert cli.main(["legendre", "--problem", "maxwell", "--points", "5", "--tol", "-1",
                     "--out", str(tmp_path / "x.csv")]) == 1


def test_verify_bracket(tmp_path):
    out = tmp_path / "v.json"
    assert cli.main(["verify", "--check", "bracket", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["pass"] is True
    assert _is_sorted_json(out)


def test_verify_bad_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"levels": 1}))
    assert cli.main(["verify", "--check", "flow", "--config", str(cfg)]) == 2


def test_verify_failing_check_exits_one(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"gap_tol": -1.0, "trials": 5}))
    assert cli.main(["verify", "--check", "observable", "--config", str(cfg), "--out", str(tmp_path / "r.json")]) == 1


def test_perturb_slopes(tmp_path):
    out = tmp_path / "p.csv"
    assert cli.main(["perturb", "--n-lambda", "4", *SMALL_PERTURB, "--out", str(out)]) == 0
    assert _header(out) == ["lambda", "R1", "R2", "volume", "slope1", "slope2"]
    verdict = json.loads(out.with_suffix(".json").read_text())
    assert verdict["pass"] and abs(verdict["slope2"] - 2.0) <= 0.2
    assert _is_sorted_json(out.with_suffix(".json"))


def test_perturb_lambda_zero_has_null_slopes(tmp_path):
    out = tmp_path / "z.csv"
    code = cli.main(["perturb", "--lambda-min", "0", "--lambda-max", "0", *SMALL_PERTURB, "--out", str(out)])
    assert code == 0
    verdict = json.loads(out.with_suffix(".json").read_text())
    assert verdict["slope1"] is None and verdict["slope2"] is None
    with open(out, newline="") as fh:
        row = list(csv.DictReader(fh))[0]
    assert row["slope1"] == "" and float(row["lambda"]) == 0.0


def test_perturb_rerun_from_verdict(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["perturb", "--n-lambda", "3", *SMALL_PERTURB, "--out", str(a)]) == 0
    assert cli.main(["perturb", "--config", str(a.with_suffix(".json")), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_perturb_bad_inputs():
    assert cli.main(["perturb", "--lambda-min", "0.2", "--lambda-max", "0.1"]) == 2
    assert cli.main(["perturb", "--phi1", "bessel"]) == 2
    assert cli.main(["perturb", "--t0", "3.0", "--t1", "1.0"]) == 2


@pytest.mark.parametrize("lo,hi,n,want", [(0.0, 0.0, 5, (0.0,)), (0.1, 0.1, 1, (0.1,)), (0.0, 1.0, 3, (0.0, 0.5, 1.0))])
def test_lambda_grid(lo, hi, n, want):
    assert cli.lambda_grid(lo, hi, n) == pytest.approx(want)


def test_suite_single_criterion(tmp_path, capsys):
    out = tmp_path / "s.json"
    assert cli.main(["suite", "--quick", "--only", "11", "--out", str(out)]) == 0
    assert "PASS" in capsys.readouterr().out
    report = json.loads(out.read_text())
    assert report["passed"] and [c["number"] for c in report["criteria"]] == [11]
    assert cli.main(["suite", "--only", "x"]) == 2
