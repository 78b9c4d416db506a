import json

import pytest

from qfree.cli import main, to_json


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_bounds_example(capsys):
    code, out, _ = run(capsys, "bounds", "--q", "0.02", "--n", "2")
    assert code == 0
    rep = json.loads(out)
    assert rep["eta"] == pytest.approx(1.99840, abs=1e-5)
    assert rep["threshold"] == "1/34"


def test_bounds_outside_range(capsys):
    code, out, _ = run(capsys, "bounds", "--q", "0.1", "--N", "2")
    assert code == 0 and json.loads(out)["status"] == "outside proven range"


def test_bounds_grid(capsys):
    code, out, _ = run(capsys, "bounds", "--N", "2", "--grid", "0.02,0.01,0.001")
    assert code == 0 and json.loads(out)["monotone_toward_N"] is True


def test_gram_both(capsys):
    code, out, _ = run(capsys, "gram", "--n", "2", "--N", "2", "--q", "0.1", "--method", "both")
    rep = json.loads(out)
    assert code == 0 and rep["match"] and rep["max_abs_diff"] <= 1e-12


def test_missing_required_flag_is_usage_error(capsys):
    code, _, err = run(capsys, "gram")
    assert code == 1 and "usage" in err


def test_unknown_flag_and_subcommand(capsys):
    assert run(capsys, "gram", "--n", "2", "--bogus")[0] == 1
    assert run(capsys, "nope")[0] == 1


def test_validation_errors(capsys):
    assert run(capsys, "gram", "--n", "2", "--q", "1.5")[0] == 2
    assert run(capsys, "gram", "--n", "0")[0] == 2
    assert run(capsys, "wick", "--word", "3", "--N", "2")[0] == 2


def test_empty_criterion_list(capsys):
    assert run(capsys, "verify-all", "--criteria", "")[0] == 2


def test_verify_all_subset_and_literal(capsys):
    code, out, err = run(capsys, "verify-all", "--criteria", "7,10", "--force-literal")
    rep = json.loads(out)
    assert code == 0 and rep["all_passed"]
    lit = [c for c in rep["criteria"] if c["expected_failure"]]
    assert len(lit) == 1 and not lit[0]["passed"]
    assert "XFAIL" in err


def test_wick_output(capsys, tmp_path):
    code, out, _ = run(capsys, "wick", "--word", "1 1 1", "--N", "1", "--q", "0.3", "--out", str(tmp_path))
    rep = json.loads(out)
    assert code == 0 and rep["coefficients"]["1"] == pytest.approx(-2.3)
    assert (tmp_path / "wick.csv").read_text().startswith("word,coefficient")
    assert (tmp_path / "wick.txt").read_text().startswith("N=1 arity=1")


def test_xi_text_output(capsys, tmp_path):
    code, _, _ = run(capsys, "xi", "--q", "0.1", "--N", "1", "--D", "1", "--out", str(tmp_path))
    from qfree.ncalg import Tensor2Series, loads
    t = loads((tmp_path / "xi.txt").read_text())
    assert code == 0 and isinstance(t, Tensor2Series) and len(t.terms) == 2


def test_fisher_q0(capsys):
    code, out, _ = run(capsys, "fisher", "--q", "0", "--N", "2", "--D", "0")
    rep = json.loads(out)
    assert code == 0 and rep["phi_star"] == 2 and rep["C"] == pytest.approx(2 ** 0.5 / 2)
    assert set(rep) >= {"q", "N", "D", "xi_norms", "phi_star", "C", "tail_bound"}


def test_stationarity_report(capsys):
    code, out, _ = run(capsys, "stationarity", "--q", "0", "--N", "1", "--D", "0", "--degree", "4")
    rep = json.loads(out)
    assert code == 0 and rep["max"] <= 1e-12
    assert set(rep) >= {"residuals", "max", "tail_budget", "t0", "K", "C"}


def test_config_overrides_flags_and_is_deterministic(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# OU run\nK=12\ndt=0.01\nT=0.03\nseed=5\nN=1\n")
    a = run(capsys, "simulate", "--K", "99", "--config", str(cfg), "--out", str(tmp_path / "a"))
    b = run(capsys, "simulate", "--config", str(cfg), "--out", str(tmp_path / "b"))
    assert a[0] == b[0] == 0
    assert json.loads(a[1])["K"] == 12
    assert (tmp_path / "a" / "simulate.json").read_bytes() == (tmp_path / "b" / "simulate.json").read_bytes()
    assert (tmp_path / "a" / "simulate.csv").read_text().startswith("seed,t,word,trace")


def test_bad_config_key(capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour=blue\n")
    assert run(capsys, "gram", "--n", "1", "--config", str(cfg))[0] == 2


def test_output_dir_from_environment(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("QFREE_OUTPUT_DIR", str(tmp_path))
    assert run(capsys, "bounds", "--q", "0.01")[0] == 0
    assert (tmp_path / "bounds.json").exists()


def test_guard_exit_code(capsys):
    code, out, _ = run(capsys, "simulate", "--N", "1", "--K", "10", "--T", "0.02", "--dt", "0.01",
                       "--norm-guard", "0.1")
    assert code == 3 and json.loads(out)["guard_tripped"] is True


def test_coupling_command(capsys):
    code, out, _ = run(capsys, "coupling", "--N", "1", "--K", "30", "--dt", "1e-3", "--tmin", "1e-2",
                       "--tmax", "5e-2", "--points", "4")
    assert code == 0 and json.loads(out)["slope"] > 0.5


def test_json_seventeen_digits():
    assert to_json({"x": 0.1}).strip() == '{\n  "x": 0.10000000000000001\n}'
    assert json.loads(to_json({"y": float("nan")}))["y"] is None
