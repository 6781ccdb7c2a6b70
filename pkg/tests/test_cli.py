import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from divlab import cli
from divlab.errors import NumericalError

GOLDEN = Path(__file__).parent / "golden"


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def strip_wall_time(text):
    doc = json.loads(text)
    doc["run"].pop("wall_time_s")
    return json.dumps(doc, sort_keys=True)


def test_eval_examples(capsys):
    doc = run_json(capsys, "eval", "--scheme", "no-div", "--snr-db", "0", "--rate", "1", "--bw-ratio", "1")
    assert doc["result"]["expected"] == pytest.approx(0.65511302, abs=1e-8)
    assert set(doc["result"]) >= {"outcome_probs", "outcome_distortions", "expected", "variance"}
    doc = run_json(capsys, "eval", "--scheme", "rc", "--snr-db", "0", "--bw-ratio", "0.5")
    assert doc["result"]["expected"] == pytest.approx(0.355624, abs=1e-5)
    doc = run_json(
        capsys, "eval", "--scheme", "scdiv", "--snr-db", "0", "--rate", "0.5", "--bw-ratio", "1", "--d-side", "0.5"
    )
    assert doc["result"]["expected"] == pytest.approx(0.48471876, abs=1e-8)
    assert doc["run"]["tool"] == "divlab" and "version" in doc["run"]


@pytest.mark.parametrize(
    "argv",
    [
        ["eval", "--scheme", "bogus", "--snr-db", "0"],
        ["eval", "--scheme", "scdiv", "--snr-db", "0", "--rate", "1"],
        ["eval", "--scheme", "scdiv", "--snr-db", "0", "--rate", "0.5", "--d-side", "0.1"],
        ["eval", "--scheme", "no-div", "--snr-db", "0", "--rate", "-1"],
        ["eval", "--scheme", "no-div"],
    ],
)
def test_validation_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and "error" in err


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        cli.main(["eval", "--snr-db", "abc"])
    assert info.value.code == 2


def test_numerical_failure_exit_3(capsys, monkeypatch):
    def boom(cfg, *a, **k):
        raise NumericalError("quadrature did not converge", error_estimate=1.5e-3)

    monkeypatch.setattr(cli, "evaluate", boom)
    code, _, err = run(capsys, "eval", "--scheme", "opt-ccdiv", "--snr-db", "0", "--rate", "1")
    assert code == 3
    assert "achieved error estimate 0.0015" in err


def test_optimize_examples(capsys):
    doc = run_json(capsys, "optimize", "--scheme", "no-div", "--snr-db", "20", "--bw-ratio", "1")
    assert doc["result"]["best_expected"] == pytest.approx(0.030975097, abs=1e-8)
    code, _, err = run(capsys, "optimize", "--scheme", "rc", "--snr-db", "20")
    assert code == 2 and "rc has no rate parameter" in err
    sc = run_json(capsys, "optimize", "--scheme", "scdiv", "--snr-db", "20")
    assert sc["result"]["best_expected"] <= doc["result"]["best_expected"]
    assert sc["result"]["best_d_side"] is not None


def test_optimize_pinned_warning(capsys):
    doc = run_json(capsys, "optimize", "--scheme", "no-div", "--snr-db", "120", "--r-hi", "4")
    assert doc["result"]["pinned"] is True
    assert "warning" in doc["result"]


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_sweep_all_schemes(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    code, _, _ = run(capsys, "sweep", "--schemes", "all", "--snr-db", "0:40:5", "--bw-ratio", "1", "--output", str(out), "--jobs", "2")
    assert code == 0
    text = out.read_text(encoding="utf-8")
    assert text.splitlines()[0] == ",".join(cli.SWEEP_COLUMNS)
    rows = read_csv(text)
    assert len(rows) == 63
    assert [(r["scheme"], float(r["snr_db"])) for r in rows] == sorted((r["scheme"], float(r["snr_db"])) for r in rows)
    by_scheme = {}
    for r in rows:
        by_scheme.setdefault(r["scheme"], []).append(float(r["expected_distortion"]))
    assert len(by_scheme) == 7
    for values in by_scheme.values():
        assert all(b <= a for a, b in zip(values, values[1:]))
    assert all(r["best_rate"] == "" for r in rows if r["scheme"] == "rc")
    assert all(r["best_d_side"] != "" for r in rows if r["scheme"].startswith("scdiv"))
    meta = json.loads((tmp_path / "sweep.csv.run.json").read_text())
    assert meta["run"]["config"]["snr_db"] == "0:40:5"


def test_sweep_golden_file(capsys):
    code, out, err = run(capsys, "sweep", "--schemes", "all", "--snr-db", "0:20:10", "--bw-ratio", "1", "--jobs", "1")
    assert code == 0
    assert out == (GOLDEN / "sweep_all_0_20_10.csv").read_text(encoding="utf-8")
    assert json.loads(err)["run"]["command"] == "sweep"


def test_sweep_replay_from_run_record(tmp_path, capsys):
    first = tmp_path / "a.csv"
    run(capsys, "sweep", "--schemes", "no-div,rc", "--snr-db", "0:30:10", "--output", str(first), "--jobs", "1")
    second = tmp_path / "b.csv"
    code, _, _ = run(capsys, "sweep", "--config", str(first) + ".run.json", "--output", str(second), "--jobs", "1")
    assert code == 0
    assert first.read_bytes() == second.read_bytes()


def test_sweep_json(capsys):
    doc = run_json(capsys, "sweep", "--schemes", "sel-ccdiv", "--snr-db", "0:10:10", "--format", "json", "--jobs", "1")
    assert [r["snr_db"] for r in doc["rows"]] == [0.0, 10.0]
    assert doc["run"]["config"]["schemes"] == "sel-ccdiv"


def test_sweep_partial_failure_exit_4(capsys, monkeypatch):
    real = cli.optimize

    def flaky(kind, *a, **k):
        if kind.value == "opt-ccdiv":
            raise NumericalError("quadrature did not converge", 2e-4)
        return real(kind, *a, **k)

    monkeypatch.setattr(cli, "optimize", flaky)
    code, out, err = run(capsys, "sweep", "--schemes", "no-div,opt-ccdiv", "--snr-db", "0:10:10", "--jobs", "1")
    assert code == 4
    rows = read_csv(out)
    assert out.splitlines()[0] == ",".join(cli.SWEEP_COLUMNS + ["error"])
    assert [bool(r["error"]) for r in rows] == [False, False, True, True]
    assert "failed" in err


@pytest.mark.parametrize("grid", ["0:40", "10:0:5", "0:10:0", "a:b:c"])
def test_sweep_bad_range_exit_2(capsys, grid):
    code, _, _ = run(capsys, "sweep", "--snr-db", grid)
    assert code == 2


def test_exponent_examples(capsys):
    doc = run_json(capsys, "exponent", "--scheme", "sel-ccdiv", "--snr-db", "30:60", "--points", "16")
    assert doc["result"]["delta"] == pytest.approx(1.0, abs=0.07)
    doc = run_json(capsys, "exponent", "--scheme", "rc", "--snr-db", "30:60")
    assert doc["result"]["delta"] == pytest.approx(2.0, abs=0.1)
    code, _, _ = run(capsys, "exponent", "--scheme", "rc", "--snr-db", "30:40")
    assert code == 2


def test_mc_deterministic_across_runs_and_jobs(capsys):
    argv = ["mc", "--scheme", "scdiv-jd", "--snr-db", "3", "--rate", "0.7", "--d-side", "0.5", "--samples", "200000", "--seed", "99"]
    _, a, _ = run(capsys, *argv, "--jobs", "1")
    _, b, _ = run(capsys, *argv, "--jobs", "1")
    _, c, _ = run(capsys, *argv, "--jobs", "3")
    assert strip_wall_time(a) == strip_wall_time(b) == strip_wall_time(c)
    assert json.loads(a)["run"]["seed"] == 99
    assert json.loads(a)["result"]["seed"] == 99


def test_mc_agrees_with_eval(capsys):
    mc = run_json(capsys, "mc", "--scheme", "opt-ccdiv", "--snr-db", "0", "--rate", "1", "--samples", "1000000", "--seed", "7")
    ev = run_json(capsys, "eval", "--scheme", "opt-ccdiv", "--snr-db", "0", "--rate", "1")
    assert abs(mc["result"]["mean"] - ev["result"]["expected"]) <= 3 * mc["result"]["stderr"]


def test_mc_sample_floor(capsys):
    code, _, _ = run(capsys, "mc", "--scheme", "no-div", "--snr-db", "0", "--rate", "1", "--samples", "10")
    assert code == 2


def test_mc_uses_env_jobs(capsys, monkeypatch):
    monkeypatch.setenv("DIVLAB_JOBS", "2")
    assert cli.default_jobs() == 2
    monkeypatch.setenv("DIVLAB_JOBS", "x")
    code, _, _ = run(capsys, "mc", "--scheme", "no-div", "--snr-db", "0", "--rate", "1", "--samples", "1000")
    assert code == 2


def test_md_curve(capsys):
    code, out, err = run(capsys, "md-curve", "--rate-sum", "1", "--points", "3")
    assert code == 0
    assert json.loads(err)["run"]["config"]["rate_sum"] == 1.0
    rows = [tuple(map(float, r)) for r in list(csv.reader(io.StringIO(out)))[1:]]
    assert out.splitlines()[0] == "d_side,d_central"
    assert rows[0] == (0.5, pytest.approx(1 / 3, abs=1e-9))
    assert rows[-1] == (0.625, 0.25)
    assert rows[0][0] < rows[1][0] < rows[2][0]
    assert rows[0][1] >= rows[1][1] >= rows[2][1]
    code, _, _ = run(capsys, "md-curve", "--rate-sum", "0")
    assert code == 2


def test_config_file_and_flag_override(tmp_path, capsys):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"scheme": "no-div", "snr-db": 0, "rate": 1, "bw_ratio": 1}))
    a = run_json(capsys, "eval", "--config", str(conf))
    assert a["result"]["expected"] == pytest.approx(0.65511302, abs=1e-8)
    b = run_json(capsys, "eval", "--config", str(conf), "--rate", "0")
    assert b["result"]["expected"] == 1.0


def test_eval_replay_is_bit_exact(tmp_path, capsys):
    _, out, _ = run(capsys, "eval", "--scheme", "opt-ccdiv", "--snr-db", "7", "--rate", "1.3", "--bw-ratio", "0.7")
    saved = tmp_path / "out.json"
    saved.write_text(out)
    _, again, _ = run(capsys, "eval", "--config", str(saved))
    assert strip_wall_time(out) == strip_wall_time(again)


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "divlab", "eval", "--scheme", "sel-ccdiv", "--snr-db", "0", "--rate", "1"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["expected"] == pytest.approx(0.5496823, abs=1e-7)
