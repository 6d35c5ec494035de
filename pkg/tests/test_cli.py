import shutil
import subprocess

import numpy as np
import pytest

from ssalpha.cli import main
from ssalpha.sim_harness import aggregate, read_aggregate_csv, read_records_csv
from ssalpha.stable_core import StableParams, sample_stable


@pytest.fixture
def cauchy_file(tmp_path):
    x = sample_stable(StableParams(1.0), 300, np.random.default_rng(42))
    path = tmp_path / "data.txt"
    path.write_text("# Cauchy sample\n" + "\n".join(repr(float(v)) for v in x) + "\n")
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_estimate_cauchy_file(capsys, cauchy_file, tmp_path):
    out_csv = tmp_path / "sigma.csv"
    code, out, _ = run(capsys, "estimate", cauchy_file, "--out", out_csv)
    assert code == 0
    a1 = float(next(line for line in out.splitlines() if "alpha1" in line).split()[-1])
    assert 0.7 <= a1 <= 1.3
    rows = out_csv.read_text().strip().splitlines()
    assert len(rows) == 251


def test_estimate_is_deterministic(capsys, cauchy_file):
    _, out1, _ = run(capsys, "estimate", cauchy_file, "--B", 20, "--seed", 3)
    _, out2, _ = run(capsys, "estimate", cauchy_file, "--B", 20, "--seed", 3)
    assert out1 == out2
    _, out3, _ = run(capsys, "estimate", cauchy_file, "--B", 20, "--seed", 4)
    assert out3 != out1


def test_estimate_short_file(capsys, tmp_path):
    path = tmp_path / "short.txt"
    path.write_text("1\n2\n3\n4\n5\n")
    code, _, err = run(capsys, "estimate", path, "--size", 300)
    assert code == 2 and err


def test_estimate_bad_inputs(capsys, tmp_path, cauchy_file):
    assert run(capsys, "estimate", tmp_path / "missing.txt")[0] == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("1\nfoo\n")
    assert run(capsys, "estimate", bad)[0] == 2
    # n + 2m cannot equal the requested size
    assert run(capsys, "estimate", cauchy_file, "--size", 300, "--n", 11)[0] == 2
    assert run(capsys, "estimate", cauchy_file, "--size", 300, "--n", 10, "--m", 10)[0] == 2


def test_estimate_longer_file_uses_prefix(capsys, cauchy_file):
    code, _, err = run(capsys, "estimate", cauchy_file, "--size", 150, "--B", 5)
    assert code == 0 and "first 150" in err


def test_estimate_all_splits_fail(capsys, tmp_path):
    path = tmp_path / "ties.txt"
    vals = np.r_[np.zeros(240), np.random.default_rng(7).normal(size=60)]
    path.write_text("\n".join(map(str, vals)))
    code, _, _ = run(capsys, "estimate", path, "--B", 20)
    assert code == 3


def test_perm_count(capsys):
    code, out, _ = run(capsys, "perm-count", "--n", 10, "--m", 10)
    assert code == 0
    assert "71383376298044210400000" in out
    assert "7.138338e+22" in out


def test_sample_command(capsys, tmp_path):
    code, out, _ = run(capsys, "sample", "--alpha", 1.5, "--beta", 0.3, "--count", 5, "--seed", 9)
    assert code == 0
    values = [float(v) for v in out.splitlines() if not v.startswith("#")]
    expected = sample_stable(StableParams(1.5, 0.3), 5, np.random.default_rng(9))
    assert np.array_equal(values, expected)
    assert run(capsys, "sample", "--alpha", 2.5, "--count", 5)[0] == 2


def test_simulate_csv_matches_stdout(capsys, tmp_path):
    rec, agg = tmp_path / "r.csv", tmp_path / "a.csv"
    code, out, _ = run(capsys, "simulate", "--alpha", 1, "--size", 150, "--B", 3, "--N", 4,
                       "--estimators", "sse,mqe", "--records", rec, "--aggregate", agg,
                       "--threads", 1)
    assert code == 0
    rows = read_aggregate_csv(agg)
    recomputed = aggregate(read_records_csv(rec), 1.0)
    printed = {line.split()[0]: line.split() for line in out.splitlines()[2:]}
    for row in rows:
        est = row["estimator"]
        assert abs(recomputed[est].rmse - row["rmse"]) <= 1e-12
        assert abs(recomputed[est].bias - row["bias"]) <= 1e-12
        assert float(printed[est][1]) == pytest.approx(row["bias"], abs=5e-4)
        assert float(printed[est][2]) == pytest.approx(row["rmse"], abs=5e-4)


def test_simulate_invalid_spec(capsys):
    assert run(capsys, "simulate", "--alpha", 1, "--size", 301, "--N", 1)[0] == 2
    assert run(capsys, "simulate", "--alpha", 3, "--size", 300, "--N", 1)[0] == 2
    assert run(capsys, "simulate", "--size", 300, "--N", 1, "--estimators", "mle")[0] == 2


def test_curve_single_point(capsys, tmp_path):
    out_csv = tmp_path / "c.csv"
    code, _, _ = run(capsys, "curve", "--alphas", 1.2, "--size", 150, "--B", 2, "--N", 3,
                     "--estimators", "sse", "--threads", 1, "--out", out_csv)
    assert code == 0
    lines = out_csv.read_text().strip().splitlines()
    assert lines[0] == "alpha,estimator,rmse,smoothed"
    a1 = [line for line in lines[1:] if ",sse9_a1," in line]
    assert len(a1) == 1


def test_entry_point_installed():
    exe = shutil.which("ssalpha")
    if exe is None:
        pytest.skip("console script not on PATH")
    res = subprocess.run([exe, "perm-count", "--n", "0", "--m", "1"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.split()[0] == "1"
