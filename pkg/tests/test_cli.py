import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from stablemcd.cli import ARGMIN_KEYS, ESTIMATE_KEYS, RunConfig, UsageError, main
from stablemcd.csvio import DataFormatError, read_matrix, write_matrix


def run(argv, capsys=None):
    code = main(argv)
    if capsys is not None:
        out, err = capsys.readouterr()
        return code, out, err
    return code


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def planted(tmp_path_factory):
    d = tmp_path_factory.mktemp("planted")
    assert main(["simulate", "--protocol", "highdim", "--n", "60", "--p", "80", "--eps", "0.25",
                 "--l", "2", "--seed", "3", "--out", str(d), "--quiet"]) == 0
    return d


def test_simulate_outputs(planted):
    X, _ = read_matrix(planted / "X.csv")
    assert X.shape == (60, 80)
    truth = [int(r["label"]) for r in read_csv(planted / "truth.csv")]
    assert sum(truth) == 15 and truth[-15:] == [1] * 15


def test_simulate_round_trip_is_lossless(planted):
    from stablemcd.simgen import gen_highdim
    X, _ = read_matrix(planted / "X.csv")
    np.testing.assert_array_equal(X, gen_highdim(60, 80, 0.25, 2, seed=3).X)


def test_simulate_protocol_examples(tmp_path, capsys):
    code, out, _ = run(["simulate", "--protocol", "masking", "--setting", "1", "--out", str(tmp_path), "--quiet"], capsys)
    assert code == 0 and json.loads(out)["n"] == 1000
    assert read_matrix(tmp_path / "X.csv")[0].shape == (1000, 1)
    code = run(["simulate", "--protocol", "overdetermined", "--n", "50", "--p", "4", "--eps", "0",
                "--kind", "radial", "--out", str(tmp_path / "o"), "--quiet"])
    assert code == 0
    assert all(r["label"] == "0" for r in read_csv(tmp_path / "o" / "truth.csv"))


def test_detect_planted(planted, tmp_path, capsys):
    code, out, _ = run(["detect", "--input", str(planted / "X.csv"), "--h", "0.75", "--q", "2",
                        "--out", str(tmp_path), "--quiet"], capsys)
    assert code == 0
    assert json.loads(out)["outliers"] == 15
    rows = read_csv(tmp_path / "labels.csv")
    assert list(rows[0]) == ["row_index", "label", "depth"]
    truth = [int(r["label"]) for r in read_csv(planted / "truth.csv")]
    assert [int(r["label"]) for r in rows] == truth
    assert all(0.0 <= float(r["depth"]) <= 1.0 for r in rows)
    est = json.loads((tmp_path / "estimates.json").read_text())
    assert tuple(est) == ESTIMATE_KEYS
    assert est["h"] == 45 and est["q"] == 2 and est["converged"] is True
    assert np.array(est["sigma"]).shape == (2, 2) and np.array(est["V_q"]).shape == (80, 2)


def test_detect_h_equals_n(planted, tmp_path):
    assert run(["detect", "--input", str(planted / "X.csv"), "--h", "60", "--q", "2",
                "--out", str(tmp_path), "--quiet"]) == 0
    assert all(r["label"] == "0" for r in read_csv(tmp_path / "labels.csv"))


def test_detect_json_format(planted, tmp_path):
    assert run(["detect", "--input", str(planted / "X.csv"), "--h", "45", "--q", "2",
                "--format", "json", "--out", str(tmp_path), "--quiet"]) == 0
    recs = json.loads((tmp_path / "labels.json").read_text())
    assert len(recs) == 60 and set(recs[0]) == {"row_index", "label", "depth"}


def test_path_then_detect_from_argmin(planted, tmp_path, capsys):
    out_dir = tmp_path / "p"
    code, out, err = run(["path", "--input", str(planted / "X.csv"), "--h-grid", "0.6,0.75", "--q-grid", "2",
                          "--pairs", "3", "--out", str(out_dir)], capsys)
    assert code == 0
    assert "bootstrap pair 3/3 done" in err
    rows = read_csv(out_dir / "instability.csv")
    assert list(rows[0]) == ["h_frac", "h", "q", "s_hat", "std_err", "B"]
    assert [r["h"] for r in rows] == ["36", "45"]
    am = json.loads((out_dir / "argmin.json").read_text())
    assert tuple(am) == ARGMIN_KEYS
    assert (am["h"], am["q"]) == (45, 2)
    assert run(["detect", "--input", str(planted / "X.csv"), "--argmin", str(out_dir / "argmin.json"),
                "--out", str(tmp_path / "d"), "--quiet"]) == 0
    assert sum(int(r["label"]) for r in read_csv(tmp_path / "d" / "labels.csv")) == 15


def test_path_single_cell_and_determinism(planted, tmp_path):
    args = ["path", "--input", str(planted / "X.csv"), "--h-grid", "0.75", "--q-grid", "2", "--pairs", "1", "--quiet"]
    assert run(args + ["--out", str(tmp_path / "a")]) == 0
    assert run(args + ["--out", str(tmp_path / "b"), "--workers", "2"]) == 0
    a = (tmp_path / "a" / "instability.csv").read_bytes()
    assert a == (tmp_path / "b" / "instability.csv").read_bytes()
    assert len(a.decode().strip().splitlines()) == 2


def test_header_and_standardize(tmp_path):
    r = np.random.default_rng(0)
    X = r.standard_normal((40, 3)) * [1.0, 100.0, 0.01]
    X[-4:] += [20.0, 2000.0, 0.2]
    path = tmp_path / "h.csv"
    with open(path, "w") as fh:
        fh.write("a,b,c\n")
    with open(path, "a") as fh:
        for row in X:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    assert run(["detect", "--input", str(path), "--header", "--standardize", "--h", "36", "--q", "3",
                "--out", str(tmp_path / "o"), "--quiet"]) == 0
    labels = [int(r["label"]) for r in read_csv(tmp_path / "o" / "labels.csv")]
    assert labels[-4:] == [1] * 4 and sum(labels) == 4


def test_exit_codes(planted, tmp_path, capsys):
    x = str(planted / "X.csv")
    code, _, err = run(["detect", "--input", str(tmp_path / "missing.csv"), "--h", "30", "--q", "2"], capsys)
    assert code == 2 and "missing.csv" in err
    assert run(["detect", "--input", x, "--h", "30"], capsys)[0] == 1
    assert run(["detect", "--input", x, "--h", "30", "--q", "2", "--argmin", "a.json"], capsys)[0] == 1
    assert run(["path", "--input", x, "--h-grid", "1.2"], capsys)[0] == 1
    assert run(["path", "--input", x, "--pairs", "0"], capsys)[0] == 1
    assert run(["path", "--input", x, "--k", "many"], capsys)[0] == 1
    assert run(["bogus"], capsys)[0] == 1
    assert run(["simulate", "--protocol", "highdim", "--eps", "1.5"], capsys)[0] == 1
    assert run(["simulate", "--protocol", "highdim", "--l", "500"], capsys)[0] == 1
    assert run(["bench", "--protocol", "highdim", "--replicates", "0"], capsys)[0] == 1
    # q larger than the data allows is a data error
    assert run(["detect", "--input", x, "--h", "30", "--q", "90", "--out", str(tmp_path)], capsys)[0] == 2


def test_parse_errors_report_position(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3,x\n")
    code, _, err = run(["detect", "--input", str(bad), "--h", "1", "--q", "1"], capsys)
    assert code == 2 and "line 2, column 2" in err
    bad.write_text("1,2\n3\n")
    code, _, err = run(["detect", "--input", str(bad), "--h", "1", "--q", "1"], capsys)
    assert code == 2 and "line 2" in err
    bad.write_text("1,nan\n3,4\n")
    assert run(["detect", "--input", str(bad), "--h", "1", "--q", "1"], capsys)[0] == 2
    bad.write_text("")
    assert run(["detect", "--input", str(bad), "--h", "1", "--q", "1"], capsys)[0] == 2


def test_numerical_failure_exit_code(tmp_path, capsys):
    data = tmp_path / "line.csv"
    write_matrix(data, np.column_stack([np.arange(10.0), np.zeros(10), np.zeros(10)]))
    code, _, err = run(["detect", "--input", str(data), "--h", "8", "--q", "2", "--out", str(tmp_path)], capsys)
    assert code == 3 and "rank-deficient" in err
    code, _, err = run(["path", "--input", str(data), "--h-grid", "0.8", "--q-grid", "2", "--pairs", "2",
                        "--out", str(tmp_path)], capsys)
    assert code == 3 and "pair 0" in err


def test_bench_single_replicate(tmp_path, capsys):
    code, out, _ = run(["bench", "--protocol", "highdim", "--n", "60", "--p", "80", "--eps", "0.1", "--l", "1",
                        "--replicates", "1", "--pairs", "2", "--h-grid", "0.5,0.9", "--out", str(tmp_path),
                        "--quiet"], capsys)
    assert code == 0 and json.loads(out)["failed"] == 0
    rows = {r["method"]: r for r in read_csv(tmp_path / "metrics.csv")}
    assert set(rows) == {"FDB", "SpectralMCD"}
    assert float(rows["FDB"]["F1"]) == pytest.approx(1 / 3)
    assert float(rows["SpectralMCD"]["F1"]) == 1.0
    assert rows["FDB"]["F1_se"] == ""  # one replicate: no standard error
    assert rows["FDB"]["kl"] == ""  # p > n: scatter not positive definite
    reps = read_csv(tmp_path / "replicates.csv")
    assert len(reps) == 2 and reps[1]["h"] == "54"


def test_bench_overdetermined_json(tmp_path):
    assert run(["bench", "--protocol", "overdetermined", "--n", "120", "--p", "5", "--eps", "0.1",
                "--kind", "cluster", "--replicates", "2", "--pairs", "2", "--q-grid", "2,p",
                "--format", "json", "--out", str(tmp_path), "--quiet"]) == 0
    rows = json.loads((tmp_path / "metrics.json").read_text())
    for r in rows:
        assert r["replicates"] == 2 and r["failed"] == 0
        assert r["kl"] > 0 and r["e_sigma"] > 0 and r["F1_se"] is not None


def test_run_config_invariants():
    with pytest.raises(UsageError):
        RunConfig(h_fractions=[0.0])
    with pytest.raises(UsageError):
        RunConfig(q_values=[0])
    with pytest.raises(UsageError):
        RunConfig(B=0)
    assert RunConfig(q_values=[2, "p"]).resolve_q(7) == [2, 7]
    assert RunConfig().k_value is None


def test_csv_round_trip(tmp_path):
    r = np.random.default_rng(0)
    X = r.standard_normal((20, 3)) * 10.0 ** r.integers(-300, 300, (20, 3))
    write_matrix(tmp_path / "x.csv", X)
    np.testing.assert_array_equal(read_matrix(tmp_path / "x.csv")[0], X)
    (tmp_path / "y.csv").write_text("a,b\n1,2\n\n3,4\n")
    Y, names = read_matrix(tmp_path / "y.csv", header=True)
    assert names == ["a", "b"] and Y.tolist() == [[1.0, 2.0], [3.0, 4.0]]
    with pytest.raises(DataFormatError):
        read_matrix(tmp_path / "y.csv")


def test_module_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "stablemcd", "simulate", "--protocol", "highdim", "--n", "20", "--p", "5",
         "--out", str(tmp_path), "--quiet"],
        capture_output=True, text=True,
    )
    assert out.returncode == 0
    assert json.loads(out.stdout)["n"] == 20
