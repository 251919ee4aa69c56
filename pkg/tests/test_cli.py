import json

import numpy as np
import pytest

from freeprob.cli import EXIT_BREAKDOWN, EXIT_INVALID, EXIT_OK, main
from freeprob import rmtlab
from freeprob.errors import NumericalBreakdown


def read_csv(path):
    lines = path.read_text().splitlines()
    comments = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if not l.startswith("#")]
    header = body[0].split(",")
    rows = [[float(v) for v in l.split(",")] for l in body[1:]]
    return comments, header, np.array(rows)


def body(path):
    return [l for l in path.read_text().splitlines() if not l.startswith("#")]


def manifest(path):
    return json.loads(path.with_name(path.name + ".manifest.json").read_text())


def test_convolve_bernoulli(tmp_path, data_dir):
    out = tmp_path / "conv.csv"
    assert main(["convolve", str(data_dir / "bernoulli.json"), "--n", "2", "--order", "8", "--out", str(out)]) == EXIT_OK
    comments, header, rows = read_csv(out)
    assert comments[0] == "# columns: k,m_k"
    assert header == ["k", "m_k"]
    assert rows[:3].tolist() == [[1, 1], [2, 3], [3, 10]]
    man = manifest(out)
    assert man["command"] == "convolve" and man["outputs"] == [str(out)]
    assert len(man["inputs"][str(data_dir / "bernoulli.json")]) == 64


def test_convolve_point_mass(tmp_path, data_dir):
    out = tmp_path / "d.csv"
    assert main(["convolve", str(data_dir / "delta1.json"), "--n", "9", "--out", str(out)]) == EXIT_OK
    _, _, rows = read_csv(out)
    np.testing.assert_allclose(rows[:, 1], 1.0, atol=1e-12)


def test_convolve_zero_mean(tmp_path, capsys):
    src = tmp_path / "sym.json"
    src.write_text(json.dumps({"atoms": [{"x": -1, "w": 0.5}, {"x": 1, "w": 0.5}]}))
    assert main(["convolve", str(src), "--n", "2", "--out", str(tmp_path / "x.csv")]) == EXIT_INVALID
    assert "S-transform undefined: E(X) = 0" in capsys.readouterr().err


def test_missing_or_malformed_input(tmp_path):
    assert main(["convolve", str(tmp_path / "nope.json"), "--n", "2", "--out", str(tmp_path / "x.csv")]) == EXIT_INVALID
    bad = tmp_path / "bad.json"
    bad.write_text('{"atoms": [{"x": 1}]}')
    assert main(["convolve", str(bad), "--n", "2", "--out", str(tmp_path / "x.csv")]) == EXIT_INVALID


def test_bounds(tmp_path, data_dir):
    out = tmp_path / "b.csv"
    assert main(["bounds", str(data_dir / "bernoulli.json"), "--n", "1:100", "--out", str(out)]) == EXIT_OK
    comments, header, rows = read_csv(out)
    assert header == ["n", "y_lower", "y_upper", "pi_lower_log", "pi_upper_log", "cyclic_exact_log"]
    assert rows[-1][:3].tolist() == [100, 10, 20400]
    assert any(c.startswith("# growth_rate: 0.3465735902799") for c in comments)


def test_bounds_point_mass(tmp_path, data_dir):
    out = tmp_path / "d.csv"
    assert main(["bounds", str(data_dir / "delta1.json"), "--n", "1:10", "--out", str(out)]) == EXIT_OK
    _, _, rows = read_csv(out)
    assert np.all(rows[:, 1] == 0)


def test_bounds_mean_check_and_normalize(tmp_path, data_dir, capsys):
    scaled = str(data_dir / "bernoulli2.json")
    assert main(["bounds", scaled, "--n", "1:20", "--out", str(tmp_path / "x.csv")]) == EXIT_INVALID
    assert main(["bounds", scaled, "--n", "1:20", "--normalize", "--out", str(tmp_path / "n.csv")]) == EXIT_OK
    assert "scale factor 2" in capsys.readouterr().err
    main(["bounds", str(data_dir / "bernoulli.json"), "--n", "1:20", "--out", str(tmp_path / "b.csv")])
    assert body(tmp_path / "n.csv") == body(tmp_path / "b.csv")


def test_bounds_gram_input(tmp_path, data_dir):
    out = tmp_path / "g.csv"
    args = ["bounds", str(data_dir / "bernoulli2.json"), "--gram", "--n", "1:5", "--out", str(out)]
    assert main(args) == EXIT_INVALID  # needs --x-norm
    assert main(args + ["--x-norm", "2"]) == EXIT_OK
    _, _, rows = read_csv(out)
    assert np.all(np.isnan(rows[:, 1]))


def test_bounds_bad_range(tmp_path, data_dir):
    assert main(["bounds", str(data_dir / "bernoulli.json"), "--n", "a:b", "--out", str(tmp_path / "x.csv")]) == EXIT_INVALID


def test_simulate_is_reproducible(tmp_path, data_dir):
    common = [str(data_dir / "bernoulli.json"), "--mode", "cyclic", "--dim", "30", "--steps", "4", "--trials", "3", "--seed", "5"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", *common, "--threads", "1", "--out", str(a)]) == EXIT_OK
    assert main(["simulate", *common, "--threads", "2", "--out", str(b)]) == EXIT_OK
    assert a.read_text() == b.read_text()
    comments, header, rows = read_csv(a)
    assert header == ["trial", "n", "log_op_norm", "trace_gram", "cyclic_norm"]
    assert rows.shape == (12, 5)
    summary = json.loads(a.with_suffix(".summary.json").read_text())
    assert summary["seeds"] == [[5, 0], [5, 1], [5, 2]]
    assert summary["predictions"]["growth_rate"] == pytest.approx(0.34657359, abs=1e-8)
    assert summary["summary"]["trials"] == 3
    assert manifest(a)["seed"] == 5


@pytest.mark.parametrize("mode", ["product", "symmetric", "cyclic"])
def test_simulate_point_mass(tmp_path, data_dir, mode):
    out = tmp_path / "d.csv"
    args = ["simulate", str(data_dir / "delta1.json"), "--mode", mode, "--dim", "10", "--steps", "3", "--trials", "2"]
    assert main([*args, "--out", str(out)]) == EXIT_OK
    _, _, rows = read_csv(out)
    assert np.all(rows[:, 2] == 0)


def test_simulate_ginibre(tmp_path, capsys):
    out = tmp_path / "g.csv"
    assert main(["simulate", "--ginibre", "1.0", "--dim", "200", "--steps", "30", "--trials", "2", "--out", str(out)]) == EXIT_OK
    assert "cohen-newman" in capsys.readouterr().out
    summary = json.loads(out.with_suffix(".summary.json").read_text())
    assert abs(summary["growth_estimate"]) < 0.05
    assert summary["predictions"]["cohen_newman_large_k"] == 0.0


def test_simulate_validation(tmp_path, data_dir):
    out = str(tmp_path / "x.csv")
    assert main(["simulate", "--out", out]) == EXIT_INVALID
    assert main(["simulate", str(data_dir / "bernoulli.json"), "--dim", "1", "--out", out]) == EXIT_INVALID
    assert main(["simulate", str(data_dir / "bernoulli.json"), "--ginibre", "1", "--out", out]) == EXIT_INVALID


def test_simulate_breakdown_exit_code(tmp_path, data_dir, monkeypatch):
    real = rmtlab.run_trial

    def flaky(cfg, trial):
        if trial == 1:
            raise NumericalBreakdown("lost positivity")
        return real(cfg, trial)

    monkeypatch.setattr(rmtlab, "run_trial", flaky)
    out = tmp_path / "s.csv"
    args = ["simulate", str(data_dir / "bernoulli.json"), "--dim", "8", "--steps", "2", "--trials", "3", "--threads", "1"]
    assert main([*args, "--out", str(out)]) == EXIT_BREAKDOWN
    _, _, rows = read_csv(out)
    assert sorted(set(rows[:, 0].tolist())) == [0, 2]
    assert "breakdown" in manifest(out)["status"]


def test_invert_bernoulli_atoms(tmp_path, data_dir):
    out = tmp_path / "i.csv"
    assert main(["invert", str(data_dir / "bernoulli.json"), "--grid=-0.5:2.5:0.01", "--eps", "0.01", "--out", str(out)]) == EXIT_OK
    comments, _, rows = read_csv(out)
    peaks = rows[np.argsort(rows[:, 1])[-2:], 0]
    assert sorted(np.round(peaks, 6)) == [0.0, 2.0]
    edge = float(next(c for c in comments if c.startswith("# support_edge")).split(":")[1])
    assert edge == pytest.approx(2.0, abs=0.05)


def test_invert_power_edge(tmp_path, data_dir):
    out = tmp_path / "i4.csv"
    assert main(["invert", str(data_dir / "bernoulli.json"), "--n", "4", "--grid", "0:12:0.01", "--out", str(out)]) == EXIT_OK
    comments, _, _ = read_csv(out)
    edge = float(next(c for c in comments if c.startswith("# support_edge")).split(":")[1])
    assert edge <= 816


def test_invert_mp_extrapolated(tmp_path, data_dir):
    out = tmp_path / "mp.csv"
    args = ["invert", str(data_dir / "mp.json"), "--grid", "1:1:0.1", "--eps", "0.02", "--extrapolate", "--out", str(out)]
    assert main(args) == EXIT_OK
    _, _, rows = read_csv(out)
    assert rows[0, 1] == pytest.approx(0.2757, rel=0.01)


@pytest.mark.parametrize("extra", [["--grid", "1:0:0.1"], ["--grid", "0:1"], ["--grid", "0:1:0.1", "--eps", "0"]])
def test_invert_validation(tmp_path, data_dir, extra):
    assert main(["invert", str(data_dir / "bernoulli.json"), *extra, "--out", str(tmp_path / "x.csv")]) == EXIT_INVALID
