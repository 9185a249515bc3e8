import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

import genspr.cli as cli
from genspr.cli import ExperimentConfig, main, parse_args, run_experiment
from genspr.operators import read_matrix

GOLDEN = Path(__file__).parent / "golden"


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


@pytest.mark.parametrize("problem", ["gravity", "shaw"])
def test_golden_history(problem, tmp_path):
    out = tmp_path / "run"
    assert main(["--problem", problem, "--n", "100", "--kmax", "30", "--out", str(out)]) == 0
    got = read_csv(out / "history.csv")
    want = read_csv(GOLDEN / f"{problem}100_history.csv")
    assert got.keys() == want.keys()
    for col in want:
        np.testing.assert_allclose(got[col], want[col], rtol=1e-10, err_msg=col)


def test_deterministic_bytes(tmp_path):
    args = ["--problem", "shaw", "--n", "60", "--kmax", "15", "--seed", "3"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    for name in ("history.csv", "x_DP.bin", "x_LC.bin", "x_GCV.bin"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    sa, sb = (json.loads((tmp_path / d / "summary.json").read_text()) for d in "ab")
    sa["config"].pop("output_dir")
    sb["config"].pop("output_dir")
    assert sa == sb


def test_parse_defaults():
    c = parse_args([])
    assert c.problem == "gravity" and c.n == 400 and c.tau == 1.01
    assert c.kernel.family == "gaussian" and c.kernel.l == 0.1
    assert c.rules == ("DP", "LC", "GCV")
    s = parse_args(["--problem", "shaw"])
    assert s.kernel.family == "exponential" and s.noise == "diagonal" and s.level == 1e-2
    b = parse_args(["--problem", "blur2d", "--n1", "32"])
    assert b.n == 32 and b.kernel.nu == 2.5


@pytest.mark.parametrize("argv", [["--tau", "0.5"], ["--tau", "1"], ["--problem", "blur2d", "--oracle"],
                                  ["--n", "3000", "--oracle"], ["--rule", "UPRE"], ["--kmax", "0"]])
def test_rejected_arguments(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        parse_args(argv)
    assert exc.value.code == 2


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"problem": "shaw", "n": 80, "level": 0.05, "kernel": {"l": 0.2}}))
    c = parse_args(["--config", str(cfg), "--level", "0.02"])
    assert c.problem == "shaw" and c.n == 80 and c.level == 0.02
    assert c.kernel.family == "exponential" and c.kernel.l == 0.2
    cfg.write_text(json.dumps({"problem": "shaw", "colour": 1}))
    with pytest.raises(SystemExit):
        parse_args(["--config", str(cfg)])


def test_config_list_subdirectories(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps([{"problem": "gravity", "n": 40, "k_max": 10},
                               {"problem": "shaw", "n": 40, "k_max": 10}]))
    out = tmp_path / "res"
    assert main(["--config", str(cfg), "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["00_gravity", "01_shaw"]
    assert (out / "01_shaw" / "summary.json").exists()


def test_oracle_summary(tmp_path):
    out = tmp_path / "o"
    assert main(["--n", "60", "--kmax", "20", "--oracle", "--rule", "DP", "--rule", "best",
                 "--out", str(out)]) == 0
    s = json.loads((out / "summary.json").read_text())
    assert s["schema_version"] == 1 and s["m"] == s["n"] == 60
    assert set(s["rules"]) == {"DP", "best"}
    assert s["rules"]["best"]["k_stop"] == s["best_k"]
    assert {"lambda_opt", "lambda_on_boundary", "tikhonov_error"} <= s.keys()
    x = read_matrix(out / "x_tikhonov.bin", vector=True)
    assert x.shape == (60,)
    x_dp = read_matrix(out / "x_DP.bin", vector=True)
    assert np.isfinite(x_dp).all()


def test_existing_output_and_cleanup(tmp_path, monkeypatch, capsys):
    out = tmp_path / "r"
    out.mkdir()
    (out / "keep").write_text("x")
    assert main(["--n", "30", "--kmax", "5", "--out", str(out)]) == 1
    assert (out / "keep").exists()

    def boom(config, directory):
        (directory / "history.csv").write_text("partial")
        raise RuntimeError("solver failed")

    monkeypatch.setattr(cli, "_write_reports", boom)
    target = tmp_path / "fail"
    with pytest.raises(RuntimeError):
        run_experiment(ExperimentConfig(n=30, k_max=5, output_dir=str(target)))
    assert not target.exists()
    assert [p.name for p in tmp_path.iterdir()] == ["r"]


def test_module_entry_point(tmp_path):
    out = tmp_path / "m"
    proc = subprocess.run([sys.executable, "-m", "genspr", "--n", "30", "--kmax", "5",
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "best k=" in proc.stdout
