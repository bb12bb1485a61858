import json
import subprocess
import sys

import numpy as np
import pytest

from intrep.cli import main


def write_csv(path, header, rows):
    path.write_text(",".join(header) + "\n" + "".join(",".join(map(str, r)) + "\n" for r in rows))
    return path


@pytest.fixture
def pairs_csv(tmp_path):
    g = np.random.default_rng(0)
    y0 = g.exponential(size=40)
    y1 = 2.0 * g.exponential(size=40)
    return write_csv(tmp_path / "pairs.csv", ["y1", "y0"], zip(y1, y0))


def test_assess_pairs(pairs_csv, capsys):
    assert main(["assess", str(pairs_csv), "--kind", "pairs"]) == 0
    out = capsys.readouterr().out
    assert "m = 40" in out and "R_u" in out


def test_assess_json_to_file(pairs_csv, tmp_path):
    out = tmp_path / "res.json"
    assert main(["assess", str(pairs_csv), "--kind", "pairs", "--format", "json", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["m"] == 40


def test_survival_missing_status(tmp_path, capsys):
    p = write_csv(tmp_path / "surv.csv", ["time", "x1"], [(1.0, 0.2), (2.0, 0.1)])
    assert main(["assess", str(p), "--kind", "survival"]) == 3
    assert "status" in capsys.readouterr().err


def test_events(tmp_path, capsys):
    g = np.random.default_rng(1)
    rows = []
    for i in range(20):
        ts = np.sort(g.uniform(0, 5, size=g.poisson(6)))
        rows += [(i, f"{t:.6f}") for t in ts] or [(i, "")]
    p = write_csv(tmp_path / "ev.csv", ["individual_id", "event_time"], rows)
    assert main(["assess", str(p), "--kind", "events"]) == 3
    assert "t0" in capsys.readouterr().err
    assert main(["assess", str(p), "--kind", "events", "--t0", "5", "--seed", "2"]) == 0


def test_non_numeric(tmp_path, capsys):
    p = write_csv(tmp_path / "p.csv", ["y1", "y0"], [(1.0, 2.0), ("abc", 1.0)])
    assert main(["assess", str(p), "--kind", "pairs"]) == 3
    assert "row 3" in capsys.readouterr().err


def test_config_errors(tmp_path, capsys):
    assert main(["simulate"]) == 2
    bad = tmp_path / "c.toml"
    bad.write_text('scenario = "pairs_mult"\nreplications = 0\n[grid]\neffect=[0]\nshape=[1]\nm=[4]\n')
    assert main(["simulate", "--config", str(bad)]) == 2
    assert "replications" in capsys.readouterr().err
    assert main(["assess", "x.csv", "--kind", "pairs", "--alpha", "2"]) == 2


def test_argparse_usage_exit():
    with pytest.raises(SystemExit) as e:
        main(["assess"])
    assert e.value.code == 2


def test_simulate_writes_manifest(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('scenario = "two_group"\nreplications = 3\nseed = 4\n'
                   '[grid]\nfamily = ["normal"]\npsi = [1.0]\nm = [10]\n')
    out = tmp_path / "rows.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--replications", "2"]) == 0
    assert out.read_text().startswith("scenario,")
    man = json.loads((tmp_path / "rows.csv.manifest.json").read_text())
    assert man["config"]["replications"] == 2


def test_power(capsys):
    assert main(["power", "--sigma", "1", "2", "--psi", "1", "--format", "json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert len(rows) == 2 and abs(rows[0]["logE"]) < 1e-6
    assert main(["power", "--sigma", "1"]) == 2


def test_confset(tmp_path, capsys):
    g = np.random.default_rng(3)
    X = g.standard_normal((50, 4))
    y = X[:, 0] + X[:, 1] + g.standard_normal(50)
    p = write_csv(tmp_path / "r.csv", ["y", "x1", "x2", "x3", "x4"], np.column_stack([y, X]))
    assert main(["confset", str(p), "--dmax", "2", "--sigma", "1", "--all"]) == 0
    cap = capsys.readouterr()
    assert len(cap.out.strip().splitlines()) == 1 + 10
    assert "of 10 models accepted" in cap.err


def test_console_script(pairs_csv):
    r = subprocess.run([sys.executable, "-m", "intrep.cli", "assess", str(pairs_csv), "--kind", "pairs"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "decision" in r.stdout
