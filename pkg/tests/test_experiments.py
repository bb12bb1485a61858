import json
from pathlib import Path

import pytest

from intrep.errors import ConfigError
from intrep.experiments import ExperimentConfig, format_rows, run_experiment, run_replicate

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def small(**kw):
    raw = {"scenario": "pairs_mult", "replications": 20, "seed": 3,
           "grid": {"effect": [0.0, 1.0], "shape": [1.0], "m": [25]},
           "truth": {"effect_kind": "additive"}}
    raw.update(kw)
    return ExperimentConfig.from_dict(raw)


class TestConfig:
    @pytest.mark.parametrize("field,value", [
        ("replications", 0), ("alpha", 1.5), ("seed", -1), ("threads", 0), ("scenario", "nope"),
    ])
    def test_bad_field_named(self, field, value):
        with pytest.raises(ConfigError, match=field):
            small(**{field: value})

    def test_missing_axis(self):
        with pytest.raises(ConfigError, match="grid"):
            small(grid={"effect": [0.0], "shape": [1.0]})

    def test_unknown_keys(self):
        with pytest.raises(ConfigError, match="unknown"):
            small(colour="red")
        with pytest.raises(ConfigError, match="truth"):
            small(truth={"effect_kind": "additive", "bogus": 1})

    def test_bad_axis_value(self):
        with pytest.raises(ConfigError, match="grid.m"):
            small(grid={"effect": [0.0], "shape": [1.0], "m": [0]})

    def test_toml_errors(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("scenario = [unclosed\n")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_toml(bad)
        with pytest.raises(ConfigError, match="not found"):
            ExperimentConfig.from_toml(tmp_path / "absent.toml")

    @pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.toml")))
    def test_shipped_configs_load(self, name):
        cfg = ExperimentConfig.from_toml(CONFIGS / name)
        assert len(cfg.cells()) >= 1

    def test_overrides(self):
        cfg = small().with_overrides(seed=9, threads=None)
        assert cfg.seed == 9 and cfg.threads == 1
        assert len(small().cells()) == 2


class TestRunner:
    def test_smoke_and_manifest(self):
        rows, man = run_experiment(small(replications=1))
        assert len(rows) == 4 and man.n_rows == 4
        assert {r["direction"] for r in rows} == {"left", "right"}
        assert all(r["replications"] + r["failures"] == 1 for r in rows)
        assert json.loads(man.to_json())["config"]["seed"] == 3

    def test_thread_invariance(self):
        cfg = small()
        a, _ = run_experiment(cfg, threads=1, chunk=7)
        b, _ = run_experiment(cfg, threads=2, chunk=3)
        assert a == b

    def test_replicate_determinism(self):
        cfg = small()
        assert run_replicate(cfg, 1, 5) == run_replicate(cfg, 1, 5)

    def test_mc_se(self):
        rows, _ = run_experiment(small())
        for r in rows:
            p, R = r["rejection_rate"], r["replications"]
            assert r["mc_se"] == pytest.approx((p * (1 - p) / R) ** 0.5)

    def test_scan_direction(self):
        cfg = small(options={"scan_max": 5.0, "scan_points": 41}, replications=3)
        rows, _ = run_experiment(cfg)
        assert "empty_set" in {r["direction"] for r in rows}

    def test_confsets_columns(self):
        cfg = ExperimentConfig.from_dict({
            "scenario": "confsets", "replications": 2, "seed": 1,
            "grid": {"n": [60], "k": [4]}, "truth": {"d": 6, "s": 2, "a": 2},
            "options": {"dmax": 2}})
        rows, _ = run_experiment(cfg)
        assert rows[0]["n_tested"] == 21
        assert 0.0 <= rows[0]["coverage"] <= 1.0 and "false_ratio" in rows[0]

    def test_power_grid(self):
        cfg = ExperimentConfig.from_dict({"scenario": "power_grid", "replications": 1,
                                          "grid": {"sigma": [1.0], "psi_star": [1.0, 2.0]}})
        rows, _ = run_experiment(cfg)
        assert len(rows) == 2 and abs(rows[0]["logE"]) < 1e-6 and rows[0]["mc_se"] == 0.0

    def test_format(self):
        rows = [{"a": 1, "b": 2.5}, {"a": 2, "c": "x"}]
        assert format_rows(rows).splitlines() == ["a,b,c", "1,2.5,", "2,,x"]
        assert json.loads(format_rows(rows, "json")) == rows
