"""Config-driven simulation runner.

A config names one scenario, its truth parameters, a grid of cell parameters
(the Cartesian product of the listed axes) and the number of replications.
Replicate ``r`` of cell ``c`` draws from ``rng_stream(seed, r).substream(c)``,
so results do not depend on how work is split across processes.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .core import confidence_set_scan
from .errors import ConfigError, ConvergenceError, DataError, DomainError, PrecisionLossError
from .numerics import rng_stream
from .pairs import PairGenSpec, assess_pairs, gen_pairs, mult_u
from .ph import assess_ph, gen_ph_data, gen_tv_data
from .poisson import assess_cohort, simulate_cohort
from .power import PLUGIN_RULES, heatmap_grid
from .regression import confidence_set_models, gen_regression
from .two_group import FAMILIES, assess_strata, gen_gamma_strata, gen_normal_strata, gen_poisson_strata

SCENARIOS = ("pairs_mult", "pairs_add", "two_group", "poisson", "ph", "confsets", "power_grid")

# required grid axes and allowed truth/options keys per scenario
_AXES = {
    "pairs_mult": ("effect", "shape", "m"),
    "pairs_add": ("effect", "shape", "m"),
    "two_group": ("family", "psi", "m"),
    "poisson": ("param", "mode", "n"),
    "ph": ("beta", "mode", "n", "m_blocks"),
    "confsets": ("n", "k"),
    "power_grid": ("sigma", "psi_star"),
}
_TRUTH_KEYS = {
    "pairs_mult": {"effect_kind", "parametrization", "gamma_range"},
    "pairs_add": {"effect_kind", "parametrization", "gamma_range"},
    "two_group": {"tau"},
    "poisson": {"process", "t0"},
    "ph": {"process", "shape", "scale", "b0", "b1", "censor_rate", "admin_time"},
    "confsets": {"d", "s", "a", "rho", "theta_signal"},
    "power_grid": set(),
}
_OPTION_KEYS = {
    "pairs_mult": {"sides", "scan_max", "scan_points"},
    "pairs_add": {"sides"},
    "two_group": {"sides"},
    "poisson": {"sides", "mc_B", "normal_threshold", "method"},
    "ph": {"sides"},
    "confsets": {"sides", "dmax"},
    "power_grid": {"psi_plugin_rule"},
}
_TOP_KEYS = {"scenario", "truth", "grid", "replications", "alpha", "seed", "threads", "options"}
_FAILURES = (ConvergenceError, DataError, PrecisionLossError)


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    grid: dict[str, list]
    replications: int = 1000
    alpha: float = 0.05
    seed: int = 1
    threads: int = 1
    truth: dict[str, Any] = field(default_factory=dict)
    options: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario: must be one of {SCENARIOS}, got {self.scenario!r}")
        if not isinstance(self.replications, int) or self.replications < 1:
            raise ConfigError("replications: must be an integer >= 1")
        if not isinstance(self.alpha, (int, float)) or not 0 < self.alpha < 1:
            raise ConfigError("alpha: must lie in (0, 1)")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed: must be an integer in [0, 2**64)")
        if not isinstance(self.threads, int) or self.threads < 1:
            raise ConfigError("threads: must be an integer >= 1")
        for name, allowed in (("truth", _TRUTH_KEYS[self.scenario]),
                              ("options", _OPTION_KEYS[self.scenario])):
            extra = set(getattr(self, name)) - allowed
            if extra:
                raise ConfigError(f"{name}: unknown keys {sorted(extra)} for scenario {self.scenario}")
        axes = _AXES[self.scenario]
        missing = [a for a in axes if a not in self.grid]
        if missing:
            raise ConfigError(f"grid: missing axes {missing} for scenario {self.scenario}")
        extra = set(self.grid) - set(axes)
        if extra:
            raise ConfigError(f"grid: unknown axes {sorted(extra)} for scenario {self.scenario}")
        grid = {}
        for a in axes:
            vals = self.grid[a]
            if not isinstance(vals, list):
                vals = [vals]
            if not vals:
                raise ConfigError(f"grid.{a}: must be a nonempty list")
            grid[a] = vals
        object.__setattr__(self, "grid", grid)
        _validate_values(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        extra = set(raw) - _TOP_KEYS
        if extra:
            raise ConfigError(f"unknown top-level keys {sorted(extra)}")
        for key in ("scenario", "grid"):
            if key not in raw:
                raise ConfigError(f"{key}: required")
        return cls(**raw)

    @classmethod
    def from_toml(cls, path: str | Path) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(raw)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        d = asdict(self)
        d.update({k: v for k, v in kw.items() if v is not None})
        return ExperimentConfig(**d)

    def cells(self) -> list[dict]:
        axes = list(self.grid)
        return [dict(zip(axes, combo)) for combo in itertools.product(*self.grid.values())]


def _validate_values(cfg: ExperimentConfig) -> None:
    g, sc = cfg.grid, cfg.scenario

    def positive_ints(axis, minimum=1):
        for v in g[axis]:
            if not isinstance(v, int) or v < minimum:
                raise ConfigError(f"grid.{axis}: values must be integers >= {minimum}, got {v!r}")

    def positive(axis):
        for v in g[axis]:
            if not isinstance(v, (int, float)) or not v > 0:
                raise ConfigError(f"grid.{axis}: values must be positive, got {v!r}")

    sides = cfg.options.get("sides", "two-sided")
    if sides not in ("two-sided", "upper"):
        raise ConfigError("options.sides: must be 'two-sided' or 'upper'")
    if sc in ("pairs_mult", "pairs_add"):
        positive_ints("m")
        positive("shape")
        kind = cfg.truth.get("effect_kind", "additive" if sc == "pairs_mult" else "multiplicative")
        if kind not in ("additive", "multiplicative"):
            raise ConfigError("truth.effect_kind: must be 'additive' or 'multiplicative'")
        if kind == "multiplicative":
            positive("effect")
    elif sc == "two_group":
        positive_ints("m", 2)
        positive("psi")
        for f in g["family"]:
            if f not in FAMILIES:
                raise ConfigError(f"grid.family: must be in {FAMILIES}, got {f!r}")
    elif sc == "poisson":
        positive_ints("n")
        proc = cfg.truth.get("process", "loglinear")
        if proc not in ("loglinear", "powerlaw"):
            raise ConfigError("truth.process: must be 'loglinear' or 'powerlaw'")
        for mode in g["mode"]:
            if mode not in ("true", "estimated"):
                raise ConfigError(f"grid.mode: must be 'true' or 'estimated', got {mode!r}")
            if mode == "true" and proc == "powerlaw":
                raise ConfigError("grid.mode: 'true' needs a loglinear truth")
        if proc == "powerlaw" and any(r <= -1 for r in g["param"]):
            raise ConfigError("grid.param: power-law exponent must exceed -1")
        if cfg.options.get("method", "mc") not in ("mc", "exact"):
            raise ConfigError("options.method: must be 'mc' or 'exact'")
    elif sc == "ph":
        positive_ints("n")
        positive_ints("m_blocks", 2)
        proc = cfg.truth.get("process", "ph")
        if proc not in ("ph", "tv"):
            raise ConfigError("truth.process: must be 'ph' or 'tv'")
        for mode in g["mode"]:
            if mode not in ("true", "estimated"):
                raise ConfigError(f"grid.mode: must be 'true' or 'estimated', got {mode!r}")
            if mode == "true" and proc == "tv":
                raise ConfigError("grid.mode: 'true' needs a proportional-hazards truth")
    elif sc == "confsets":
        positive_ints("n", 10)
        positive_ints("k", 2)
    elif sc == "power_grid":
        positive("sigma")
        positive("psi_star")
        if cfg.options.get("psi_plugin_rule", "first-order") not in PLUGIN_RULES:
            raise ConfigError(f"options.psi_plugin_rule: must be one of {PLUGIN_RULES}")


# ---------------------------------------------------------------------------
# one replicate per scenario; each returns a dict of 0/1 outcomes


def _rej(res) -> dict:
    return {"left": float(res.reject_u), "right": float(res.reject_comp)}


def _rep_pairs(cfg: ExperimentConfig, cell: dict, rng) -> dict:
    postulated = "multiplicative" if cfg.scenario == "pairs_mult" else "additive"
    kind = cfg.truth.get("effect_kind", "additive" if postulated == "multiplicative" else "multiplicative")
    spec = PairGenSpec(kind, float(cell["effect"]), int(cell["m"]), float(cell["shape"]),
                       tuple(cfg.truth.get("gamma_range", (0.0, 1.0))),
                       cfg.truth.get("parametrization", "scale"))
    pairs = gen_pairs(spec, rng)
    out = _rej(assess_pairs(pairs, postulated, cfg.alpha, cfg.options.get("sides", "two-sided")))
    if "scan_max" in cfg.options and postulated == "multiplicative":
        grid = np.linspace(0.0, float(cfg.options["scan_max"]),
                           int(cfg.options.get("scan_points", 201)))[1:]
        cs = confidence_set_scan(lambda p: mult_u(pairs, p), grid, cfg.alpha)
        out["empty_set"] = float(cs.empty)
    return out


def _rep_two_group(cfg: ExperimentConfig, cell: dict, rng) -> dict:
    fam, m, psi = cell["family"], int(cell["m"]), float(cell["psi"])
    gen_rng, u_rng = rng.substream(0), rng.substream(1)
    if fam == "normal":
        strata = gen_normal_strata(m, psi, float(cfg.truth.get("tau", 1.0)), gen_rng)
    elif fam == "poisson":
        strata = gen_poisson_strata(m, psi, gen_rng)
    else:
        strata = gen_gamma_strata(m, psi, gen_rng)
    return _rej(assess_strata(strata, cfg.alpha, u_rng, cfg.options.get("sides", "two-sided")))


def _rep_poisson(cfg: ExperimentConfig, cell: dict, rng) -> dict:
    proc = cfg.truth.get("process", "loglinear")
    t0 = float(cfg.truth.get("t0", 5.0))
    par = float(cell["param"])
    kw = {"beta": par} if proc == "loglinear" else {"rho": par}
    cohort = simulate_cohort(int(cell["n"]), t0, rng.substream(0), **kw)
    override = par if cell["mode"] == "true" else None
    res = assess_cohort(cohort, cfg.alpha, rng.substream(1),
                        mc_B=int(cfg.options.get("mc_B", 1000)),
                        normal_threshold=int(cfg.options.get("normal_threshold", 40)),
                        beta_override=override, method=cfg.options.get("method", "mc"),
                        sides=cfg.options.get("sides", "two-sided"))
    return _rej(res)


def _rep_ph(cfg: ExperimentConfig, cell: dict, rng) -> dict:
    t = cfg.truth
    n = int(cell["n"])
    gen_rng = rng.substream(0)
    if t.get("process", "ph") == "tv":
        data = gen_tv_data(n, gen_rng, float(t.get("b0", 1.0)), float(t.get("b1", 1.0)),
                           float(t.get("censor_rate", 0.0)), float(t.get("admin_time", 10.0)))
        beta = None
    else:
        data = gen_ph_data(n, float(cell["beta"]), gen_rng, float(t.get("shape", 1.0)),
                           float(t.get("scale", 1.0)), float(t.get("censor_rate", 0.0)),
                           float(t.get("admin_time", math.inf)))
        beta = float(cell["beta"]) if cell["mode"] == "true" else None
    res = assess_ph(data, int(cell["m_blocks"]), cfg.alpha, rng.substream(1), beta,
                    cfg.options.get("sides", "two-sided"))
    return _rej(res)


def _rep_confsets(cfg: ExperimentConfig, cell: dict, rng) -> dict:
    t = cfg.truth
    data, true_model = gen_regression(int(cell["n"]), rng.substream(0), int(t.get("d", 15)),
                                      int(t.get("s", 5)), int(t.get("a", 3)),
                                      float(t.get("rho", 0.9)), float(t.get("theta_signal", 1.0)))
    cs = confidence_set_models(data, int(cfg.options.get("dmax", 5)), int(cell["k"]), cfg.alpha,
                               rng.substream(1), sides=cfg.options.get("sides", "two-sided"))
    i = cs.index(true_model)
    acc_u, acc_c = ~cs.reject_u, ~cs.reject_comp
    return {
        "left": float(cs.reject_u[i]), "right": float(cs.reject_comp[i]),
        "false_left": float(acc_u.sum() - acc_u[i]), "false_right": float(acc_c.sum() - acc_c[i]),
        "n_tested": float(cs.n_tested),
    }


_REPLICATE = {
    "pairs_mult": _rep_pairs, "pairs_add": _rep_pairs, "two_group": _rep_two_group,
    "poisson": _rep_poisson, "ph": _rep_ph, "confsets": _rep_confsets,
}


def run_replicate(cfg: ExperimentConfig, cell_index: int, r: int) -> dict | None:
    """Outcome of replicate ``r`` in cell ``cell_index``; ``None`` if the fit failed."""
    cell = cfg.cells()[cell_index]
    rng = rng_stream(cfg.seed, r).substream(cell_index)
    try:
        return _REPLICATE[cfg.scenario](cfg, cell, rng)
    except _FAILURES:
        return None


def _run_chunk(args) -> list[dict | None]:
    cfg, c, lo, hi = args
    return [run_replicate(cfg, c, r) for r in range(lo, hi)]


# ---------------------------------------------------------------------------


@dataclass
class RunManifest:
    config: dict
    version: str
    wall_time_s: float
    n_rows: int
    python: str = field(default_factory=platform.python_version)
    numpy: str = np.__version__

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, default=str)


def _aggregate(cfg: ExperimentConfig, cell: dict, outcomes: list[dict | None]) -> list[dict]:
    ok = [o for o in outcomes if o is not None]
    R, failures = len(ok), len(outcomes) - len(ok)
    base = {"scenario": cfg.scenario, **cell}
    tail = {"replications": R, "failures": failures, "seed": cfg.seed}
    rows = []
    directions = [k for k in ("left", "right", "empty_set") if ok and k in ok[0]] or ["left", "right"]
    for direction in directions:
        row = {**base, "direction": direction}
        if R == 0:
            row.update(rejection_rate=math.nan, mc_se=math.nan)
        else:
            p = float(np.mean([o[direction] for o in ok]))
            row.update(rejection_rate=p, mc_se=math.sqrt(p * (1.0 - p) / R))
        if cfg.scenario == "confsets" and direction in ("left", "right") and R:
            f = np.array([o["false_" + direction] for o in ok])
            nt = ok[0]["n_tested"]
            cov = 1.0 - row["rejection_rate"]
            row.update(
                coverage=cov, coverage_se=row["mc_se"],
                false_models=float(f.mean()),
                false_models_se=float(f.std(ddof=1) / math.sqrt(R)) if R > 1 else math.nan,
                false_ratio=float(f.mean() / nt), n_tested=int(nt),
            )
        row.update(tail)
        rows.append(row)
    return rows


def _power_rows(cfg: ExperimentConfig) -> list[dict]:
    rule = cfg.options.get("psi_plugin_rule", "first-order")
    g = heatmap_grid(cfg.grid["sigma"], cfg.grid["psi_star"], rule)
    # analytic values: no Monte Carlo error
    return [{"scenario": cfg.scenario, **row, "psi_plugin_rule": rule, "mc_se": 0.0,
             "replications": 0, "seed": cfg.seed} for row in g.rows()]


def run_experiment(cfg: ExperimentConfig, threads: int | None = None,
                   chunk: int = 25) -> tuple[list[dict], RunManifest]:
    """Run every cell; returns long-format rows and the manifest."""
    t_start = time.perf_counter()
    threads = threads or cfg.threads
    if cfg.scenario == "power_grid":
        rows = _power_rows(cfg)
    else:
        cells = cfg.cells()
        tasks = [(cfg, c, lo, min(lo + chunk, cfg.replications))
                 for c in range(len(cells)) for lo in range(0, cfg.replications, chunk)]
        if threads > 1:
            with ProcessPoolExecutor(max_workers=threads) as ex:
                parts = list(ex.map(_run_chunk, tasks))
        else:
            parts = [_run_chunk(t) for t in tasks]
        per_cell: list[list] = [[] for _ in cells]
        for (_, c, _, _), part in zip(tasks, parts):
            per_cell[c].extend(part)
        rows = [row for c, cell in enumerate(cells) for row in _aggregate(cfg, cell, per_cell[c])]
    manifest = RunManifest(asdict(cfg), __version__, time.perf_counter() - t_start, len(rows))
    return rows, manifest


def format_rows(rows: list[dict], fmt: str = "csv") -> str:
    if fmt == "json":
        return json.dumps(rows, indent=2)
    if fmt != "csv":
        raise DomainError("format must be 'csv' or 'json'")
    fields: list[str] = []
    for row in rows:
        fields.extend(k for k in row if k not in fields)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()
