"""Command-line interface: ``intrep {simulate,assess,power,confset}``.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, ConvergenceError, DataError, DomainError, IntrepError
from .experiments import ExperimentConfig, format_rows, run_experiment
from .io import FILE_KINDS, assess_file, read_regression
from .numerics import rng_stream
from .power import PLUGIN_RULES
from .regression import confidence_set_models

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


def _common(p: argparse.ArgumentParser, config: bool = False) -> None:
    if config:
        p.add_argument("--config", type=Path, help="TOML experiment config")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--threads", type=int, help="worker processes")
    p.add_argument("--out", type=Path, help="output file (default: stdout)")
    p.add_argument("--alpha", type=float, help="test size")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="intrep", description="Model assessment by internal replication.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a simulation experiment from a config")
    _common(p, config=True)
    p.add_argument("--replications", type=int, help="override the config's replication count")

    p = sub.add_parser("assess", help="assess a model on a data file")
    _common(p)
    p.add_argument("data", type=Path)
    p.add_argument("--kind", choices=FILE_KINDS, required=True)
    p.add_argument("--postulated", choices=("multiplicative", "additive"), default="multiplicative")
    p.add_argument("--family", choices=("normal", "poisson", "gamma"), default="normal")
    p.add_argument("--t0", type=float, help="observation window for event data")
    p.add_argument("--mc-B", type=int, default=1000, dest="mc_B")
    p.add_argument("--normal-threshold", type=int, default=40)
    p.add_argument("--m-blocks", type=int, default=10)
    p.add_argument("--beta", type=float, help="fixed parameter instead of the estimate")
    p.add_argument("--sides", choices=("two-sided", "upper"), default="two-sided")

    p = sub.add_parser("power", help="analytic mean/variance grid for Weibull-truth pairs")
    _common(p, config=True)
    p.add_argument("--sigma", type=float, nargs="+", help="shape axis")
    p.add_argument("--psi", type=float, nargs="+", help="psi* axis")
    p.add_argument("--rule", choices=PLUGIN_RULES, default="first-order")

    p = sub.add_parser("confset", help="confidence set of regression models")
    _common(p)
    p.add_argument("data", type=Path)
    p.add_argument("--dmax", type=int, default=5)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--sigma", type=float, help="known noise SD (default: full-model estimate)")
    p.add_argument("--sides", choices=("two-sided", "upper"), default="two-sided")
    p.add_argument("--all", action="store_true", help="list every model, not only accepted ones")
    return ap


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        out.write_text(text)


def _simulate(args) -> int:
    if args.config is None:
        raise ConfigError("--config is required")
    cfg = ExperimentConfig.from_toml(args.config)
    cfg = cfg.with_overrides(seed=args.seed, threads=args.threads, alpha=args.alpha,
                             replications=args.replications)
    rows, manifest = run_experiment(cfg)
    _emit(format_rows(rows, args.format), args.out)
    if args.out is None:
        sys.stderr.write(manifest.to_json() + "\n")
    else:
        Path(str(args.out) + ".manifest.json").write_text(manifest.to_json() + "\n")
    return EXIT_OK


def _power(args) -> int:
    if args.config is not None:
        cfg = ExperimentConfig.from_toml(args.config)
        if cfg.scenario != "power_grid":
            raise ConfigError("scenario: power needs a power_grid config")
    else:
        if not args.sigma or not args.psi:
            raise ConfigError("give --config or both --sigma and --psi")
        cfg = ExperimentConfig("power_grid", {"sigma": args.sigma, "psi_star": args.psi},
                               replications=1, seed=args.seed or 1,
                               options={"psi_plugin_rule": args.rule})
    rows, manifest = run_experiment(cfg)
    _emit(format_rows(rows, args.format), args.out)
    if args.out is not None:
        Path(str(args.out) + ".manifest.json").write_text(manifest.to_json() + "\n")
    return EXIT_OK


def _assess(args) -> int:
    alpha = 0.05 if args.alpha is None else args.alpha
    rng = rng_stream(1 if args.seed is None else args.seed, 0)
    res, report = assess_file(args.data, args.kind, alpha, rng, postulated=args.postulated,
                              family=args.family, t0=args.t0, mc_B=args.mc_B,
                              normal_threshold=args.normal_threshold, m_blocks=args.m_blocks,
                              beta=args.beta, sides=args.sides)
    if args.format == "json":
        _emit(json.dumps(res.as_dict(), indent=2), args.out)
    else:
        _emit(report, args.out)
    return EXIT_OK


def _confset(args) -> int:
    alpha = 0.05 if args.alpha is None else args.alpha
    data = read_regression(args.data, args.sigma)
    rng = rng_stream(1 if args.seed is None else args.seed, 0)
    cs = confidence_set_models(data, args.dmax, args.k, alpha, rng, args.sigma, args.sides)
    rows = [r for r in cs.rows() if args.all or not (r["reject_u"] or r["reject_comp"])]
    _emit(format_rows(rows, args.format) if rows else "", args.out)
    sys.stderr.write(f"{len(cs.accepted)} of {cs.n_tested} models accepted at alpha = {alpha:g}\n")
    return EXIT_OK


_COMMANDS = {"simulate": _simulate, "assess": _assess, "power": _power, "confset": _confset}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.alpha is not None and not 0 < args.alpha < 1:
            raise ConfigError("--alpha must lie in (0, 1)")
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except (DataError, DomainError, ConvergenceError, IntrepError) as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
