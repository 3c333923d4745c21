"""Batch command-line front end.

Subcommands: simulate, validate, fit-hours, fit-wages, decompose, ratio,
between, ate, bootstrap, oracle. Exit codes: 0 success, 2 configuration
error, 3 data error, 4 estimation failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bootstrap import BootstrapConfig
from .config import StudyConfig, load_config
from .control import estimate_control
from .data import read_sample_csv, validate_sample, write_sample_csv
from .errors import ConfigError, DataError, EstimationError
from .oracle import HSMParams, closed_form_effects, simulate_hsm
from .study import _prepare_fits, load_group_sample, run_ate, run_between, \
    run_ratio, run_study

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_ESTIMATION = 4


def _add_common(p, config_required=True):
    p.add_argument("--config", required=config_required, help="study config JSON")
    p.add_argument("--out", default=None, help="output directory override")
    p.add_argument("--seed", type=int, default=None, help="seed override")
    p.add_argument("--threads", type=int, default=1, help="worker threads")
    p.add_argument("--base", default=None, help="base group id override")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="seldecomp",
        description="Counterfactual wage decompositions under censored selection")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a synthetic group and write its CSV")
    p.add_argument("--params", required=True, help="model parameter JSON file")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--group-id", default="sim")

    p = sub.add_parser("validate", help="integrity-check a sample CSV")
    p.add_argument("csv", help="sample CSV path")
    p.add_argument("--weight-column", default=None)

    for name, help_text in [
            ("fit-hours", "stage 1 only: hours fits per group"),
            ("fit-wages", "stages 1 and 2: control and wage fits per group"),
            ("decompose", "point decomposition series per family"),
            ("ratio", "decile-type ratio decomposition per family"),
            ("between", "between-family per-period differences"),
            ("bootstrap", "decomposition series with bootstrap intervals")]:
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "ratio":
            p.add_argument("--tau-hi", type=float, default=0.9)
            p.add_argument("--tau-lo", type=float, default=0.1)
        if name == "bootstrap":
            p.add_argument("--replications", type=int, default=None)

    p = sub.add_parser("ate", help="average education effects per group")
    _add_common(p)
    p.add_argument("--educ-var", required=True)
    p.add_argument("--base-level", type=float, required=True, help="level e0")
    p.add_argument("--levels", required=True,
                   help="comma-separated target levels e")

    p = sub.add_parser("oracle", help="closed-form effects between two parameter sets")
    p.add_argument("--p1", required=True, help="group-1 parameter JSON")
    p.add_argument("--p0", required=True, help="group-0 parameter JSON")
    p.add_argument("--draws", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    return ap


def _load_study(args) -> StudyConfig:
    cfg = load_config(args.config)
    if getattr(args, "base", None) is not None:
        cfg = StudyConfig(cfg.groups, cfg.r_spec, cfg.w_spec, cfg.trim,
                          args.base, cfg.taus, cfg.hours_grid, cfg.outcome_grid,
                          cfg.smoothing_seed, cfg.bootstrap, cfg.weight_column,
                          cfg.output_dir)
    return cfg


def _load_params(path) -> HSMParams:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e
    return HSMParams.from_dict(raw)


def _cmd_simulate(args):
    params = _load_params(args.params)
    sample = simulate_hsm(params, args.n, args.seed, group_id=args.group_id)
    write_sample_csv(sample, args.out)
    print(f"wrote {sample.n} observations to {args.out}")
    return 0


def _cmd_validate(args):
    sample = read_sample_csv(args.csv, weight_column=args.weight_column,
                             require_both_masses=False)
    report = validate_sample(sample)
    for line in report.lines():
        print(line)
    return 0 if report.ok else EXIT_DATA


def _cmd_fits(args, with_wages):
    cfg = _load_study(args)
    out = Path(args.out if args.out is not None else cfg.output_dir)
    (out / "fits").mkdir(parents=True, exist_ok=True)
    if with_wages:
        _, fits = _prepare_fits(cfg, out)
        for gid, fit in fits.items():
            (out / "fits" / f"{gid}.control.json").write_text(
                json.dumps(fit.control.to_dict(), sort_keys=True) + "\n")
            (out / "fits" / f"{gid}.outcome.json").write_text(
                json.dumps(fit.outcome.to_dict(), sort_keys=True) + "\n")
        n = len(fits)
    else:
        n = 0
        for source in cfg.groups:
            sample = load_group_sample(source, cfg.weight_column)
            control = estimate_control(sample, cfg.r_spec,
                                       grid_policy=cfg.hours_grid,
                                       smoothing_seed=cfg.smoothing_seed)
            (out / "fits" / f"{source.group_id}.control.json").write_text(
                json.dumps(control.to_dict(), sort_keys=True) + "\n")
            n += 1
    print(f"fitted {n} groups into {out / 'fits'}")
    return 0


def _cmd_decompose(args, with_bootstrap):
    cfg = _load_study(args)
    if with_bootstrap:
        if args.seed is not None or args.replications is not None:
            boot = cfg.bootstrap or BootstrapConfig(200, 0)
            boot = BootstrapConfig(
                args.replications or boot.replications,
                args.seed if args.seed is not None else boot.seed,
                boot.weight_law, boot.ci_level)
            cfg = StudyConfig(cfg.groups, cfg.r_spec, cfg.w_spec, cfg.trim,
                              cfg.base_group, cfg.taus, cfg.hours_grid,
                              cfg.outcome_grid, cfg.smoothing_seed, boot,
                              cfg.weight_column, cfg.output_dir)
        if cfg.bootstrap is None:
            raise ConfigError("bootstrap command needs a bootstrap config block "
                              "or --replications/--seed flags")
    run = run_study(cfg, out_dir=args.out, n_threads=args.threads,
                    with_bootstrap=with_bootstrap)
    out = Path(args.out if args.out is not None else cfg.output_dir)
    print(f"wrote decomposition bundle to {out} "
          f"({len(run.row_labels)} rows, {len(run.fits)} groups)")
    return 0


def _cmd_ratio(args):
    cfg = _load_study(args)
    rows = run_ratio(cfg, tau_hi=args.tau_hi, tau_lo=args.tau_lo, out_dir=args.out)
    print(f"wrote {len(rows)} ratio rows")
    return 0


def _cmd_between(args):
    cfg = _load_study(args)
    rows = run_between(cfg, out_dir=args.out)
    print(f"wrote {len(rows)} between-family rows")
    return 0


def _cmd_ate(args):
    cfg = _load_study(args)
    levels = [float(x) for x in args.levels.split(",") if x]
    if not levels:
        raise ConfigError("--levels must list at least one target level")
    rows = run_ate(cfg, args.educ_var, args.base_level, levels, out_dir=args.out)
    for group, e0, e, val in rows:
        print(f"{group}: ate({e0:g} -> {e:g}) = {val:.6f}")
    return 0


def _cmd_oracle(args):
    p1 = _load_params(args.p1)
    p0 = _load_params(args.p0)
    eff = closed_form_effects(p1, p0, draws=args.draws, seed=args.seed)
    print(json.dumps(eff.to_dict(), sort_keys=True, indent=2))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "fit-hours":
            return _cmd_fits(args, with_wages=False)
        if args.command == "fit-wages":
            return _cmd_fits(args, with_wages=True)
        if args.command == "decompose":
            return _cmd_decompose(args, with_bootstrap=False)
        if args.command == "bootstrap":
            return _cmd_decompose(args, with_bootstrap=True)
        if args.command == "ratio":
            return _cmd_ratio(args)
        if args.command == "between":
            return _cmd_between(args)
        if args.command == "ate":
            return _cmd_ate(args)
        if args.command == "oracle":
            return _cmd_oracle(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except EstimationError as e:
        print(f"estimation failed: {e}", file=sys.stderr)
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())
