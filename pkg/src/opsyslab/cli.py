"""Command-line front end for the experiment suite.

`run <experiment>` executes one named experiment and writes its report;
`list` enumerates the available experiments.  Exit codes: 0 when the
experiment's pass criteria hold, 2 when they fail, 3 when more than 10%
of trials were indeterminate, 1 for usage or configuration errors.
"""

import argparse
import configparser
import os
import sys

from . import experiments

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILED = 2
EXIT_INDETERMINATE = 3

INDETERMINATE_LIMIT = 0.10

_INT_FIELDS = {"seed", "trials", "threads", "bootstrap_resamples"}
_FLOAT_FIELDS = {"tol", "delta"}
_INT_TUPLE_FIELDS = {"n_values", "k_values", "d_values", "p_values",
                     "cover_n_values"}
_FLOAT_TUPLE_FIELDS = {"eps_grid"}


class CliError(Exception):
    """Usage or configuration problem; message goes to stderr, exit 1."""


def _parse_tuple(raw, cast):
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if not parts:
        raise CliError(f"empty value list: {raw!r}")
    try:
        return tuple(cast(p) for p in parts)
    except ValueError as exc:
        raise CliError(f"bad value list {raw!r}: {exc}") from exc


def load_config(path, name):
    """Flat key-value options for one experiment from an INI file.

    Options may live in a section named after the experiment or in
    [DEFAULT]; unknown keys are rejected so typos fail loudly.
    """
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise CliError(f"config file not found: {path}")
    section = parser[name] if parser.has_section(name) else parser["DEFAULT"]
    known = set(experiments.ExperimentConfig.__dataclass_fields__)
    out = {}
    for key, raw in section.items():
        if key == "name":
            continue
        if key not in known:
            raise CliError(f"unknown config option {key!r} for {name}")
        if key in _INT_FIELDS:
            try:
                out[key] = int(raw)
            except ValueError as exc:
                raise CliError(f"option {key!r} must be an integer: {raw!r}") from exc
        elif key in _FLOAT_FIELDS:
            try:
                out[key] = float(raw)
            except ValueError as exc:
                raise CliError(f"option {key!r} must be a number: {raw!r}") from exc
        elif key in _INT_TUPLE_FIELDS:
            out[key] = _parse_tuple(raw, int)
        elif key in _FLOAT_TUPLE_FIELDS:
            out[key] = _parse_tuple(raw, float)
        else:
            raise CliError(f"option {key!r} is not settable from a config file")
    return out


def build_config(args):
    name = args.experiment
    if name not in experiments.REGISTRY:
        raise CliError(
            f"unknown experiment {name!r}; run `opsyslab list` for the catalog"
        )
    options = {}
    if args.config:
        options = load_config(args.config, name)
    seed = options.pop("seed", None)
    if args.seed is not None:
        seed = args.seed
    env_seed = os.environ.get("OPSYS_SEED")
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError as exc:
            raise CliError(f"OPSYS_SEED must be an integer: {env_seed!r}") from exc
    if seed is None:
        raise CliError("a seed is required (--seed, config file, or OPSYS_SEED)")
    if args.threads is not None:
        options["threads"] = args.threads
    try:
        return experiments.ExperimentConfig(name=name, seed=seed, **options)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid configuration: {exc}") from exc


def cmd_run(args):
    cfg = build_config(args)
    fn, _ = experiments.REGISTRY[cfg.name]
    report = fn(cfg)
    if args.out:
        if args.format == "csv":
            report.write_csv(args.out)
        else:
            report.write_json(args.out)
    status = "PASS" if report.passed else "FAIL"
    print(
        f"{cfg.name}: {status} "
        f"({len(report.records)} records, "
        f"{report.indeterminate_fraction:.1%} indeterminate, "
        f"{report.wall_time:.1f}s)"
    )
    if args.out:
        print(f"report written to {args.out}")
    if report.indeterminate_fraction > INDETERMINATE_LIMIT:
        return EXIT_INDETERMINATE
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_list(_args):
    for name, (_fn, desc) in experiments.REGISTRY.items():
        print(f"{name:22s} {desc}")
    return EXIT_OK


def make_parser():
    parser = argparse.ArgumentParser(
        prog="opsyslab",
        description="desk-scale operator-system tensor-cone experiments",
    )
    sub = parser.add_subparsers(dest="command")
    run = sub.add_parser("run", help="run one named experiment")
    run.add_argument("experiment", help="experiment name (see `list`)")
    run.add_argument("--config", help="INI file with per-experiment sections")
    run.add_argument("--seed", type=int, help="override the experiment seed")
    run.add_argument("--out", help="write the report to this path")
    run.add_argument("--format", choices=("json", "csv"), default="json")
    run.add_argument("--threads", type=int, help="trial-level worker threads")
    run.set_defaults(func=cmd_run)
    lst = sub.add_parser("list", help="list the available experiments")
    lst.set_defaults(func=cmd_list)
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
