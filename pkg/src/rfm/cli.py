"""Command-line entry point.

Subcommands: generate, train, eval, transfer, semigroup, sweep-m, verify,
export. Every run is driven by a YAML experiment config; ``--set key=value``
overrides individual (dotted) fields. Exit code 0 on success, 1 with a
diagnostic on stderr for any failed precondition.
"""

from __future__ import annotations

import argparse
import sys

import yaml

from . import experiments as exp
from . import model as _model


def _parse_overrides(pairs):
    overrides = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep:
            raise ValueError(f"--set expects key=value, got {pair!r}")
        overrides[key] = yaml.safe_load(value)
    return overrides


def _load_config(args) -> exp.ExperimentConfig:
    return exp.ExperimentConfig.load(args.config, _parse_overrides(args.set))


def _load_model(config, args):
    path = args.model or exp.model_path(config)
    return _model.load_model(path)


def cmd_generate(args):
    config = _load_config(args)
    written = exp.generate_dataset(config)
    print(f"wrote {len(written)} dataset files under {config.output_dir}")
    return 0


def cmd_train(args):
    config = _load_config(args)
    model, error = exp.run_training(config)
    shown = "n/a (no test split)" if error is None else f"{error:.4f}"
    print(f"trained m={model.family.m} (lambda={model.ridge:g}); "
          f"relative test error: {shown}")
    return 0


def cmd_eval(args):
    config = _load_config(args)
    model = _load_model(config, args)
    points = args.resolution or config.data["model"]["train_points"]
    error = exp.run_eval(config, model, points)
    print(f"K_test={points}: relative test error {error:.4f}")
    return 0


def cmd_transfer(args):
    config = _load_config(args)
    model = _load_model(config, args)
    errors = exp.run_mesh_transfer(config, model, args.resolutions or None)
    for points in sorted(errors):
        print(f"K_test={points}: relative test error {errors[points]:.4f}")
    return 0


def cmd_semigroup(args):
    config = _load_config(args)
    model = _load_model(config, args)
    errors = exp.run_semigroup_experiment(config, model, args.jmax)
    for j in sorted(errors):
        print(f"j={j}: relative test error {errors[j]:.4f}")
    return 0


def cmd_sweep_m(args):
    config = _load_config(args)
    errors = exp.run_m_sweep(config, args.m)
    for m in args.m:
        print(f"m={m}: relative test error {errors[m]:.4f}")
    return 0


def cmd_verify(args):
    ok = exp.run_verification()
    if args.dir:
        bad = exp.check_provenance(args.dir)
        if bad:
            ok = False
            for name in bad:
                print(f"[FAIL] provenance: {name} does not match config hash")
        else:
            print(f"[PASS] provenance: all artifacts in {args.dir} match config hash")
    return 0 if ok else 1


def cmd_export(args):
    if args.config:
        config = exp.ExperimentConfig.load(args.config)
        table = exp.results_path(config)
        out_dir = args.out or config.output_dir
    else:
        if not args.table or not args.out:
            raise ValueError("export needs either --config or both --table and --out")
        table, out_dir = args.table, args.out
    written = exp.export_results(table, out_dir, args.format)
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rfm", description="Random feature models for PDE solution maps"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, needs_config=True, needs_model=False):
        p = sub.add_parser(name)
        if needs_config:
            p.add_argument("--config", required=True, help="experiment YAML file")
            p.add_argument("--set", action="append", metavar="KEY=VALUE",
                           help="override a config field (dotted path)")
        if needs_model:
            p.add_argument("--model", help="model file (default: the config's model)")
        p.set_defaults(func=func)
        return p

    add("generate", cmd_generate)
    add("train", cmd_train)
    p = add("eval", cmd_eval, needs_model=True)
    p.add_argument("--resolution", type=int, help="test resolution (points per axis)")
    p = add("transfer", cmd_transfer, needs_model=True)
    p.add_argument("--resolutions", type=int, nargs="*",
                   help="test resolutions (default: config dataset.resolutions)")
    p = add("semigroup", cmd_semigroup, needs_model=True)
    p.add_argument("--jmax", type=int, default=None, help="largest composition count")
    p = add("sweep-m", cmd_sweep_m)
    p.add_argument("--m", type=int, nargs="+", required=True, help="feature counts")
    p = sub.add_parser("verify")
    p.add_argument("--dir", help="also check artifact provenance in this run directory")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("export")
    p.add_argument("--config", help="experiment YAML file")
    p.add_argument("--table", help="explicit results.csv path")
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", default="csv")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface a clean diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
