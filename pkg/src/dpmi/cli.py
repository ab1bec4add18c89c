"""Command-line entry point.

Subcommands: gen (datasets), run (single config), sweep, account (accountant
query), report. Exit codes: 0 success, 2 validation error, 1 runtime failure.
The default output directory comes from --out or the DPMI_OUT env var.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import accountant, datasets, runner


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("DPMI_OUT")
    if not out:
        raise runner.ConfigError("no output directory: pass --out or set DPMI_OUT")
    return Path(out)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", default=None, help="output directory (default: $DPMI_OUT)")
    p.add_argument("--repeats", type=int, default=None, help="override config repeats")
    p.add_argument("--seed", type=int, default=None, help="override config base seed")
    p.add_argument("--force", action="store_true",
                   help="replace an existing experiment id in results.csv")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")


def _load(args) -> runner.ExperimentConfig:
    cfg = runner.load_config(args.config)
    if args.repeats is not None:
        cfg = replace(cfg, repeats=args.repeats)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    single = replace(cfg, sweep_axis=None, sweep_values=[])
    point = runner.SweepPoint("single", cfg.privacy)
    prepared = runner.build_dataset(cfg)
    for r in range(cfg.repeats):
        point.results.append(runner.run_job(single, r, prepared))
    result = runner.SweepResult(single, [point])
    runner.persist_results(out, result, force=args.force)
    print(f"wrote {out / 'results.csv'}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    result = runner.sweep(cfg, jobs=args.jobs)
    runner.persist_results(out, result, force=args.force)
    print(f"wrote {out / 'results.csv'}")
    return 0


def cmd_account(args) -> int:
    steps = accountant.training_steps(args.n, args.lot, args.epochs)
    q = min(args.lot / args.n, 1.0)
    delta = args.delta if args.delta is not None else 1.0 / args.n
    eps = accountant.account_training(q, args.z, steps, delta)
    print(f"{eps:.6g}")
    return 0


def cmd_report(args) -> int:
    results = args.results or args.out or os.environ.get("DPMI_OUT")
    if not results:
        raise runner.ConfigError("no results directory: pass --results or set DPMI_OUT")
    print(runner.report_summary(results))
    return 0


def cmd_gen(args) -> int:
    out = Path(args.out) if args.out else _out_dir(args)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.kind == "skewed_purchases":
        spec = datasets.SkewSpec(n_classes=args.classes, records=args.records,
                                 width=args.width, seed=args.seed)
        train, test = datasets.gen_skewed_purchases(spec)
        train_path = out.with_name(out.stem + "_train.csv")
        test_path = out.with_name(out.stem + "_test.csv")
        datasets.save_csv_dataset(train, train_path)
        datasets.save_csv_dataset(test, test_path)
        print(f"wrote {train_path} and {test_path}")
    elif args.kind == "unbalanced_carts":
        ds = datasets.gen_unbalanced_carts(args.classes, args.records, args.width,
                                           gamma=args.gamma, seed=args.seed)
        datasets.save_csv_dataset(ds, out)
        print(f"wrote {out}")
    elif args.kind == "gray_images":
        ds = datasets.gen_gray_images(args.records, args.side, seed=args.seed)
        datasets.save_csv_dataset(ds, out)
        print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpmi",
        description="DP training, membership-inference attacks, trade-off reports")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a single configuration over its repeats")
    _add_common(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("sweep", help="run the config's privacy-parameter grid")
    _add_common(p)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("account", help="query the Renyi-DP accountant")
    p.add_argument("--n", type=int, required=True, help="training set size")
    p.add_argument("--lot", type=int, required=True, help="lot (batch) size")
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--z", type=float, required=True, help="noise multiplier")
    p.add_argument("--delta", type=float, default=None, help="default 1/n")
    p.set_defaults(fn=cmd_account)

    p = sub.add_parser("report", help="summarize a results directory")
    p.add_argument("--results", default=None, help="directory holding results.csv")
    p.add_argument("--out", default=None, help=argparse.SUPPRESS)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("gen", help="generate a synthetic dataset CSV")
    p.add_argument("--kind", required=True,
                   choices=["skewed_purchases", "unbalanced_carts", "gray_images"])
    p.add_argument("--out", required=True, help="output CSV path (or prefix)")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--records", type=int, default=10000)
    p.add_argument("--width", type=int, default=600)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--side", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (runner.ConfigError, datasets.DatasetError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except runner.PersistError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failure
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
