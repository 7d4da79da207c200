"""Command-line entry point: ``spongearb <command> [options]``.

Exit codes: 0 ok, 1 usage/config error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline
from .config import ExperimentConfig, parse_assignment
from .errors import DataError, InvalidSpecError, NumericError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p):
    p.add_argument("--config", help="experiment config JSON (defaults when omitted)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field; the value is parsed as JSON")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="override the output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spongearb", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("build-dataset", help="label the in-sample signals")
    _common(p)
    p = sub.add_parser("train", help="grid-search the classifiers and build the ensemble")
    _common(p)
    p.add_argument("--dataset", help="dataset CSV (defaults to the output directory's)")
    p = sub.add_parser("backtest", help="out-of-sample backtest with the trained ensemble")
    _common(p)
    p.add_argument("--models", help="training directory (defaults to the output directory)")
    p = sub.add_parser("sensitivity", help="run one sensitivity axis")
    _common(p)
    p.add_argument("axis", choices=pipeline.AXES)
    p = sub.add_parser("run", help="build-dataset, train and backtest in one go")
    _common(p)
    p = sub.add_parser("report", help="metrics table for equity CSVs")
    p.add_argument("curves", nargs="+", metavar="NAME=PATH")
    p.add_argument("--benchmark", help="name of the benchmark curve for the IR* t-test")
    p.add_argument("--output", default="report.csv")
    p = sub.add_parser("defaults", help="print the default config")
    return parser


def load_config(args) -> ExperimentConfig:
    data = ExperimentConfig.load(args.config).to_dict() if args.config else ExperimentConfig().to_dict()
    for item in args.set:
        key, value = parse_assignment(item)
        if key not in data:
            raise UsageError(f"unknown config key {key!r}")
        data[key] = value
    if args.seed is not None:
        data["seed"] = args.seed
    if args.out:
        data["output_dir"] = args.out
    return ExperimentConfig.from_dict(data)


def _dispatch(args) -> None:
    if args.command == "defaults":
        sys.stdout.write(ExperimentConfig().to_json())
        return
    if args.command == "report":
        curves = dict(parse_assignment_str(c) for c in args.curves)
        if args.benchmark and args.benchmark not in curves:
            raise UsageError(f"benchmark {args.benchmark!r} is not among the curves")
        res = pipeline.report(curves, args.output, args.benchmark)
        print(f"wrote {args.output} ({len(res['reports'])} strategies)")
        return
    cfg = load_config(args)
    out = cfg.output_path()
    if args.command == "build-dataset":
        path = pipeline.build_dataset(cfg)
        print(f"wrote {path}")
    elif args.command == "train":
        man = pipeline.train(cfg, args.dataset)
        print(f"wrote {out / pipeline.MANIFEST_FILE} (P2 = {man.calibration.P2})")
    elif args.command == "backtest":
        res = pipeline.backtest(cfg, args.models)
        final = res["results"]["strategy"].equity[-1]
        print(f"wrote {out / 'metrics.csv'} (final equity {final:.2f})")
    elif args.command == "sensitivity":
        res = pipeline.sensitivity(cfg, args.axis)
        print(f"wrote {out / f'sensitivity_{args.axis}.csv'}: {res['summary']}")
    elif args.command == "run":
        panel = pipeline.load_panel(cfg)
        pipeline.build_dataset(cfg, panel)
        pipeline.train(cfg)
        pipeline.backtest(cfg, None, panel)
        print(f"wrote results to {out}")


def parse_assignment_str(text):
    if "=" not in text:
        raise UsageError(f"expected NAME=PATH, got {text!r}")
    name, path = text.split("=", 1)
    return name, path


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        _dispatch(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, InvalidSpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
