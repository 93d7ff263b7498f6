"""Command-line driver: ``nslkdd-ae <stage> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import DataError, NumericError, ShapeError
from .pipeline import Pipeline, RunConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--train", help="KDDTrain+ style CSV")
    p.add_argument("--test", help="KDDTest+ style CSV")
    p.add_argument("--out", help="output directory (default: out)")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--validation-fraction", type=float)
    p.add_argument("--threshold", type=float, help="frozen threshold for eval")
    p.add_argument("--grid-points", type=int)
    p.add_argument("--objective", choices=("balanced", "youden", "accuracy"))
    p.add_argument("--resolution", type=int, dest="andrews_resolution")
    p.add_argument("--max-rows", type=int, dest="andrews_max_rows")
    p.add_argument("--no-figures", action="store_false", dest="figures", default=None,
                   help="skip PNG rendering")
    p.add_argument("-q", "--quiet", action="store_true")
    return p


STAGES = {
    "schema": ("build the feature schema from the training file", "schema_stage"),
    "train": ("train the autoencoder on the normal training records", "train_stage"),
    "threshold": ("score training records, sweep and select the threshold", "threshold_stage"),
    "eval": ("evaluate the frozen model and threshold on the test file", "eval_stage"),
    "baseline": ("fit and evaluate the naive Bayes baseline", "baseline_stage"),
    "andrews": ("emit Andrews-curve samples of the training records", "andrews_stage"),
    "run": ("all of the above, in order", "run"),
}

_CONFIG_KEYS = ("train", "test", "out", "seed", "epochs", "batch_size", "learning_rate",
                "validation_fraction", "threshold", "grid_points", "objective",
                "andrews_resolution", "andrews_max_rows", "figures")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nslkdd-ae", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _common()
    for name, (help_text, _) in STAGES.items():
        sub.add_parser(name, help=help_text, parents=[common])
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    overrides = {k: getattr(args, k) for k in _CONFIG_KEYS}
    overrides["train_path"] = overrides.pop("train")
    overrides["test_path"] = overrides.pop("test")
    overrides["out_dir"] = overrides.pop("out")
    if args.config:
        return RunConfig.from_file(args.config, **overrides)
    return RunConfig.from_dict({}, **overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        pipeline = Pipeline(cfg)
        result = getattr(pipeline, STAGES[args.command][1])()
    except (DataError, ShapeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (TypeError, ValueError) as exc:
        # bad configuration values
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command in ("eval", "baseline") and not args.quiet:
        print(json.dumps(result.get("metrics", result), indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
