#!/usr/bin/env python3
"""
Spiking multi-modal time series analysis

Usage: python -m spiketsa {train,eval,predict,inspect} [options]
Exit codes: 0 success, 1 usage or configuration error, 2 data or checkpoint error,
3 internal invariant violation or unexpected failure.
"""

import argparse
import logging
import os
import sys

from . import __version__
from .cli import PREDICTIONS_FILE, cmd_eval, cmd_inspect, cmd_predict, cmd_train
from .errors import ConfigError, DataError, InvariantError

logger = logging.getLogger("spiketsa")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser():
    parser = _Parser(prog="spiketsa", description="Spiking neural networks for multi-modal time series.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logging")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sub, checkpoint=True):
        sub.add_argument("--config", help="flat YAML run configuration")
        sub.add_argument("--seed", type=int, help="override the configured seed")
        sub.add_argument("--out", help="override the output directory")
        sub.add_argument("--no-wavelet", action="store_true", help="disable wavelet preprocessing")
        if checkpoint:
            sub.add_argument("--checkpoint", required=True, help="checkpoint written by train")

    common(commands.add_parser("train", help="train a model"), checkpoint=False)

    evaluate = commands.add_parser("eval", help="evaluate a checkpoint")
    common(evaluate)
    evaluate.add_argument("--data", help="dataset CSV overriding the stored data_path")
    evaluate.add_argument("--split", default="test", choices=("train", "val", "test", "all"))

    predict = commands.add_parser("predict", help="predict every window of a CSV file")
    common(predict)
    predict.add_argument("--input", required=True, help="CSV file with input windows")
    predict.add_argument("--output", help="predictions CSV (default: OUT/predictions.csv)")

    inspect = commands.add_parser("inspect", help="write activation heatmaps or training spectra")
    common(inspect)
    inspect.add_argument("what", choices=("heatmap", "spectrum"))
    inspect.add_argument("--data", help="dataset CSV overriding the stored data_path")
    inspect.add_argument("--split", default="val", choices=("train", "val", "test", "all"))
    inspect.add_argument("--samples", type=int, default=32, help="samples averaged into the heatmap")
    inspect.add_argument("--render", action="store_true", help="also render PNG heatmaps (needs matplotlib)")
    return parser


def _overrides(args):
    overrides = {"seed": args.seed, "out": args.out}
    if args.no_wavelet:
        overrides["use_wavelet"] = False
    if getattr(args, "data", None):
        overrides["data_path"] = args.data
    return overrides


def _dispatch(args):
    overrides = _overrides(args)
    if args.command == "train":
        return cmd_train(args.config, overrides)
    if args.config:
        raise ConfigError("--config applies to train only; other commands use the checkpoint's configuration")
    if args.no_wavelet:
        raise ConfigError("--no-wavelet applies to train only; the checkpoint fixes the preprocessing")
    if args.seed is not None:
        raise ConfigError("--seed applies to train only; the checkpoint fixes the seed and data split")
    if args.command == "eval":
        return cmd_eval(args.checkpoint, overrides, args.split, args.out)
    if args.command == "predict":
        output = args.output
        if output is None and args.out:
            output = os.path.join(args.out, PREDICTIONS_FILE)
        return cmd_predict(args.checkpoint, args.input, output)
    return cmd_inspect(args.checkpoint, args.what, overrides, args.split, args.samples, args.out, args.render)


def main(argv=None):
    """Parse arguments, run one command and map failures to exit codes."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_CONFIG

    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        return _dispatch(args)
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"Data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except InvariantError as e:
        print(f"Internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as e:
        logger.exception("unexpected failure")
        print(f"Internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
