"""
The ``convexfm`` command line.

Subcommands: ``train``, ``predict``, ``evaluate``, ``synth`` and
``convert``. Exit status is 0 on success, 2 for usage errors, 3 for data
errors and 4 for numerical failures.
"""

import argparse
import logging
import os
import sys
from collections.abc import Sequence

import numpy as np

from .data import Dataset, SplitSpec, read_dataset, split, synth_generate, \
    write_libfm
from .exceptions import CfmError, ContractError, IncompleteError, \
    InputError, NumericalError
from .linsolve import CgConfig
from .metrics import score
from .model import CfmModel, load_model, predict, save_model
from .parsers.libfm import format_float
from .protocols.cfm import Metric
from .train import TrainConfig, hazan_fit, ridge_fit

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
_handler: logging.Handler | None = None


def check_fields(args: argparse.Namespace, *fields):
    """Checks that the given options were supplied."""
    missing = []
    for field in fields:
        if getattr(args, field) is None:
            missing.append("--" + field.replace("_", "-"))
    if missing != []:
        raise IncompleteError(missing)


def setup_logging(verbosity: int = 0) -> None:
    """Sends log records to stderr: INFO by default, DEBUG with ``-v``,
    WARNING with ``-q``."""
    global _handler
    root = logging.getLogger()
    if _handler is not None:
        root.removeHandler(_handler)
    _handler = logging.StreamHandler(sys.stderr)
    _handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt="%H:%M:%S"))
    root.addHandler(_handler)
    if verbosity > 0:
        root.setLevel(logging.DEBUG)
    elif verbosity < 0:
        root.setLevel(logging.WARNING)
    else:
        root.setLevel(logging.INFO)


def check_paths(inputs: Sequence[str | None] = (),
                outputs: Sequence[str | None] = ()) -> None:
    """Fails early on missing input files or output directories.

    :raises InputError: A path is unusable; the message names it.
    """
    for path in inputs:
        if path is not None and not os.path.isfile(path):
            raise InputError(f"input file not found: {path}")
    for path in outputs:
        if path is None:
            continue
        parent = os.path.dirname(os.path.abspath(path))
        if not os.path.isdir(parent):
            raise InputError(f"output directory not found: {parent}")


def _load_model(path: str) -> CfmModel:
    try:
        return load_model(path)
    except IncompleteError as exc:
        raise InputError(f"{path}: model file lacks "
                         f"{', '.join(exc.missing)}") from exc
    except ValueError as exc:
        if isinstance(exc, CfmError):
            raise
        raise InputError(f"{path}: not a model file ({exc})") from exc


def _train_config(args: argparse.Namespace) -> TrainConfig:
    cg = CgConfig(tol=args.cg_tol, max_iters=args.cg_max_iters)
    return TrainConfig(
        eta=args.eta, lambda1=args.lambda1, max_outer_iters=args.iters,
        step_rule=args.step, cf_constant=args.cf, cg=cg,
        eigen_max_iters=args.eig_max_iters, seed=args.seed,
        eval_every=args.eval_every, stop_gap=args.stop_gap,
        diagonal_correction=not args.no_diagonal_correction,
    )


def _fit(args: argparse.Namespace, train: Dataset, test: Dataset | None):
    if args.ridge:
        cg = CgConfig(tol=args.cg_tol, max_iters=args.cg_max_iters)
        return ridge_fit(train, args.lambda1, cg), None
    return hazan_fit(train, _train_config(args), test)


def cmd_train(args: argparse.Namespace) -> int:
    """Trains a model, writes it and its trace, prints the final metrics."""
    if not args.ridge:
        check_fields(args, "eta")
    if args.repeats < 1:
        raise ContractError("--repeats must be at least 1")
    if args.repeats > 1 and (args.test is not None or args.split is None):
        raise ContractError("--repeats needs random splits: pass --split "
                            "and no --test")
    check_paths([args.data, args.test],
                [args.model, args.trace, args.save_test])
    ds = read_dataset(args.data, args.format)

    scores = []
    for repeat in range(args.repeats):
        seed = args.seed + repeat
        if args.test is not None:
            train, test = ds, read_dataset(args.test, "libfm", ds.d)
        elif args.split is not None:
            train, test = split(ds, SplitSpec(args.split, seed))
        else:
            train, test = ds, None
        model, trace = _fit(args, train, test)
        train_score = score(train.y, predict(model, train.X, train.Xsq),
                            args.metric, train)
        line = f"train_{args.metric}\t{train_score:.6f}"
        if test is not None:
            test_score = score(test.y, predict(model, test.X, test.Xsq),
                               args.metric, test)
            scores.append(test_score)
            line += f"\ttest_{args.metric}\t{test_score:.6f}"
        print(f"seed\t{seed}\t{line}" if args.repeats > 1 else line)
        if repeat == 0:
            if args.model is not None:
                save_model(model, args.model)
            if args.trace is not None and trace is not None:
                trace.save(args.trace)
            if args.save_test is not None and test is not None:
                write_libfm(test, args.save_test)

    if args.repeats > 1:
        values = np.asarray(scores)
        stderr = values.std(ddof=1) / np.sqrt(values.size)
        print(f"mean_test_{args.metric}\t{values.mean():.6f}\t"
              f"stderr\t{stderr:.6f}")
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    """Writes one prediction per sample of a libFM file."""
    check_paths([args.model, args.data], [args.output])
    model = _load_model(args.model)
    ds = read_dataset(args.data, "libfm", model.feature_dim)
    predictions = predict(model, ds.X, ds.Xsq)
    lines = (format_float(value) + "\n" for value in predictions)
    if args.output is None:
        sys.stdout.writelines(lines)
    else:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.writelines(lines)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    """Prints the selected metric of a model on a libFM file."""
    check_paths([args.model, args.data])
    model = _load_model(args.model)
    ds = read_dataset(args.data, "libfm", model.feature_dim)
    value = score(ds.y, predict(model, ds.X, ds.Xsq), args.metric, ds)
    print(f"{args.metric}\t{value:.6f}")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    """Writes a synthetic quadratic regression problem in libFM format."""
    check_paths(outputs=[args.output])
    ds, _ = synth_generate(args.d, args.n, args.seed)
    write_libfm(ds, args.output)
    return EXIT_OK


def cmd_convert(args: argparse.Namespace) -> int:
    """Converts raw MovieLens ratings to libFM format."""
    check_paths([args.input], [args.output])
    write_libfm(read_dataset(args.input, args.format), args.output)
    return EXIT_OK


def _add_train_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("training")
    group.add_argument("--eta", type=float,
                       help="trace budget of the interaction matrix")
    group.add_argument("--lambda1", type=float, default=0.0,
                       help="ridge parameter of the linear term")
    group.add_argument("--iters", type=int, default=100,
                       help="number of Frank-Wolfe steps")
    group.add_argument("--step",
                       choices=["harmonic", "line-search", "line_search"],
                       default="line-search", help="step size rule")
    group.add_argument("--cf", type=float, default=1.0,
                       help="curvature constant scaling the eigensolver "
                            "tolerance")
    group.add_argument("--eval-every", type=int, default=1,
                       help="trace row interval")
    group.add_argument("--stop-gap", type=float,
                       help="stop once the Frank-Wolfe gap is this small")
    group.add_argument("--cg-tol", type=float, default=1e-8)
    group.add_argument("--cg-max-iters", type=int)
    group.add_argument("--eig-max-iters", type=int)
    group.add_argument("--no-diagonal-correction", action="store_true",
                       help="use η·XᵀDX as the gradient")
    group.add_argument("--ridge", action="store_true",
                       help="fit the linear baseline only")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convexfm",
        description="Convex factorization machines trained with Hazan's "
                    "algorithm.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("-q", "--quiet", action="count", default=0)
    commands = parser.add_subparsers(dest="command", required=True)
    metrics = [metric.value for metric in Metric]

    train = commands.add_parser("train", help="train a model")
    train.add_argument("data", help="training data")
    train.add_argument("--format", choices=["libfm", "ml-100k", "ml-1m"],
                       default="libfm")
    train.add_argument("--test", help="test set in libFM format")
    train.add_argument("--split", type=float,
                       help="train on this fraction of a random split")
    train.add_argument("--repeats", type=int, default=1,
                       help="number of seeded splits to average over")
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--metric", choices=metrics, default="rmse")
    train.add_argument("--model", help="where to write the model")
    train.add_argument("--trace", help="where to write the trace CSV")
    train.add_argument("--save-test",
                       help="where to write the held-out split (libFM)")
    _add_train_options(train)
    train.set_defaults(handler=cmd_train)

    predict_ = commands.add_parser("predict", help="predict a libFM file")
    predict_.add_argument("model")
    predict_.add_argument("data")
    predict_.add_argument("--output", help="defaults to stdout")
    predict_.set_defaults(handler=cmd_predict)

    evaluate = commands.add_parser("evaluate", help="score a libFM file")
    evaluate.add_argument("model")
    evaluate.add_argument("data")
    evaluate.add_argument("--metric", choices=metrics, default="rmse")
    evaluate.set_defaults(handler=cmd_evaluate)

    synth = commands.add_parser("synth", help="generate synthetic data")
    synth.add_argument("--d", type=int, default=100)
    synth.add_argument("--n", type=int, default=1000)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--output", required=True)
    synth.set_defaults(handler=cmd_synth)

    convert = commands.add_parser("convert",
                                  help="convert MovieLens ratings to libFM")
    convert.add_argument("input")
    convert.add_argument("--format", choices=["ml-100k", "ml-1m"],
                         default="ml-100k")
    convert.add_argument("--output", required=True)
    convert.set_defaults(handler=cmd_convert)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Runs the command line and returns the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    setup_logging(args.verbose - args.quiet)
    try:
        return args.handler(args)
    except (IncompleteError, ContractError) as exc:
        print(f"convexfm: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, InputError) as exc:
        print(f"convexfm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"convexfm: numerical failure: {exc} {exc.diagnostics}",
              file=sys.stderr)
        return EXIT_NUMERICAL
