"""Command-line pipeline: generate, preprocess, label, train, evaluate, report."""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, parse_assignment, read_config_file
from .data import (
    DatasetError,
    EventLog,
    MultiStreamSeries,
    events_path_for,
    is_raw_file,
    load_dataset,
    labels_from_events,
    load_raw,
    save_dataset,
    save_raw,
)
from .evaluation import run_cv, training_data, write_outputs
from .features import extract_batch
from .labeling import learn_labels, predefine_labels
from .models import MODEL_KINDS, ModelFormatError, TrainingError, save_model, train_ensemble, train_rcnn
from .preprocess import (
    ConfigError,
    InsufficientDataError,
    ScalingError,
    balance,
    estimate_policy,
    fuse,
    fuse_series,
)
from .report import ReportError, write_report
from .synth import generate

SEED_ENV = "HARVEST_HAR_SEED"
EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
LABEL_SOURCES = ("predefined", "manual", "learned")
DEFAULT_GENERATED_NAME = "recording.csv"


class UsageError(Exception):
    pass


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None or env.strip() == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None


def _run_config(args) -> RunConfig:
    """Config file, then --set items, then dedicated flags; validated as a whole."""
    assignments = []
    if args.config:
        assignments += read_config_file(args.config)
    for item in args.set or []:
        assignments.append(parse_assignment(item))
    rc = RunConfig.from_sources(_seed(args), assignments)
    flags = {"low": "filter.low_cut_hz", "high": "filter.high_cut_hz", "iters": "labeling.kmeans_iters"}
    for attr, key in flags.items():
        if getattr(args, attr, None) is not None:
            rc.set(key, getattr(args, attr))
    if getattr(args, "events", None) is not None and args.command == "generate" and args.events < 0:
        raise UsageError("--events must be non-negative")
    rc.validate()
    return rc


def _load_fused(path, events_path, rc: RunConfig) -> tuple[MultiStreamSeries, EventLog, np.ndarray | None]:
    """Load a dataset, fusing it first when it is raw or not yet scaled."""
    spec = rc.filter_spec()
    if is_raw_file(path):
        raw, events, labels = load_raw(path, events_path)
        return fuse(raw, spec), events, labels
    series, events, labels = load_dataset(path, events_path)
    if not series.scaled:
        series = fuse_series(series, spec)
    return series, events, labels


def _output_file(out: str, default_name: str) -> Path:
    p = Path(out)
    if out.endswith(("/", os.sep)) or p.is_dir() or p.suffix == "":
        p.mkdir(parents=True, exist_ok=True)
        return p / default_name
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


# ------------------------------------------------------------------- commands

def cmd_generate(args, rc: RunConfig) -> int:
    cfg = rc.scenario(args.events, easy=args.easy)
    raw, events, labels = generate(cfg)
    path = _output_file(args.out, DEFAULT_GENERATED_NAME)
    save_raw(raw, events, labels, path)
    print(f"wrote {path} ({len(raw)} samples, {len(events)} events) and {events_path_for(path)}")
    return EXIT_OK


def cmd_preprocess(args, rc: RunConfig) -> int:
    series, events, labels = _load_fused(args.inp, args.events, rc)
    if args.balance:
        if labels is None:
            labels = labels_from_events(len(series), events)
        policy = estimate_policy(EventLog.from_labels(labels), rc.seed)
        series, labels = balance(series, labels, policy)
        events = EventLog.from_labels(labels)
    path = _output_file(args.out, "fused.csv")
    save_dataset(series, events, labels, path)
    print(f"wrote {path} ({len(series)} samples)")
    return EXIT_OK


def cmd_label(args, rc: RunConfig) -> int:
    series, events, _ = _load_fused(args.inp, args.events, rc)
    if len(events) == 0:
        raise InsufficientDataError("no events to refine; pass --events or provide <name>.events.csv")
    learned = learn_labels(series, events, rc.labeling())
    path = _output_file(args.out, "labeled.csv")
    save_dataset(series, events, learned, path)
    print(f"wrote {path} ({int(learned.sum())} event samples in {len(events)} events)")
    return EXIT_OK


def cmd_train(args, rc: RunConfig) -> int:
    series, _, labels = _load_fused(args.inp, args.events, rc)
    if labels is None:
        raise DatasetError("training needs a label column", args.inp)
    cv = rc.cv()
    data = training_data(series, labels, [(0, len(series))], cv.window, cv.balance, rc.seed)
    if args.model == "ensemble":
        res = train_ensemble(extract_batch(data.tensor), data.targets, rc.mlp(), cv.weight_nb)
    else:
        res = train_rcnn(data.tensor, data.targets, rc.rcnn())
    path = _output_file(args.out, "model.bin")
    save_model(res.params, path)
    print(f"wrote {path} ({args.model}, {data.tensor.shape[0]} training windows, "
          f"final loss {res.loss_trace[-1]:.6f})")
    return EXIT_OK


def evaluation_labels(source: str, series, events: EventLog, labels, rc: RunConfig) -> np.ndarray:
    """Labels used both as training targets and as ground truth."""
    if source == "predefined":
        return predefine_labels(len(series), events, rc.labeling())
    if source == "manual":
        if labels is None:
            raise DatasetError("--labels manual needs a label column in the input")
        return labels
    return learn_labels(series, events, rc.labeling())


def cmd_evaluate(args, rc: RunConfig) -> int:
    series, events, labels = _load_fused(args.inp, args.events, rc)
    if args.labels != "manual" and len(events) == 0:
        raise InsufficientDataError(f"--labels {args.labels} needs an event log")
    truth = evaluation_labels(args.labels, series, events, labels, rc)
    results = run_cv(series, truth, args.model, rc.cv())
    summary = write_outputs(results, args.out)
    skipped = [r.fold for r in results if r.report is None]
    for r in results:
        if r.report is None:
            print(f"fold {r.fold}: skipped ({r.skipped})", file=sys.stderr)
    if summary:
        print(" ".join(f"{k}={v:.4f}" for k, v in summary.items()))
    if len(skipped) == len(results):
        print("every fold was skipped", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def cmd_report(args, rc: RunConfig) -> int:
    trace = Path(args.trace)
    metrics = list(args.metrics or [])
    if not metrics and (trace.parent / "metrics.csv").exists():
        metrics = [trace.parent / "metrics.csv"]
    series = None
    if args.inp:
        series = _load_fused(args.inp, None, rc)[0]
    for p in write_report(trace, args.out, metrics, series, rc.cv().window):
        print(f"wrote {p}")
    return EXIT_OK


# --------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="harvest-har",
        description="Detect bag-emptying events in fruit-picker sensor recordings.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help=f"random seed (default: ${SEED_ENV}, else 0)")
    common.add_argument("--config", metavar="FILE", help="file of key=value settings")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one setting, e.g. rcnn.epochs=20 (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("generate", parents=[common], help="write a synthetic recording")
    p.add_argument("--events", type=int, required=True, help="number of bag-emptying events")
    p.add_argument("--out", required=True, help="output CSV, or a directory for recording.csv")
    p.add_argument("--easy", action="store_true", help="noise-free, high-contrast scenario")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("preprocess", parents=[common], help="filter, fuse and scale a raw recording")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--events", help="event CSV (default: <in>.events.csv)")
    p.add_argument("--low", type=float, help="low cut-off in Hz (default 0.3)")
    p.add_argument("--high", type=float, help="high cut-off in Hz (default 20)")
    p.add_argument("--balance", action="store_true", help="drop non-event samples to balance classes")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("label", parents=[common], help="learn refined event labels")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--events", help="event CSV (default: <in>.events.csv)")
    p.add_argument("--out", required=True)
    p.add_argument("--iters", type=int, help="k-means iterations (default 10)")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("train", parents=[common], help="fit a model on a labelled dataset")
    p.add_argument("--model", choices=MODEL_KINDS, required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--events", help="event CSV (default: <in>.events.csv)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="k-fold cross-validation")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--events", help="event CSV (default: <in>.events.csv)")
    p.add_argument("--model", choices=MODEL_KINDS, required=True)
    p.add_argument("--labels", choices=LABEL_SOURCES, default="learned",
                   help="label source used for training and as ground truth")
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", parents=[common], help="plot traces and metric spreads as SVG")
    p.add_argument("--trace", required=True, help="trace.csv written by evaluate")
    p.add_argument("--metrics", nargs="*", help="metrics.csv files (default: next to the trace)")
    p.add_argument("--in", dest="inp", help="dataset whose channels are drawn behind the trace")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)
    return parser


RUNTIME_ERRORS = (DatasetError, ConfigError, ScalingError, InsufficientDataError, TrainingError,
                  ReportError, ModelFormatError, OSError, IndexError, ValueError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        rc = _run_config(args)
    except (UsageError, ConfigError) as exc:
        print(f"harvest-har {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args, rc)
    except RUNTIME_ERRORS as exc:
        print(f"harvest-har {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
