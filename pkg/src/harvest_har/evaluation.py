"""Contiguous k-fold cross-validation at window level."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .data import MultiStreamSeries, label_runs, validate_labels
from .features import WINDOW, extract_batch, window_labels, window_tensor
from .models import (
    MlpConfig,
    RcnnConfig,
    TrainingError,
    ensemble_predict,
    rcnn_predict_series,
    train_ensemble,
    train_rcnn,
)
from .preprocess import BalancingPolicy, ConfigError, InsufficientDataError, balance_indices

METRIC_NAMES = ("accuracy", "precision", "recall", "f_score")


@dataclass(frozen=True)
class FoldPlan:
    k: int
    segments: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f_score: float
    tp: int
    fp: int
    tn: int
    fn: int
    degenerate: tuple[str, ...] = ()  # metrics whose denominator was zero


@dataclass(frozen=True)
class CvConfig:
    k: int = 6
    window: int = WINDOW
    balance: bool = True
    weight_nb: float = 0.6
    seed: int = 0
    mlp: MlpConfig = MlpConfig()
    rcnn: RcnnConfig = RcnnConfig()

    def __post_init__(self):
        if self.k < 2:
            raise ConfigError(f"k must be at least 2, got {self.k}")
        if self.window < 3:
            raise ConfigError(f"window must be at least 3 samples, got {self.window}")
        if not 0 < self.weight_nb < 1:
            raise ConfigError(f"weight_nb must lie in (0, 1), got {self.weight_nb}")


@dataclass(frozen=True)
class FoldData:
    tensor: np.ndarray  # (W, C, L)
    targets: np.ndarray  # fractional window labels
    sample_index: np.ndarray  # original sample index of every sample used


@dataclass
class FoldResult:
    fold: int
    start: int  # first test window
    end: int  # one past the last test window
    report: MetricsReport | None
    probabilities: np.ndarray
    truth: np.ndarray  # fractional window labels of the test segment
    train_samples: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0, dtype=int))
    skipped: str = ""


def plan_folds(n_windows: int, k: int = 6) -> FoldPlan:
    """Split ``[0, n_windows)`` into ``k`` contiguous segments, extra windows going first."""
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if n_windows < k:
        raise ValueError(f"cannot split {n_windows} windows into {k} folds")
    base, extra = divmod(n_windows, k)
    segs, pos = [], 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        segs.append((pos, pos + size))
        pos += size
    return FoldPlan(k, tuple(segs))


def confusion(pred, truth) -> tuple[int, int, int, int]:
    p = np.asarray(pred, dtype=bool)
    t = np.asarray(truth, dtype=bool)
    if p.shape != t.shape:
        raise ValueError("prediction and truth must have the same shape")
    return (int(np.sum(p & t)), int(np.sum(p & ~t)), int(np.sum(~p & ~t)), int(np.sum(~p & t)))


def metrics(pred, truth) -> MetricsReport:
    """Confusion-matrix metrics; a zero denominator gives 0 and is flagged."""
    tp, fp, tn, fn = confusion(pred, truth)
    total = tp + fp + tn + fn
    flags = []

    def ratio(num, den, name):
        if den == 0:
            flags.append(name)
            return 0.0
        return num / den

    acc = ratio(tp + tn, total, "accuracy")
    prec = ratio(tp, tp + fp, "precision")
    rec = ratio(tp, tp + fn, "recall")
    f = ratio(2 * prec * rec, prec + rec, "f_score")
    return MetricsReport(acc, prec, rec, f, tp, fp, tn, fn, tuple(flags))


def summarize(reports) -> dict[str, float]:
    """Per-metric median over folds."""
    reports = [r for r in reports if r is not None]
    if not reports:
        raise ValueError("no fold reports to summarize")
    return {m: float(np.median([getattr(r, m) for r in reports])) for m in METRIC_NAMES}


def _training_policy(label_pieces, seed: int) -> BalancingPolicy:
    lengths = np.concatenate([np.diff(label_runs(lab), axis=1)[:, 0] for lab in label_pieces])
    if lengths.size == 0:
        raise InsufficientDataError("no events in the training data")
    return BalancingPolicy(float(lengths.mean()), float(lengths.std()), seed)


def training_data(series: MultiStreamSeries, labels: np.ndarray, pieces, width: int,
                  balance: bool, seed: int) -> FoldData:
    """Window stack for the training pieces ``[(lo, hi), ...]`` (sample ranges).

    When balancing, each piece is thinned separately so no kept sample run
    crosses the gap left by the held-out segment.
    """
    idx_parts = []
    label_pieces = [labels[lo:hi] for lo, hi in pieces if hi > lo]
    policy = _training_policy(label_pieces, seed) if balance else None
    for k, (lo, hi) in enumerate(pieces):
        if hi <= lo:
            continue
        lab = labels[lo:hi]
        if balance:
            if not lab.any():
                continue
            keep = balance_indices(lab, BalancingPolicy(policy.mu, policy.sigma, policy.seed + k))
            idx_parts.append(lo + keep)
        else:
            idx_parts.append(np.arange(lo, hi))
    if not idx_parts:
        raise InsufficientDataError("no training samples")
    idx = np.concatenate(idx_parts)
    n = (idx.size // width) * width
    idx = idx[:n]
    tensor = window_tensor(series.channels[:, idx], width)
    return FoldData(tensor, window_labels(labels[idx], width), idx)


ModelFn = Callable[[FoldData, FoldData], np.ndarray]


def model_fn(kind: str, cfg: CvConfig, fold: int) -> ModelFn:
    """Train on the first argument and return probabilities for the second."""
    if kind == "ensemble":
        mcfg = replace(cfg.mlp, seed=cfg.mlp.seed + fold)

        def fit_predict(train: FoldData, test: FoldData) -> np.ndarray:
            params = train_ensemble(extract_batch(train.tensor), train.targets, mcfg, cfg.weight_nb).params
            return np.asarray(ensemble_predict(params, extract_batch(test.tensor)))
        return fit_predict
    if kind == "rcnn":
        rcfg = replace(cfg.rcnn, seed=cfg.rcnn.seed + fold)

        def fit_predict(train: FoldData, test: FoldData) -> np.ndarray:
            params = train_rcnn(train.tensor, train.targets, rcfg).params
            return rcnn_predict_series(params, test.tensor)
        return fit_predict
    raise ValueError(f"unknown model kind {kind!r}")


def run_cv(series: MultiStreamSeries, labels, kind: str | ModelFn, cfg: CvConfig = CvConfig()
           ) -> list[FoldResult]:
    """Train on k-1 segments, test on the held-out one, for every segment."""
    lab = validate_labels(labels, len(series))
    w = cfg.window
    n_windows = len(series) // w
    plan = plan_folds(n_windows, cfg.k)
    results = []
    for fold, (a, b) in enumerate(plan.segments):
        test_idx = np.arange(a * w, b * w)
        test = FoldData(window_tensor(series.channels[:, a * w:b * w], w),
                        window_labels(lab[a * w:b * w], w), test_idx)
        pieces = [(0, a * w), (b * w, n_windows * w)]
        try:
            train = training_data(series, lab, pieces, w, cfg.balance, cfg.seed + 100 * fold)
            if np.intersect1d(train.sample_index, test_idx).size:
                raise AssertionError("training data overlaps the test segment")
            fn = kind if callable(kind) else model_fn(kind, cfg, fold)
            probs = np.asarray(fn(train, test), dtype=np.float64)
        except (TrainingError, InsufficientDataError) as exc:
            results.append(FoldResult(fold, a, b, None, np.full(b - a, np.nan), test.targets,
                                      skipped=str(exc)))
            continue
        if probs.shape != (b - a,):
            raise ValueError(f"model returned {probs.shape} probabilities for {b - a} windows")
        report = metrics(probs >= 0.5, test.targets >= 0.5)
        results.append(FoldResult(fold, a, b, report, probs, test.targets, train.sample_index))
    return results


def flip_count(probs) -> int:
    """Number of changes of the thresholded prediction along the trace."""
    cls = np.asarray(probs) >= 0.5
    return int(np.count_nonzero(cls[1:] != cls[:-1]))


def flips_per_event(results: list[FoldResult]) -> float:
    """Prediction sign changes per true event, pooled over folds."""
    flips = events = 0
    for r in results:
        if r.report is None:
            continue
        flips += flip_count(r.probabilities)
        events += label_runs(r.truth >= 0.5).shape[0]
    return flips / max(events, 1)


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def write_outputs(results: list[FoldResult], out_dir) -> dict[str, float]:
    """Write ``metrics.csv``, ``trace.csv`` and ``summary.csv``; return the medians."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["fold", "start_window", "end_window", "status", *METRIC_NAMES,
                     "tp", "fp", "tn", "fn", "degenerate"])
        for r in results:
            if r.report is None:
                wr.writerow([r.fold, r.start, r.end, "skipped: " + r.skipped, *[""] * 9])
                continue
            m = r.report
            wr.writerow([r.fold, r.start, r.end, "ok", *[_fmt(getattr(m, k)) for k in METRIC_NAMES],
                         m.tp, m.fp, m.tn, m.fn, ";".join(m.degenerate)])
    with open(out / "trace.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["window", "fold", "probability", "truth"])
        for r in results:
            for j in range(r.end - r.start):
                p = r.probabilities[j]
                wr.writerow([r.start + j, r.fold, "" if np.isnan(p) else _fmt(p), _fmt(r.truth[j])])
    reports = [r.report for r in results if r.report is not None]
    summary = summarize(reports) if reports else {}
    with open(out / "summary.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["metric", "median"])
        for k in METRIC_NAMES:
            wr.writerow([k, _fmt(summary[k]) if summary else ""])
        wr.writerow(["folds", len(reports)])
    return summary
