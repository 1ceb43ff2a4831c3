"""Semi-supervised refinement of bag-emptying event labels.

Logged event times are turned into fixed-length predefined spans, every
sample gets a feature vector from the window around it, 2-means clustering
seeded from the predefined classes refines the spans, and the clusters are
filtered against the predefined span with intersection/union rules.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import EventLog, MultiStreamSeries, label_runs, validate_labels
from .kernels import rolling_mean, rolling_window_stats
from .preprocess import ConfigError

SAMPLE_STATS = ("mean", "std", "min", "max", "deriv_std")


@dataclass(frozen=True)
class LabelingConfig:
    """Parameters of the label-learning procedure.

    ``center_windows`` places the class of the window ``[j, j + q)`` on its
    centre sample ``j + q // 2`` rather than on ``j``, removing the half-window
    lag the forward window would otherwise introduce.
    """

    window_q: int = 256
    pre_span: int = 500
    post_span: int = 700
    kmeans_iters: int = 10
    neighbor_weight: float = 1.0
    center_windows: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.window_q < 2:
            raise ConfigError("window_q must be >= 2")
        if self.pre_span < 0 or self.post_span < 0 or self.pre_span + self.post_span <= 0:
            raise ConfigError("pre_span and post_span must be non-negative with a positive sum")
        if self.kmeans_iters < 1:
            raise ConfigError("kmeans_iters must be >= 1")
        if self.neighbor_weight < 0:
            raise ConfigError("neighbor_weight must be non-negative")

    @property
    def offset(self) -> int:
        return self.window_q // 2 if self.center_windows else 0


@dataclass(frozen=True)
class SampleFeature:
    mean: np.ndarray
    std: np.ndarray
    min: np.ndarray
    max: np.ndarray
    deriv_std: np.ndarray
    neighbor_flag: float

    def as_vector(self) -> np.ndarray:
        per_channel = np.stack([self.mean, self.std, self.min, self.max, self.deriv_std], axis=1)
        return np.concatenate([per_channel.ravel(), [self.neighbor_flag]])


@dataclass
class KMeansResult:
    classes: np.ndarray
    centroids: np.ndarray
    wcss: list[float]
    n_iter: int
    stopped_early: bool = False


@dataclass
class SegmentResult:
    start: int
    stop: int
    predefined: np.ndarray
    initial: np.ndarray
    predicted: np.ndarray
    filtered: np.ndarray
    wcss: list[float] = field(default_factory=list)


# ----------------------------------------------------------------- predefinition

def _anchor_times(events) -> np.ndarray:
    if isinstance(events, EventLog):
        return events.anchors()
    return np.asarray(events, dtype=np.int64).reshape(-1)


def predefined_spans(n: int, events, cfg: LabelingConfig = LabelingConfig()) -> np.ndarray:
    """One ``[lo, hi)`` span per logged time, clipped to the series.

    Where neighbouring spans would overlap, both are cut at the midpoint of
    the overlap so every event keeps its own span.
    """
    times = _anchor_times(events)
    if np.any(times < 0) or np.any(times >= n):
        raise IndexError(f"logged event time outside [0, {n})")
    if np.any(np.diff(times) <= 0):
        raise ValueError("logged event times must be strictly increasing")
    lo = np.maximum(times - cfg.pre_span, 0)
    hi = np.minimum(times + cfg.post_span, n)
    for i in range(1, times.shape[0]):
        if hi[i - 1] > lo[i]:
            m = (hi[i - 1] + lo[i]) // 2
            m = min(max(m, times[i - 1] + 1), times[i])
            hi[i - 1] = m
            lo[i] = m
    return np.stack([lo, hi], axis=1).astype(np.int64)


def predefine_labels(n: int, events, cfg: LabelingConfig = LabelingConfig()) -> np.ndarray:
    """Ones on ``[t - pre_span, t + post_span)`` around each logged time ``t``."""
    times = _anchor_times(events)
    if np.any(times < 0) or np.any(times >= n):
        raise IndexError(f"logged event time outside [0, {n})")
    lab = np.zeros(n, dtype=np.uint8)
    for t in times:
        lab[max(int(t) - cfg.pre_span, 0):min(int(t) + cfg.post_span, n)] = 1
    return lab


# -------------------------------------------------------------------- features

def sample_features(series: MultiStreamSeries, labels, j: int,
                    cfg: LabelingConfig = LabelingConfig()) -> SampleFeature:
    """Statistics of the window ``[j, j + q)`` computed directly."""
    q = cfg.window_q
    n = len(series)
    if j < 0 or j + q > n:
        raise IndexError(f"window [{j}, {j + q}) exceeds series of length {n}")
    w = series.channels[:, j:j + q]
    d = np.diff(w, axis=1)
    lab = np.asarray(labels)[j:j + q]
    return SampleFeature(
        mean=w.mean(axis=1), std=w.std(axis=1), min=w.min(axis=1), max=w.max(axis=1),
        deriv_std=d.std(axis=1), neighbor_flag=float(lab.mean()),
    )


def feature_matrix(series: MultiStreamSeries, cfg: LabelingConfig = LabelingConfig()) -> np.ndarray:
    """Per-window statistics for every window start, shape ``(N - q + 1, 20)``.

    Columns are grouped by channel in the order of ``SAMPLE_STATS``.
    """
    blocks = [rolling_window_stats(series.channels[k], cfg.window_q) for k in range(4)]
    return np.concatenate(blocks, axis=1)


def initialize_classes(labels, j_range, cfg: LabelingConfig = LabelingConfig()) -> np.ndarray:
    """Class 1 where at least half of the window ``[j, j + q)`` is labelled 1."""
    lab = np.asarray(labels, dtype=np.float64)
    means = rolling_mean(lab, cfg.window_q)
    j = np.asarray(j_range if not isinstance(j_range, range) else np.arange(j_range.start, j_range.stop, j_range.step))
    return (means[j] >= 0.5).astype(np.uint8)


def zscore(x: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return (x - mu) / sd


# --------------------------------------------------------------------- k-means

def _centroids(x: np.ndarray, c: np.ndarray, previous: np.ndarray | None) -> np.ndarray:
    out = np.empty((2, x.shape[1]))
    for k in (0, 1):
        members = c == k
        if members.any():
            out[k] = x[members].mean(axis=0)
        elif previous is not None:
            out[k] = previous[k]
        else:
            raise ValueError(f"cluster {k} is empty at initialisation")
    return out


def _wcss(x: np.ndarray, c: np.ndarray, mu: np.ndarray) -> float:
    return float(np.sum((x - mu[c]) ** 2))


def kmeans_trace(features: np.ndarray, classes, cfg: LabelingConfig = LabelingConfig(),
                 neighbor_fn=None) -> KMeansResult:
    """2-means seeded from ``classes``, returning the full iteration record.

    ``neighbor_fn(classes) -> flags`` adds a neighbour-indicator column (scaled
    by ``neighbor_weight``) recomputed from the current assignment before each
    assignment step. Because that column moves with the assignment, a step is
    only accepted if the within-cluster sum of squares does not rise; otherwise
    iteration stops with the previous assignment.
    """
    static = np.asarray(features, dtype=np.float64)
    c = np.asarray(classes).astype(np.intp)
    if static.shape[0] != c.shape[0]:
        raise ValueError("features and classes differ in length")
    if not (np.any(c == 0) and np.any(c == 1)):
        raise ValueError("both classes must be present to seed the clusters")

    def build(cls):
        if neighbor_fn is None:
            return static
        flag = np.asarray(neighbor_fn(cls), dtype=np.float64)[:, None]
        return np.hstack([static, cfg.neighbor_weight * flag])

    x = build(c)
    mu = _centroids(x, c, None)
    j = _wcss(x, c, mu)
    trace = [j]
    n_iter = 0
    stopped = False
    for _ in range(cfg.kmeans_iters):
        d0 = np.sum((x - mu[0]) ** 2, axis=1)
        d1 = np.sum((x - mu[1]) ** 2, axis=1)
        c_new = np.where(d1 < d0, 1, np.where(d0 < d1, 0, c))
        x_new = build(c_new)
        mu_new = _centroids(x_new, c_new, mu)
        j_new = _wcss(x_new, c_new, mu_new)
        if j_new > j:
            stopped = True
            break
        n_iter += 1
        changed = not np.array_equal(c_new, c)
        c, x, mu, j = c_new, x_new, mu_new, j_new
        trace.append(j)
        if not changed:
            break
    return KMeansResult(c.astype(np.uint8), mu, trace, n_iter, stopped)


def kmeans_refine(features: np.ndarray, classes, cfg: LabelingConfig = LabelingConfig(),
                  neighbor_fn=None) -> np.ndarray:
    return kmeans_trace(features, classes, cfg, neighbor_fn).classes


# ---------------------------------------------------------------------- filter

def filter_predictions(predicted, predefined, cfg: LabelingConfig | None = None) -> np.ndarray:
    """Reduce predictions to one run per predefined span.

    Runs that touch no predefined sample are dropped, surviving runs around a
    span are joined across their gaps (never extended outward), and a joined
    run longer than twice the span is replaced by the span itself. A span with
    no surviving run also falls back to the span.
    """
    pred = np.asarray(predicted)
    pre = np.asarray(predefined)
    if pred.shape != pre.shape:
        raise ValueError("predicted and predefined sequences differ in length")
    runs = label_runs(pred)
    out = np.zeros(pred.shape[0], dtype=np.uint8)
    for a, b in label_runs(pre):
        hit = runs[(runs[:, 0] < b) & (runs[:, 1] > a)]
        if hit.shape[0] == 0:
            out[a:b] = 1
            continue
        s, e = int(hit[:, 0].min()), int(hit[:, 1].max())
        if e - s > 2 * (b - a):
            out[a:b] = 1
        else:
            out[s:e] = 1
    return out


# ---------------------------------------------------------------- whole series

def segment_bounds(n: int, events: EventLog, spans: np.ndarray) -> np.ndarray:
    """``[previous event end, next event start)`` for every event, widened to its span."""
    out = np.empty((len(events), 2), dtype=np.int64)
    for i in range(len(events)):
        lo = int(events.ends[i - 1]) if i > 0 else 0
        hi = int(events.starts[i + 1]) if i + 1 < len(events) else n
        out[i] = (min(lo, spans[i, 0]), max(hi, spans[i, 1]))
    return out


def refine_segment(feats: np.ndarray, lo: int, hi: int, span: tuple[int, int],
                   cfg: LabelingConfig = LabelingConfig()) -> SegmentResult:
    """Cluster and filter one segment ``[lo, hi)`` of a featurised series.

    ``feats`` is the output of :func:`feature_matrix` for the whole series;
    its row ``r`` belongs to sample ``r + cfg.offset``.
    """
    q, h = cfg.window_q, cfg.offset
    m = feats.shape[0]
    length = hi - lo
    predefined = np.zeros(length, dtype=np.uint8)
    predefined[span[0] - lo:span[1] - lo] = 1

    # positions (absolute samples) that own a feature row
    p0, p1 = max(lo, h), min(hi, h + m)
    initial = predefined.copy()
    predicted = predefined.copy()
    trace: list[float] = []
    if p1 - p0 >= 2:
        rows = np.arange(p0, p1) - h
        # window mean of the predefined labels, padded with zeros outside the segment
        padded = np.zeros(length + 2 * q)
        padded[q:q + length] = predefined
        win = rolling_mean(padded, q)
        idx = rows - lo + q
        init = (win[idx] >= 0.5).astype(np.uint8)
        initial[p0 - lo:p1 - lo] = init
        if init.min() != init.max():
            static = zscore(feats[rows])

            def neighbor(cls):
                full = initial.copy()
                full[p0 - lo:p1 - lo] = cls
                pad = np.zeros(length + 2 * q)
                pad[q:q + length] = full
                return rolling_mean(pad, q)[idx]

            res = kmeans_trace(static, init, cfg, neighbor if cfg.neighbor_weight > 0 else None)
            predicted[p0 - lo:p1 - lo] = res.classes
            trace = res.wcss
        else:
            predicted = initial.copy()
    filtered = filter_predictions(predicted, predefined, cfg)
    return SegmentResult(lo, hi, predefined, initial, predicted, filtered, trace)


def learn_labels_detailed(series: MultiStreamSeries, events: EventLog,
                          cfg: LabelingConfig = LabelingConfig()
                          ) -> tuple[np.ndarray, list[SegmentResult]]:
    n = len(series)
    out = np.zeros(n, dtype=np.uint8)
    if len(events) == 0:
        return out, []
    if int(events.ends[-1]) > n:
        raise IndexError("event log extends beyond the series")
    spans = predefined_spans(n, events, cfg)
    bounds = segment_bounds(n, events, spans)
    feats = feature_matrix(series, cfg)
    results = []
    for i in range(len(events)):
        lo, hi = int(bounds[i, 0]), int(bounds[i, 1])
        res = refine_segment(feats, lo, hi, (int(spans[i, 0]), int(spans[i, 1])), cfg)
        out[lo:hi] |= res.filtered
        results.append(res)
    return out, results


def learn_labels(series: MultiStreamSeries, events: EventLog,
                 cfg: LabelingConfig = LabelingConfig()) -> np.ndarray:
    """Refined per-sample labels for the whole series."""
    return learn_labels_detailed(series, events, cfg)[0]


def event_iou(labels, truth: EventLog) -> np.ndarray:
    """Best intersection-over-union of any labelled run with each true event."""
    runs = label_runs(validate_labels(labels))
    out = np.zeros(len(truth))
    for i, (s, e) in enumerate(truth):
        hit = runs[(runs[:, 0] < e) & (runs[:, 1] > s)]
        best = 0.0
        for a, b in hit:
            inter = min(b, e) - max(a, s)
            union = max(b, e) - min(a, s)
            best = max(best, inter / union)
        out[i] = best
    return out
