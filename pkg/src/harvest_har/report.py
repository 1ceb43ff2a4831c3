"""Self-contained SVG plots of prediction traces and per-fold metric spreads."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .evaluation import METRIC_NAMES

COLORS = {"truth": "#1f77b4", "prob": "#ff7f0e", "channels": ("#2ca02c", "#9467bd", "#8c564b", "#7f7f7f")}


class ReportError(ValueError):
    pass


@dataclass(frozen=True)
class BoxStats:
    q1: float
    median: float
    q3: float
    whisker_lo: float
    whisker_hi: float
    outliers: tuple[float, ...]


def box_stats(values) -> BoxStats:
    """Quartiles (linear interpolation) and Tukey whiskers at 1.5 IQR."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        raise ReportError("no values for a box plot")
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    inside = v[(v >= q1 - 1.5 * iqr) & (v <= q3 + 1.5 * iqr)]
    out = v[(v < q1 - 1.5 * iqr) | (v > q3 + 1.5 * iqr)]
    return BoxStats(float(q1), float(med), float(q3), float(inside.min()), float(inside.max()),
                    tuple(float(x) for x in out))


def read_trace(path) -> dict[int, dict[str, np.ndarray]]:
    """``trace.csv`` grouped by fold: window index, probability and truth arrays."""
    folds: dict[int, list[tuple[int, float, float]]] = {}
    with open(path, newline="") as fh:
        rows = csv.DictReader(fh)
        for row in rows:
            p = float(row["probability"]) if row["probability"] else float("nan")
            folds.setdefault(int(row["fold"]), []).append((int(row["window"]), p, float(row["truth"])))
    if not folds:
        raise ReportError(f"{path}: trace is empty")
    return {f: {"window": np.array([r[0] for r in rows_]),
                "probability": np.array([r[1] for r in rows_]),
                "truth": np.array([r[2] for r in rows_])}
            for f, rows_ in sorted(folds.items())}


def read_metrics(path) -> dict[str, list[float]]:
    out: dict[str, list[float]] = {m: [] for m in METRIC_NAMES}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["status"] != "ok":
                continue
            for m in METRIC_NAMES:
                out[m].append(float(row[m]))
    if not out[METRIC_NAMES[0]]:
        raise ReportError(f"{path}: no completed folds")
    return out


def _n(x: float) -> str:
    return f"{x:.2f}"


def _polyline(xs, ys, color, width=1.0, opacity=1.0) -> str:
    pts = " ".join(f"{_n(x)},{_n(y)}" for x, y in zip(xs, ys))
    return (f'<polyline fill="none" stroke="{color}" stroke-width="{_n(width)}" '
            f'stroke-opacity="{_n(opacity)}" points="{pts}"/>')


def _svg(width: int, height: int, body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">')
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="white"/>', *body, "</svg>"]) + "\n"


def trace_svg(window, probability, truth, channels=None, title: str = "") -> str:
    """Truth and probability against window index, sensor channels drawn faintly behind.

    ``channels`` is an optional ``(C, W)`` array of per-window channel means in [0, 1].
    """
    w_idx = np.asarray(window)
    if w_idx.size == 0:
        raise ReportError("empty trace")
    width, height, pad = 900, 260, 40
    x0, x1 = pad, width - 10
    y0, y1 = height - pad, 30  # bottom and top of the [0, 1] axis
    span = max(w_idx[-1] - w_idx[0], 1)
    xs = x0 + (w_idx - w_idx[0]) / span * (x1 - x0)

    def ys(v):
        return y0 - np.clip(np.nan_to_num(np.asarray(v, dtype=np.float64)), 0, 1) * (y0 - y1)

    body = [f'<text x="{x0}" y="18" font-family="sans-serif" font-size="13">{escape(title)}</text>',
            f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
            f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>']
    for v in (0.0, 0.5, 1.0):
        y = y0 - v * (y0 - y1)
        body.append(f'<text x="{x0 - 6}" y="{_n(y + 4)}" font-family="sans-serif" font-size="10" '
                    f'text-anchor="end">{v:.1f}</text>')
    body.append(f'<text x="{x1}" y="{y0 + 16}" font-family="sans-serif" font-size="10" '
                f'text-anchor="end">window {int(w_idx[-1])}</text>')
    body.append(f'<text x="{x0}" y="{y0 + 16}" font-family="sans-serif" font-size="10">'
                f'window {int(w_idx[0])}</text>')
    if channels is not None:
        for k, ch in enumerate(np.atleast_2d(channels)):
            body.append(_polyline(xs, ys(ch), COLORS["channels"][k % 4], 0.8, 0.5))
    body.append(_polyline(xs, ys(truth), COLORS["truth"], 1.5))
    body.append(_polyline(xs, ys(probability), COLORS["prob"], 1.5))
    return _svg(width, height, body)


def box_svg(groups: dict[str, dict[str, list[float]]], title: str = "") -> str:
    """Box-whisker plot per metric, one box per group (e.g. model) side by side."""
    if not groups:
        raise ReportError("no metric groups")
    names = list(groups)
    width, height, pad = 160 * len(METRIC_NAMES) + 60, 320, 40
    y0, y1 = height - pad, 40

    def y(v):
        return y0 - v * (y0 - y1)

    body = [f'<text x="{pad}" y="20" font-family="sans-serif" font-size="13">{escape(title)}</text>',
            f'<line x1="{pad}" y1="{y0}" x2="{width - 10}" y2="{y0}" stroke="black"/>',
            f'<line x1="{pad}" y1="{y0}" x2="{pad}" y2="{y1}" stroke="black"/>']
    for v in np.linspace(0, 1, 6):
        body.append(f'<text x="{pad - 6}" y="{_n(y(v) + 4)}" font-family="sans-serif" font-size="10" '
                    f'text-anchor="end">{v:.1f}</text>')
    box_w = 100 / len(names)
    for i, metric in enumerate(METRIC_NAMES):
        cx0 = pad + 30 + 160 * i
        body.append(f'<text x="{cx0 + 50}" y="{y0 + 16}" font-family="sans-serif" font-size="11" '
                    f'text-anchor="middle">{metric}</text>')
        for g, name in enumerate(names):
            s = box_stats(groups[name][metric])
            color = COLORS["channels"][g % 4]
            left = cx0 + g * box_w + 4
            mid = left + (box_w - 8) / 2
            body.append(f'<g class="box" data-group="{escape(name)}" data-metric="{metric}" '
                        f'data-q1="{s.q1:.6f}" data-median="{s.median:.6f}" data-q3="{s.q3:.6f}" '
                        f'data-whisker-lo="{s.whisker_lo:.6f}" data-whisker-hi="{s.whisker_hi:.6f}">')
            body.append(f'<line x1="{_n(mid)}" y1="{_n(y(s.whisker_lo))}" x2="{_n(mid)}" '
                        f'y2="{_n(y(s.whisker_hi))}" stroke="black"/>')
            body.append(f'<rect x="{_n(left)}" y="{_n(y(s.q3))}" width="{_n(box_w - 8)}" '
                        f'height="{_n(y(s.q1) - y(s.q3))}" fill="{color}" fill-opacity="0.5" stroke="black"/>')
            body.append(f'<line x1="{_n(left)}" y1="{_n(y(s.median))}" x2="{_n(left + box_w - 8)}" '
                        f'y2="{_n(y(s.median))}" stroke="black" stroke-width="2"/>')
            for o in s.outliers:
                body.append(f'<circle cx="{_n(mid)}" cy="{_n(y(o))}" r="2.5" fill="none" stroke="black"/>')
            body.append("</g>")
    for g, name in enumerate(names):
        body.append(f'<text x="{width - 120}" y="{40 + 14 * g}" font-family="sans-serif" font-size="11" '
                    f'fill="{COLORS["channels"][g % 4]}">{escape(name)}</text>')
    return _svg(width, height, body)


def write_report(trace_path, out_dir, metrics_paths=(), series=None, window: int = 256) -> list[Path]:
    """One trace plot per fold plus a box plot over ``metrics_paths``.

    ``series`` (optional) supplies sensor channels, averaged per window.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    folds = read_trace(trace_path)
    for fold, tr in folds.items():
        ch = None
        if series is not None:
            n = len(series) // window
            means = series.channels[:, :n * window].reshape(series.channels.shape[0], n, window).mean(axis=2)
            ok = tr["window"] < n
            ch = np.full((series.channels.shape[0], tr["window"].size), np.nan)
            ch[:, ok] = means[:, tr["window"][ok]]
        path = out / f"trace_fold{fold}.svg"
        path.write_text(trace_svg(tr["window"], tr["probability"], tr["truth"], ch, f"fold {fold}"))
        written.append(path)
    if metrics_paths:
        groups = {}
        for p in metrics_paths:
            p = Path(p)
            name = p.parent.name or p.stem
            while name in groups:
                name += "'"
            groups[name] = read_metrics(p)
        path = out / "metrics_box.svg"
        path.write_text(box_svg(groups, "per-fold metrics"))
        written.append(path)
    return written
