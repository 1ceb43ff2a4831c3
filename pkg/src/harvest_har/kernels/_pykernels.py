"""Reference numpy implementations of the sliding-window kernels.

These are used when the compiled extension is unavailable, and serve as the
comparison baseline in ``benchmarks/bench_kernels.py``.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


# windows whose prefix-sum variance falls below this fraction of the running
# second moment are recomputed directly, since cancellation dominates there
NEAR_ZERO_VAR = 1e-9


def _window_mean_std(x: np.ndarray, w: int) -> tuple[np.ndarray, np.ndarray]:
    shift = x.mean()
    v = x - shift
    s1 = np.concatenate(([0.0], np.cumsum(v)))
    s2 = np.concatenate(([0.0], np.cumsum(v * v)))
    mu = (s1[w:] - s1[:-w]) / w
    var = (s2[w:] - s2[:-w]) / w - mu * mu
    redo = np.flatnonzero(var < NEAR_ZERO_VAR * s2[w:] / w)
    if redo.size:
        view = sliding_window_view(v, w)[redo]
        var[redo] = view.var(axis=1)
    return mu + shift, np.sqrt(np.maximum(var, 0.0))


def rolling_window_stats(x, q: int) -> np.ndarray:
    """Per-window mean, std, min, max and first-difference std.

    Row ``j`` describes ``x[j:j + q]``. The derivative statistic is the
    population standard deviation of the ``q - 1`` first differences inside the
    window. Returns an array of shape ``(N - q + 1, 5)``.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if q < 2:
        raise ValueError("window length must be at least 2")
    m = x.shape[0] - q + 1
    if m <= 0:
        return np.empty((0, 5), dtype=np.float64)
    out = np.empty((m, 5), dtype=np.float64)
    out[:, 0], out[:, 1] = _window_mean_std(x, q)
    view = sliding_window_view(x, q)
    out[:, 2] = view.min(axis=1)
    out[:, 3] = view.max(axis=1)
    _, out[:, 4] = _window_mean_std(np.diff(x), q - 1)
    return out


def rolling_mean(x, w: int) -> np.ndarray:
    """Mean of every length-``w`` window of ``x``; shape ``(N - w + 1,)``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if w < 1:
        raise ValueError("window length must be positive")
    m = x.shape[0] - w + 1
    if m <= 0:
        return np.empty(0, dtype=np.float64)
    s1 = np.concatenate(([0.0], np.cumsum(x)))
    return (s1[w:] - s1[:-w]) / w
