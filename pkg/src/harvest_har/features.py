"""Window-level features for the ensemble classifier."""
from __future__ import annotations

import numpy as np

from .data import MultiStreamSeries

WINDOW = 256
STAT_NAMES = ("std", "energy", "rms_d1", "rms_d2", "mean_d1", "mean_d2", "min", "max")
N_STATS = len(STAT_NAMES)


def feature_names(channels=("ax", "ay", "az", "rssi")) -> list[str]:
    return [f"{c}_{s}" for c in channels for s in STAT_NAMES]


def window_starts(n: int, width: int = WINDOW) -> np.ndarray:
    return np.arange(n // width) * width


def windows(series: MultiStreamSeries, width: int = WINDOW) -> list[tuple[int, np.ndarray]]:
    """Disjoint consecutive windows; a trailing remainder shorter than ``width`` is dropped."""
    return [(int(s), series.channels[:, s:s + width]) for s in window_starts(len(series), width)]


def window_tensor(channels: np.ndarray, width: int = WINDOW) -> np.ndarray:
    """``(C, N)`` channels reshaped to ``(N // width, C, width)``."""
    c, n = channels.shape
    m = n // width
    return channels[:, :m * width].reshape(c, m, width).transpose(1, 0, 2)


def extract_batch(tensor: np.ndarray) -> np.ndarray:
    """Features for a ``(W, C, L)`` stack of windows, shape ``(W, C * 8)``."""
    x = np.asarray(tensor, dtype=np.float64)
    if x.ndim != 3 or x.shape[2] < 3:
        raise ValueError(f"windows need length >= 3, got shape {x.shape}")
    d1 = np.diff(x, axis=2)
    d2 = np.diff(x, n=2, axis=2)
    stats = np.stack([
        x.std(axis=2),
        np.mean(x * x, axis=2),
        np.sqrt(np.mean(d1 * d1, axis=2)),
        np.sqrt(np.mean(d2 * d2, axis=2)),
        d1.mean(axis=2),
        d2.mean(axis=2),
        x.min(axis=2),
        x.max(axis=2),
    ], axis=2)
    return stats.reshape(x.shape[0], -1)


def extract(window) -> np.ndarray:
    """32 statistics for one ``(4, L)`` window, grouped per channel."""
    w = np.asarray(window, dtype=np.float64)
    if w.ndim == 1:
        w = w[None, :]
    return extract_batch(w[None])[0]


def window_label(labels, start: int, width: int = WINDOW) -> float:
    """Fraction of event samples in ``labels[start:start + width]``."""
    lab = np.asarray(labels)
    if start < 0 or start + width > lab.shape[0]:
        raise IndexError(f"window [{start}, {start + width}) out of bounds")
    return float(lab[start:start + width].mean())


def window_labels(labels, width: int = WINDOW) -> np.ndarray:
    lab = np.asarray(labels, dtype=np.float64)
    m = lab.shape[0] // width
    return lab[:m * width].reshape(m, width).mean(axis=1)
