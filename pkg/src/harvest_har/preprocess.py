"""Filtering, scaling, stream fusion and class balancing."""
from __future__ import annotations

from dataclasses import dataclass
from statistics import NormalDist

import numpy as np
from scipy import signal

from .data import (
    SAMPLE_RATE_HZ,
    EventLog,
    MultiStreamSeries,
    RawRecording,
    concat_series,
    label_runs,
    validate_labels,
)


class ConfigError(ValueError):
    """A configuration value violates its documented range."""


class ScalingError(ValueError):
    """A channel cannot be min-max scaled (zero range)."""

    def __init__(self, channel: str):
        self.channel = channel
        super().__init__(f"channel {channel!r} is constant; cannot scale to [0, 1]")


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class FilterSpec:
    low_cut_hz: float = 0.3
    high_cut_hz: float = 20.0
    order: int = 2
    sample_rate_hz: float = SAMPLE_RATE_HZ

    def __post_init__(self):
        nyq = self.sample_rate_hz / 2
        if not (0 < self.low_cut_hz < self.high_cut_hz < nyq):
            raise ConfigError(
                f"need 0 < low_cut_hz < high_cut_hz < {nyq:g}, got {self.low_cut_hz}, {self.high_cut_hz}"
            )
        if int(self.order) != self.order or self.order < 1:
            raise ConfigError(f"filter order must be a positive integer, got {self.order}")


@dataclass(frozen=True)
class BalancingPolicy:
    mu: float
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not self.mu > 0:
            raise ConfigError(f"mu must be positive, got {self.mu}")
        if not self.sigma >= 0:
            raise ConfigError(f"sigma must be non-negative, got {self.sigma}")


def bandpass(channel, spec: FilterSpec = FilterSpec()) -> np.ndarray:
    """Zero-phase Butterworth bandpass (forward-backward second-order sections)."""
    x = np.asarray(channel, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] <= 3 * spec.order:
        raise ConfigError(f"channel needs more than {3 * spec.order} samples to filter")
    sos = signal.butter(spec.order, [spec.low_cut_hz, spec.high_cut_hz], btype="bandpass",
                        fs=spec.sample_rate_hz, output="sos")
    padlen = min(3 * (2 * len(sos) + 1), x.shape[0] - 1)
    return signal.sosfiltfilt(sos, x, padlen=padlen)


def minmax_scale(x: np.ndarray, name: str = "channel") -> tuple[np.ndarray, float, float]:
    lo, hi = float(np.min(x)), float(np.max(x))
    if not hi > lo:
        raise ScalingError(name)
    y = (x - lo) / (hi - lo)
    return np.clip(y, 0.0, 1.0), lo, hi


def unscale(series: MultiStreamSeries) -> np.ndarray:
    """Undo min-max scaling using the ranges recorded by :func:`fuse`."""
    if series.ranges is None:
        raise ValueError("series carries no scaling ranges")
    lo = np.array([r[0] for r in series.ranges])[:, None]
    hi = np.array([r[1] for r in series.ranges])[:, None]
    return series.channels * (hi - lo) + lo


def filtered_channels(raw: RawRecording, spec: FilterSpec = FilterSpec()) -> np.ndarray:
    """Bandpassed accelerometer axes stacked with the held RSSI (unscaled)."""
    return np.vstack([
        bandpass(raw.accel_x, spec),
        bandpass(raw.accel_y, spec),
        bandpass(raw.accel_z, spec),
        raw.rssi_held(),
    ])


def fuse(raw: RawRecording, spec: FilterSpec = FilterSpec()) -> MultiStreamSeries:
    """Bandpass the accelerometer, hold-upsample RSSI and min-max scale all four."""
    unscaled = filtered_channels(raw, spec)
    out, ranges = [], []
    for name, x in zip(("ax", "ay", "az", "rssi"), unscaled):
        y, lo, hi = minmax_scale(x, name)
        out.append(y)
        ranges.append((lo, hi))
    return MultiStreamSeries(np.vstack(out), scaled=True, ranges=tuple(ranges))


def fuse_series(series: MultiStreamSeries, spec: FilterSpec = FilterSpec()) -> MultiStreamSeries:
    """Like :func:`fuse` for a series whose RSSI is already held at 50 Hz."""
    ch = series.channels
    out, ranges = [], []
    for k, name in enumerate(("ax", "ay", "az", "rssi")):
        x = bandpass(ch[k], spec) if k < 3 else ch[k]
        y, lo, hi = minmax_scale(x, name)
        out.append(y)
        ranges.append((lo, hi))
    return MultiStreamSeries(np.vstack(out), scaled=True, ranges=tuple(ranges))


def estimate_policy(events: EventLog, seed: int = 0) -> BalancingPolicy:
    """Mean and population standard deviation of event lengths."""
    if len(events) < 2:
        raise InsufficientDataError(f"need at least 2 events to estimate a policy, got {len(events)}")
    lengths = events.lengths.astype(np.float64)
    return BalancingPolicy(mu=float(lengths.mean()), sigma=float(lengths.std()), seed=seed)


def balance_indices(labels: np.ndarray, policy: BalancingPolicy) -> np.ndarray:
    """Sample indices kept by :func:`balance`, in increasing order.

    For each event run, ``n = round(mu + sigma * z)`` (inverse-CDF draw,
    clamped to at least 1) preceding non-event samples are kept, truncated at
    the previous event or the series start.
    """
    lab = np.asarray(labels)
    runs = label_runs(lab)
    if runs.shape[0] == 0:
        raise InsufficientDataError("no event samples to balance around")
    rng = np.random.default_rng(policy.seed)
    std_normal = NormalDist()
    keep = []
    prev_end = 0
    for s, e in runs:
        u = rng.random()
        while u <= 0.0:
            u = rng.random()
        n = int(round(policy.mu + policy.sigma * std_normal.inv_cdf(u))) if policy.sigma > 0 else int(round(policy.mu))
        n = max(n, 1)
        lo = max(int(s) - n, prev_end)
        keep.append(np.arange(lo, int(e)))
        prev_end = int(e)
    return np.concatenate(keep)


def balance(series: MultiStreamSeries, labels, policy: BalancingPolicy
            ) -> tuple[MultiStreamSeries, np.ndarray]:
    """Drop non-event samples except a normally distributed prefix per event."""
    lab = validate_labels(labels, len(series))
    idx = balance_indices(lab, policy)
    return MultiStreamSeries(series.channels[:, idx], scaled=series.scaled), lab[idx].copy()


def balance_pieces(pieces: list[tuple[MultiStreamSeries, np.ndarray]], policy: BalancingPolicy
                   ) -> tuple[MultiStreamSeries, np.ndarray]:
    """Balance several disjoint pieces independently and join the results.

    Pieces without any event are dropped entirely, which is what balancing
    does to event-free stretches anyway.
    """
    out_s, out_l = [], []
    for k, (s, lab) in enumerate(pieces):
        if not np.any(lab):
            continue
        bs, bl = balance(s, lab, BalancingPolicy(policy.mu, policy.sigma, policy.seed + k))
        out_s.append(bs)
        out_l.append(bl)
    if not out_s:
        raise InsufficientDataError("no event samples in any piece")
    return concat_series(out_s), np.concatenate(out_l)
