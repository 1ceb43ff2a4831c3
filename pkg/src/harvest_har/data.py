"""Data model for sensor recordings, event logs and labels, plus CSV I/O.

On disk a dataset is a pair of CSV files:

``<name>.csv``
    header ``idx,ax,ay,az,rssi,label`` (the ``label`` column is optional), one
    row per 50 Hz sample. In a raw recording the ``rssi`` cell is filled only
    on the first sample of each second and left blank elsewhere; in a fused
    series it is held across the second.
``<name>.events.csv``
    header ``start,end``, one row per bag-emptying event (sample indices,
    end exclusive).

All numbers are written with six decimals so saving is byte-deterministic.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

SAMPLE_RATE_HZ = 50
ACCEL_RANGE_G = 4.0
CHANNEL_NAMES = ("ax", "ay", "az", "rssi")
DATA_HEADER = ("idx", "ax", "ay", "az", "rssi", "label")
EVENTS_HEADER = ("start", "end")


class DatasetError(ValueError):
    """Raised when a dataset violates a type invariant or cannot be parsed."""

    def __init__(self, message: str, path: str | Path | None = None, line: int | None = None):
        self.path = None if path is None else str(path)
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class RawRecording:
    """Unprocessed 3-axis accelerometer (G, 50 Hz) and RSSI (dBm, 1 Hz)."""

    accel_x: np.ndarray
    accel_y: np.ndarray
    accel_z: np.ndarray
    rssi: np.ndarray
    sample_rate_hz: int = SAMPLE_RATE_HZ
    start_index: int = 0

    def __post_init__(self):
        axes = [np.asarray(getattr(self, k), dtype=np.float64) for k in ("accel_x", "accel_y", "accel_z")]
        n = axes[0].shape[0]
        if n < 1 or any(a.ndim != 1 or a.shape[0] != n for a in axes):
            raise DatasetError("accelerometer channels must be 1-D with equal length >= 1")
        rssi = np.asarray(self.rssi, dtype=np.float64)
        expected = math.ceil(n / self.sample_rate_hz)
        if rssi.ndim != 1 or rssi.shape[0] != expected:
            raise DatasetError(f"rssi must have {expected} samples for {n} accelerometer samples, got {rssi.shape[0]}")
        for name, a in zip(("accel_x", "accel_y", "accel_z"), axes):
            if not np.all(np.isfinite(a)) or np.any(np.abs(a) > ACCEL_RANGE_G):
                raise DatasetError(f"{name} outside the +/-{ACCEL_RANGE_G:g} G sensor range")
        if not np.all(np.isfinite(rssi)):
            raise DatasetError("rssi contains non-finite values")
        for name, a in zip(("accel_x", "accel_y", "accel_z"), axes):
            object.__setattr__(self, name, _frozen(a))
        object.__setattr__(self, "rssi", _frozen(rssi))

    def __len__(self) -> int:
        return self.accel_x.shape[0]

    def rssi_held(self) -> np.ndarray:
        """RSSI upsampled to the accelerometer rate by zero-order hold."""
        return np.repeat(self.rssi, self.sample_rate_hz)[: len(self)]


@dataclass(frozen=True)
class MultiStreamSeries:
    """Four aligned channels ``(ax, ay, az, rssi)`` of equal length.

    ``ranges`` optionally records the per-channel ``(min, max)`` used for
    min-max scaling so the scaling can be inverted.
    """

    channels: np.ndarray
    scaled: bool = False
    ranges: tuple[tuple[float, float], ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.float64)
        if ch.ndim != 2 or ch.shape[0] != 4:
            raise DatasetError(f"expected 4 channels of equal length, got shape {ch.shape}")
        if not np.all(np.isfinite(ch)):
            raise DatasetError("series contains non-finite values")
        if self.scaled and ch.size and (ch.min() < 0.0 or ch.max() > 1.0):
            raise DatasetError("scaled series has values outside [0, 1]")
        object.__setattr__(self, "channels", _frozen(ch))

    def __len__(self) -> int:
        return self.channels.shape[1]

    def __eq__(self, other):
        if not isinstance(other, MultiStreamSeries):
            return NotImplemented
        return self.scaled == other.scaled and np.array_equal(self.channels, other.channels)

    __hash__ = None  # type: ignore[assignment]

    def slice(self, start: int, stop: int) -> "MultiStreamSeries":
        return slice_series(self, start, stop)


@dataclass(frozen=True)
class EventLog:
    """Ordered, non-overlapping ``(start, end)`` sample spans, end exclusive."""

    events: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))

    def __post_init__(self):
        ev = np.asarray(self.events, dtype=np.int64).reshape(-1, 2)
        for i, (s, e) in enumerate(ev):
            if s >= e:
                raise DatasetError(f"event {i}: start {s} is not before end {e}")
            if s < 0:
                raise DatasetError(f"event {i}: negative start {s}")
            if i and s < ev[i - 1, 1]:
                raise DatasetError(f"event {i}: overlaps or precedes event {i - 1}")
        object.__setattr__(self, "events", _frozen(ev))

    def __len__(self) -> int:
        return self.events.shape[0]

    def __iter__(self) -> Iterator[tuple[int, int]]:
        for s, e in self.events:
            yield int(s), int(e)

    def __eq__(self, other):
        if not isinstance(other, EventLog):
            return NotImplemented
        return np.array_equal(self.events, other.events)

    __hash__ = None  # type: ignore[assignment]

    @property
    def starts(self) -> np.ndarray:
        return self.events[:, 0]

    @property
    def ends(self) -> np.ndarray:
        return self.events[:, 1]

    @property
    def lengths(self) -> np.ndarray:
        return self.events[:, 1] - self.events[:, 0]

    def anchors(self) -> np.ndarray:
        """The logged event time used to place predefined labels (span midpoint)."""
        return (self.events[:, 0] + self.events[:, 1]) // 2

    @classmethod
    def from_labels(cls, labels: np.ndarray) -> "EventLog":
        return cls(label_runs(labels))


def validate_labels(labels, n: int | None = None) -> np.ndarray:
    """Return ``labels`` as a read-only uint8 array after checking it is binary."""
    lab = np.asarray(labels)
    if lab.ndim != 1:
        raise DatasetError("labels must be one-dimensional")
    if n is not None and lab.shape[0] != n:
        raise DatasetError(f"label length {lab.shape[0]} does not match series length {n}")
    if lab.size and not np.all((lab == 0) | (lab == 1)):
        raise DatasetError("labels must be exactly 0 or 1")
    return _frozen(lab.astype(np.uint8))


def label_runs(labels: np.ndarray) -> np.ndarray:
    """Maximal runs of ones as an ``(R, 2)`` array of ``[start, end)`` spans."""
    lab = np.asarray(labels).astype(np.int8)
    if lab.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    d = np.diff(np.concatenate(([0], lab, [0])))
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1)
    return np.stack([starts, ends], axis=1).astype(np.int64)


def labels_from_events(n: int, events: EventLog) -> np.ndarray:
    lab = np.zeros(n, dtype=np.uint8)
    for s, e in events:
        lab[max(s, 0):min(e, n)] = 1
    return lab


def slice_series(series: MultiStreamSeries, start: int, stop: int) -> MultiStreamSeries:
    """Channels restricted to ``[start, stop)``; the input is left untouched."""
    n = len(series)
    if not (0 <= start < stop <= n):
        raise IndexError(f"slice [{start}, {stop}) out of bounds for series of length {n}")
    return MultiStreamSeries(series.channels[:, start:stop], scaled=series.scaled, ranges=series.ranges)


def concat_series(parts: list[MultiStreamSeries]) -> MultiStreamSeries:
    if not parts:
        raise ValueError("nothing to concatenate")
    scaled = all(p.scaled for p in parts)
    return MultiStreamSeries(np.concatenate([p.channels for p in parts], axis=1), scaled=scaled)


# --------------------------------------------------------------------------- I/O

def _fmt(v: float) -> str:
    s = f"{v:.6f}"
    return "0.000000" if s == "-0.000000" else s


def events_path_for(path: str | Path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".events.csv")


def save_events(events: EventLog, path: str | Path) -> None:
    buf = io.StringIO()
    buf.write(",".join(EVENTS_HEADER) + "\n")
    for s, e in events:
        buf.write(f"{s},{e}\n")
    Path(path).write_text(buf.getvalue(), encoding="ascii")


def load_events(path: str | Path) -> EventLog:
    path = Path(path)
    rows = []
    with path.open(newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != EVENTS_HEADER:
            raise DatasetError(f"expected header {','.join(EVENTS_HEADER)}", path, 1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DatasetError(f"expected 2 fields, got {len(row)}", path, lineno)
            try:
                s, e = int(row[0]), int(row[1])
            except ValueError:
                raise DatasetError(f"non-integer event bound {row!r}", path, lineno) from None
            if s >= e:
                raise DatasetError(f"event end {e} is not after start {s}", path, lineno)
            if rows and s < rows[-1][1]:
                raise DatasetError("events must be non-overlapping and increasing", path, lineno)
            rows.append((s, e))
    return EventLog(np.array(rows, dtype=np.int64).reshape(-1, 2))


def _write_rows(path: Path, idx: np.ndarray, cols: np.ndarray, rssi_cells: list[str], labels: np.ndarray | None):
    buf = io.StringIO()
    header = DATA_HEADER if labels is not None else DATA_HEADER[:-1]
    buf.write(",".join(header) + "\n")
    for k in range(cols.shape[1]):
        row = [str(int(idx[k])), _fmt(cols[0, k]), _fmt(cols[1, k]), _fmt(cols[2, k]), rssi_cells[k]]
        if labels is not None:
            row.append(str(int(labels[k])))
        buf.write(",".join(row) + "\n")
    path.write_text(buf.getvalue(), encoding="ascii")


def save_dataset(series: MultiStreamSeries, events: EventLog, labels: np.ndarray | None,
                 path: str | Path, events_path: str | Path | None = None) -> None:
    """Write ``series`` (and its event log) in the canonical CSV layout."""
    path = Path(path)
    n = len(series)
    if labels is not None:
        labels = validate_labels(labels, n)
    ch = series.channels
    _write_rows(path, np.arange(n), ch[:3], [_fmt(v) for v in ch[3]], labels)
    save_events(events, events_path or events_path_for(path))


def save_raw(raw: RawRecording, events: EventLog, labels: np.ndarray | None,
             path: str | Path, events_path: str | Path | None = None) -> None:
    """Write a raw recording; RSSI appears only on the first row of each second."""
    path = Path(path)
    n = len(raw)
    if labels is not None:
        labels = validate_labels(labels, n)
    cells = [""] * n
    for k, v in enumerate(raw.rssi):
        cells[k * raw.sample_rate_hz] = _fmt(v)
    cols = np.stack([raw.accel_x, raw.accel_y, raw.accel_z])
    _write_rows(path, raw.start_index + np.arange(n), cols, cells, labels)
    save_events(events, events_path or events_path_for(path))


@dataclass
class _Parsed:
    idx: np.ndarray
    accel: np.ndarray
    rssi: list[str]
    labels: np.ndarray | None


def _parse_data(path: Path) -> _Parsed:
    with path.open(newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DatasetError("empty file", path, 1)
        header = tuple(h.strip() for h in header)
        if header not in (DATA_HEADER, DATA_HEADER[:-1]):
            raise DatasetError(f"expected header {','.join(DATA_HEADER)}", path, 1)
        has_labels = len(header) == len(DATA_HEADER)
        idx, accel, rssi, labels = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DatasetError(f"expected {len(header)} fields, got {len(row)}", path, lineno)
            try:
                i = int(row[0])
                a = (float(row[1]), float(row[2]), float(row[3]))
                cell = row[4].strip()
                if cell:
                    float(cell)
                lab = int(row[5]) if has_labels else 0
            except ValueError:
                raise DatasetError(f"malformed row {row!r}", path, lineno) from None
            if idx and i != idx[-1] + 1:
                raise DatasetError(f"sample index {i} does not follow {idx[-1]}", path, lineno)
            if not all(math.isfinite(v) for v in a):
                raise DatasetError("non-finite accelerometer value", path, lineno)
            if lab not in (0, 1):
                raise DatasetError(f"label {lab} is not 0 or 1", path, lineno)
            idx.append(i)
            accel.append(a)
            rssi.append(cell)
            labels.append(lab)
    if not idx:
        raise DatasetError("no samples", path, 2)
    return _Parsed(
        np.array(idx, dtype=np.int64),
        np.array(accel, dtype=np.float64).T,
        rssi,
        np.array(labels, dtype=np.uint8) if has_labels else None,
    )


def _is_raw(p: _Parsed) -> bool:
    return any(c == "" for c in p.rssi)


def _resolve_events(path: Path, events_path: str | Path | None, n: int) -> EventLog:
    ep = Path(events_path) if events_path is not None else events_path_for(path)
    if events_path is None and not ep.exists():
        return EventLog()
    events = load_events(ep)
    if len(events) and events.ends[-1] > n:
        raise DatasetError(f"event end {int(events.ends[-1])} beyond series length {n}", ep)
    return events


def load_raw(path: str | Path, events_path: str | Path | None = None
             ) -> tuple[RawRecording, EventLog, np.ndarray | None]:
    """Load a raw recording written by :func:`save_raw`."""
    path = Path(path)
    p = _parse_data(path)
    n = p.idx.shape[0]
    rate = SAMPLE_RATE_HZ
    rssi = []
    for k in range(0, n, rate):
        if p.rssi[k] == "":
            raise DatasetError("missing RSSI reading at start of second", path, k + 2)
        rssi.append(float(p.rssi[k]))
    try:
        raw = RawRecording(p.accel[0], p.accel[1], p.accel[2], np.array(rssi),
                           sample_rate_hz=rate, start_index=int(p.idx[0]))
    except DatasetError as exc:
        raise DatasetError(str(exc), path) from None
    return raw, _resolve_events(path, events_path, n), p.labels


def load_dataset(path: str | Path, events_path: str | Path | None = None
                 ) -> tuple[MultiStreamSeries, EventLog, np.ndarray | None]:
    """Load a dataset CSV (raw or fused) as a validated series.

    Raw files have their 1 Hz RSSI held across each second. The series is
    flagged ``scaled`` when every value lies in ``[0, 1]``. Events come from
    ``events_path`` or, if omitted, the sibling ``<name>.events.csv`` when it
    exists.
    """
    path = Path(path)
    p = _parse_data(path)
    if _is_raw(p):
        raw, events, labels = load_raw(path, events_path)
        ch = np.vstack([raw.accel_x, raw.accel_y, raw.accel_z, raw.rssi_held()])
        return MultiStreamSeries(ch, scaled=False), events, labels
    ch = np.vstack([p.accel, np.array([float(c) for c in p.rssi])])
    scaled = bool(ch.min() >= 0.0 and ch.max() <= 1.0)
    try:
        series = MultiStreamSeries(ch, scaled=scaled)
    except DatasetError as exc:
        raise DatasetError(str(exc), path) from None
    return series, _resolve_events(path, events_path, len(series)), p.labels


def is_raw_file(path: str | Path) -> bool:
    return _is_raw(_parse_data(Path(path)))
