"""Synthetic picker recordings with known bag-emptying events.

Each event follows the bag-drop routine: a strained walk to the bin, lifting
the bag in, shaking it empty, then walking back to the trees. Between events
the picker picks fruit, occasionally relocating to another tree. Phases emit
band-limited oscillations (2-4 random sinusoids) plus white noise; RSSI
follows a log-distance path-loss model driven by a piecewise-linear
picker-to-bin distance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .data import SAMPLE_RATE_HZ, ACCEL_RANGE_G, EventLog, RawRecording, labels_from_events
from .preprocess import ConfigError

FIELD_TOTAL_SAMPLES = 580986
FIELD_TOTAL_EVENTS = 64
PHASE_KINDS = ("picking", "walk_to_bin", "lift", "shake_empty", "walk_back")
EVENT_KINDS = ("walk_to_bin", "lift", "shake_empty")

# frequency band (Hz) of the oscillation each phase kind emits
_BANDS = {
    "picking": (1.0, 6.0),
    "relocate": (1.5, 4.0),
    "walk_to_bin": (1.5, 4.0),
    "lift": (1.0, 10.0),
    "shake_empty": (3.0, 10.0),
    "walk_back": (1.5, 4.0),
}
_AXIS_GAIN = np.array([1.0, 0.8, 1.2])
_GRAVITY = np.array([0.15, -0.25, 0.95])


@dataclass(frozen=True)
class ScenarioConfig:
    duration_samples: int
    n_events: int
    mean_event_duration_s: float = 50.0
    event_duration_sd_s: float = 6.0
    empty_phase_range_s: tuple[float, float] = (10.0, 20.0)
    lift_duration_s: float = 1.0
    walk_back_range_s: tuple[float, float] = (6.0, 12.0)
    gait_ramp_frac: float = 0.3
    picking_amp: float = 0.08
    walking_amp: float = 0.30
    lift_spike_amp: float = 0.90
    shake_amp: float = 0.35
    amp_jitter: float = 0.20
    relocate_prob: float = 0.12
    rssi_near_dbm: float = -50.0
    rssi_far_dbm: float = -85.0
    rssi_noise_db: float = 3.0
    noise_sd: float = 0.03
    spike_prob: float = 0.8
    margin_s: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.duration_samples < 1:
            raise ConfigError("duration_samples must be positive")
        if self.n_events < 0:
            raise ConfigError("n_events must be non-negative")
        mean_samples = self.mean_event_duration_s * SAMPLE_RATE_HZ
        if self.n_events * mean_samples >= self.duration_samples:
            raise ConfigError(
                f"{self.n_events} events of ~{mean_samples:.0f} samples do not fit in {self.duration_samples} samples"
            )
        amps = (self.picking_amp, self.walking_amp, self.lift_spike_amp, self.shake_amp)
        if min(amps) <= 0 or self.noise_sd < 0:
            raise ConfigError("amplitudes must be positive and noise_sd non-negative")
        if not (self.picking_amp < self.walking_amp < self.shake_amp):
            raise ConfigError("need picking_amp < walking_amp < shake_amp")
        for name in ("empty_phase_range_s", "walk_back_range_s"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ConfigError(f"{name} must be an increasing positive pair")
        if not self.rssi_near_dbm > self.rssi_far_dbm:
            raise ConfigError("rssi_near_dbm must exceed rssi_far_dbm")
        if not 0.0 <= self.spike_prob <= 1.0:
            raise ConfigError("spike_prob must be a probability")


@dataclass(frozen=True)
class ActivityPhase:
    kind: str
    start: int
    end: int
    spike: bool = False

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass
class SyntheticRecording:
    raw: RawRecording
    events: EventLog
    labels: np.ndarray
    phases: list[ActivityPhase] = field(default_factory=list)

    def __iter__(self):
        # unpacks as (raw, events, labels)
        return iter((self.raw, self.events, self.labels))


def default_scenario(n_events: int, seed: int = 0) -> ScenarioConfig:
    """A scenario with a realistic event density.

    The density is 64 events per 580986 samples, roughly one event every
    9078 samples. With no events a single event-slot of picking is produced.
    """
    if n_events < 0:
        raise ConfigError("n_events must be non-negative")
    per_event = FIELD_TOTAL_SAMPLES / FIELD_TOTAL_EVENTS
    duration = int(round(per_event * max(n_events, 1)))
    return ScenarioConfig(duration_samples=duration, n_events=n_events, seed=seed)


# ----------------------------------------------------------------------- layout

def _layout(cfg: ScenarioConfig, rng: np.random.Generator) -> list[ActivityPhase]:
    fs = SAMPLE_RATE_HZ
    n = cfg.duration_samples
    if cfg.n_events == 0:
        return [ActivityPhase("picking", 0, n)]
    slot = n / cfg.n_events
    margin = int(cfg.margin_s * fs)
    lift = int(round(cfg.lift_duration_s * fs))
    phases: list[ActivityPhase] = []
    cursor = 0
    for k in range(cfg.n_events):
        slot_lo = int(round(k * slot))
        slot_hi = int(round((k + 1) * slot))
        dur_s = rng.normal(cfg.mean_event_duration_s, cfg.event_duration_sd_s)
        dur_s = float(np.clip(dur_s, cfg.mean_event_duration_s - 3 * cfg.event_duration_sd_s,
                              cfg.mean_event_duration_s + 3 * cfg.event_duration_sd_s))
        total = int(round(dur_s * fs))
        empty = int(round(rng.uniform(*cfg.empty_phase_range_s) * fs))
        walk = total - empty - lift
        if walk < 2 * fs:
            walk = 2 * fs
            total = walk + lift + empty
        back = int(round(rng.uniform(*cfg.walk_back_range_s) * fs))
        room = (slot_hi - slot_lo) - total - back - 2 * margin
        if room < 0:
            raise ConfigError(f"event {k} ({total} samples) does not fit its {slot_hi - slot_lo}-sample slot")
        start = slot_lo + margin + int(rng.integers(0, room + 1))
        if start > cursor:
            phases.append(ActivityPhase("picking", cursor, start))
        t = start
        phases.append(ActivityPhase("walk_to_bin", t, t + walk))
        t += walk
        phases.append(ActivityPhase("lift", t, t + lift, spike=bool(rng.random() < cfg.spike_prob)))
        t += lift
        phases.append(ActivityPhase("shake_empty", t, t + empty))
        t += empty
        phases.append(ActivityPhase("walk_back", t, t + back))
        cursor = t + back
    if cursor < n:
        phases.append(ActivityPhase("picking", cursor, n))
    return phases


# ---------------------------------------------------------------------- signals

def _oscillation(rng: np.random.Generator, length: int, band: tuple[float, float]) -> np.ndarray:
    """Three axes of unit-RMS sums of 2-4 random sinusoids."""
    t = np.arange(length) / SAMPLE_RATE_HZ
    out = np.empty((3, length))
    for a in range(3):
        k = int(rng.integers(2, 5))
        freqs = rng.uniform(band[0], band[1], size=k)
        phases = rng.uniform(0, 2 * np.pi, size=k)
        weights = rng.uniform(0.5, 1.0, size=k)
        sig = (weights[:, None] * np.sin(2 * np.pi * freqs[:, None] * t + phases[:, None])).sum(axis=0)
        out[a] = sig / math.sqrt(0.5 * float(np.sum(weights ** 2)))
    return out


def _burst(length: int, amp: float, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(length) / SAMPLE_RATE_HZ
    f = rng.uniform(3.0, 6.0)
    env = np.hanning(length) if length > 2 else np.ones(length)
    return amp * env * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))


def _path_loss_exponent(cfg: ScenarioConfig, d_near: float, d_far: float) -> float:
    return (cfg.rssi_near_dbm - cfg.rssi_far_dbm) / (10.0 * math.log10(d_far / d_near))


def generate_detailed(cfg: ScenarioConfig) -> SyntheticRecording:
    rng = np.random.default_rng(cfg.seed)
    fs = SAMPLE_RATE_HZ
    n = cfg.duration_samples
    phases = _layout(cfg, rng)

    accel = np.zeros((3, n))
    dist = np.empty(n)
    d_near, d_far = 1.0, 40.0
    d_tree = d_far * rng.uniform(0.6, 1.4)

    def jitter():
        return math.exp(cfg.amp_jitter * rng.standard_normal())

    for ph in phases:
        s, e = ph.start, ph.end
        length = e - s
        if ph.kind == "picking":
            # picking proceeds in bouts; some bouts are short walks to a new tree
            t = s
            while t < e:
                bout = min(int(rng.uniform(4.0, 15.0) * fs), e - t)
                if rng.random() < cfg.relocate_prob:
                    amp = cfg.walking_amp * rng.uniform(0.6, 0.9)
                    accel[:, t:t + bout] += amp * _oscillation(rng, bout, _BANDS["relocate"])
                    d_new = float(np.clip(d_tree * rng.uniform(0.7, 1.4), 0.5 * d_far, 1.6 * d_far))
                    dist[t:t + bout] = np.linspace(d_tree, d_new, bout)
                    d_tree = d_new
                else:
                    amp = cfg.picking_amp * jitter()
                    accel[:, t:t + bout] += amp * _oscillation(rng, bout, _BANDS["picking"])
                    dist[t:t + bout] = d_tree
                t += bout
        elif ph.kind == "walk_to_bin":
            # strain builds up while carrying the full bag: amplitude ramps from
            # picking level to walking level over the first part of the walk
            ramp = max(int(cfg.gait_ramp_frac * length), 1)
            env = np.minimum(np.arange(length) / ramp, 1.0)
            amp = cfg.picking_amp + (cfg.walking_amp - cfg.picking_amp) * env
            accel[:, s:e] += amp * jitter() * _oscillation(rng, length, _BANDS["walk_to_bin"])
            dist[s:e] = np.linspace(d_tree, d_near, length)
        elif ph.kind == "lift":
            accel[:, s:e] += cfg.walking_amp * _oscillation(rng, length, _BANDS["lift"])
            if ph.spike:
                w = min(length, int(0.5 * fs))
                off = s + (length - w) // 2
                for a in range(3):
                    accel[a, off:off + w] += _AXIS_GAIN[a] * _burst(w, cfg.lift_spike_amp, rng)
            dist[s:e] = d_near
        elif ph.kind == "shake_empty":
            accel[:, s:e] += cfg.shake_amp * jitter() * _oscillation(rng, length, _BANDS["shake_empty"])
            dist[s:e] = d_near
        elif ph.kind == "walk_back":
            d_new = d_far * rng.uniform(0.6, 1.4)
            amp = 1.2 * cfg.picking_amp
            accel[:, s:e] += amp * jitter() * _oscillation(rng, length, _BANDS["walk_back"])
            dist[s:e] = np.linspace(d_near, d_new, length)
            d_tree = d_new

    accel *= _AXIS_GAIN[:, None]
    # gravity plus slow posture drift, both removed by the bandpass filter
    t = np.arange(n) / fs
    drift = 0.05 * np.sin(2 * np.pi * rng.uniform(0.002, 0.01, size=(3, 1)) * t + rng.uniform(0, 2 * np.pi, size=(3, 1)))
    accel += _GRAVITY[:, None] + drift
    accel += cfg.noise_sd * rng.standard_normal((3, n))
    accel = np.clip(accel, -ACCEL_RANGE_G, ACCEL_RANGE_G)

    n_rssi = math.ceil(n / fs)
    d_sec = dist[np.arange(n_rssi) * fs]
    expo = _path_loss_exponent(cfg, d_near, d_far)
    rssi = cfg.rssi_near_dbm - 10.0 * expo * np.log10(np.maximum(d_sec, d_near) / d_near)
    rssi = rssi + cfg.rssi_noise_db * rng.standard_normal(n_rssi)
    rssi = np.round(rssi, 6)

    spans = [(p.start, p.end) for p in phases if p.kind == "walk_to_bin"]
    ends = [p.end for p in phases if p.kind == "shake_empty"]
    events = EventLog(np.array([(s, e) for (s, _), e in zip(spans, ends)], dtype=np.int64).reshape(-1, 2))
    labels = labels_from_events(n, events)
    raw = RawRecording(np.round(accel[0], 6), np.round(accel[1], 6), np.round(accel[2], 6), rssi)
    return SyntheticRecording(raw, events, labels, phases)


def generate(cfg: ScenarioConfig) -> tuple[RawRecording, EventLog, np.ndarray]:
    """Raw recording, true event spans and per-sample truth labels."""
    rec = generate_detailed(cfg)
    return rec.raw, rec.events, rec.labels


def easy_scenario(n_events: int, seed: int = 0) -> ScenarioConfig:
    """Noise-free scenario with strong amplitude contrast and an abrupt gait change.

    Events are kept short enough (about 36 s) that a tight learned interval
    stays within twice the 1200-sample predefined span.
    """
    return replace(
        default_scenario(n_events, seed),
        noise_sd=0.0, rssi_noise_db=0.0, amp_jitter=0.0, relocate_prob=0.0,
        picking_amp=0.02, walking_amp=0.8, shake_amp=1.0, lift_spike_amp=2.4,
        mean_event_duration_s=36.0, event_duration_sd_s=2.0, gait_ramp_frac=0.0,
    )
