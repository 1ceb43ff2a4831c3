import numpy as np
import pytest

from harvest_har.data import label_runs
from harvest_har.preprocess import ConfigError
from harvest_har.synth import (
    EVENT_KINDS,
    FIELD_TOTAL_SAMPLES,
    ScenarioConfig,
    default_scenario,
    easy_scenario,
    generate,
    generate_detailed,
)


def test_same_seed_identical():
    a = generate(default_scenario(3, seed=11))
    b = generate(default_scenario(3, seed=11))
    for x, y in zip(a[0].__dict__.values(), b[0].__dict__.values()):
        assert np.array_equal(x, y)
    assert a[1] == b[1]
    assert np.array_equal(a[2], b[2])


def test_different_seed_differs():
    a = generate(default_scenario(2, seed=1))[0]
    b = generate(default_scenario(2, seed=2))[0]
    assert not np.array_equal(a.accel_x, b.accel_x)


def test_no_events():
    cfg = default_scenario(0, seed=5)
    raw, events, labels = generate(cfg)
    assert len(events) == 0
    assert not labels.any()
    assert abs(np.median(raw.rssi) - cfg.rssi_far_dbm) < 10.0


def test_duration_arithmetic():
    assert abs(default_scenario(64).duration_samples - FIELD_TOTAL_SAMPLES) <= 1
    assert abs(default_scenario(1).duration_samples - 9078) <= 1


def test_phases_tile_duration(small_recording):
    rec, _ = small_recording
    phases = rec.phases
    assert phases[0].start == 0
    assert phases[-1].end == len(rec.raw)
    for a, b in zip(phases, phases[1:]):
        assert a.end == b.start
        assert a.end > a.start


def test_events_equal_label_runs(small_recording):
    rec, _ = small_recording
    assert np.array_equal(label_runs(rec.labels), np.stack([rec.events.starts, rec.events.ends], axis=1))


def test_events_cover_event_phases(small_recording):
    rec, _ = small_recording
    in_event = np.zeros(len(rec.raw), dtype=bool)
    for p in rec.phases:
        if p.kind in EVENT_KINDS:
            in_event[p.start:p.end] = True
    assert np.array_equal(in_event, rec.labels.astype(bool))


def test_energy_contrast(small_recording):
    rec, _ = small_recording
    acc = np.vstack([rec.raw.accel_x, rec.raw.accel_y, rec.raw.accel_z])
    acc = acc - acc.mean(axis=1, keepdims=True)
    m = acc.shape[1] // 256
    energy = (acc[:, :m * 256] ** 2).reshape(3, m, 256).mean(axis=(0, 2))
    frac = rec.labels[:m * 256].reshape(m, 256).mean(axis=1)
    assert energy[frac >= 0.5].mean() > energy[frac < 0.5].mean()


def test_event_fraction(default_corpus):
    rec, _ = default_corpus
    assert len(rec.events) == 64
    assert abs(rec.labels.mean() - 0.28) <= 0.05


def test_accel_within_sensor_range(small_recording):
    rec, _ = small_recording
    for a in (rec.raw.accel_x, rec.raw.accel_y, rec.raw.accel_z):
        assert np.max(np.abs(a)) <= 4.0


def test_easy_scenario_generates():
    rec = generate_detailed(easy_scenario(4, seed=1))
    assert len(rec.events) == 4


@pytest.mark.parametrize("kw", [
    dict(duration_samples=0, n_events=0),
    dict(duration_samples=1000, n_events=-1),
    dict(duration_samples=5000, n_events=2),
    dict(duration_samples=100000, n_events=2, picking_amp=0.5),
    dict(duration_samples=100000, n_events=2, walking_amp=-1.0),
    dict(duration_samples=100000, n_events=2, walk_back_range_s=(5.0, 2.0)),
    dict(duration_samples=100000, n_events=2, spike_prob=1.5),
    dict(duration_samples=100000, n_events=2, rssi_near_dbm=-90.0),
])
def test_config_violations(kw):
    with pytest.raises(ConfigError):
        ScenarioConfig(**kw)
