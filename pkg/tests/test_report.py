import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from harvest_har.report import COLORS, ReportError, box_stats, box_svg, read_trace, trace_svg, write_report

SVG = "{http://www.w3.org/2000/svg}"


def quantile(sorted_vals, q):
    """Linear-interpolation quantile computed by hand (position q * (n - 1))."""
    pos = q * (len(sorted_vals) - 1)
    lo = int(pos)
    hi = min(lo + 1, len(sorted_vals) - 1)
    return sorted_vals[lo] + (pos - lo) * (sorted_vals[hi] - sorted_vals[lo])


def polyline_points(svg, color):
    root = ET.fromstring(svg)
    for pl in root.iter(SVG + "polyline"):
        if pl.get("stroke") == color:
            return [tuple(map(float, p.split(","))) for p in pl.get("points").split()]
    raise AssertionError(f"no polyline in {color}")


def test_constant_probability_is_flat_top():
    svg = trace_svg(np.arange(20), np.ones(20), np.zeros(20))
    prob = polyline_points(svg, COLORS["prob"])
    truth = polyline_points(svg, COLORS["truth"])
    assert len({y for _, y in prob}) == 1
    top = prob[0][1]
    assert top < truth[0][1]
    assert top == min(y for _, y in prob + truth)


def test_trace_svg_is_valid_xml():
    svg = trace_svg(np.arange(5), np.linspace(0, 1, 5), [0, 0, 1, 1, 0],
                    np.random.default_rng(0).random((4, 5)), "fold <0>")
    root = ET.fromstring(svg)
    assert root.tag == SVG + "svg"


def test_empty_trace_raises(tmp_path):
    with pytest.raises(ReportError):
        trace_svg([], [], [])
    p = tmp_path / "trace.csv"
    p.write_text("window,fold,probability,truth\n")
    with pytest.raises(ReportError):
        read_trace(p)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=30))
def test_box_stats_match_hand_quantiles(values):
    s = sorted(values)
    b = box_stats(values)
    q1, q3 = quantile(s, 0.25), quantile(s, 0.75)
    assert b.q1 == pytest.approx(q1, abs=1e-12)
    assert b.median == pytest.approx(quantile(s, 0.5), abs=1e-12)
    assert b.q3 == pytest.approx(q3, abs=1e-12)
    lo, hi = q1 - 1.5 * (q3 - q1), q3 + 1.5 * (q3 - q1)
    inside = [v for v in s if lo <= v <= hi]
    assert b.whisker_lo == min(inside) and b.whisker_hi == max(inside)
    assert sorted(b.outliers) == [v for v in s if v < lo or v > hi]


def test_box_svg_attributes_match_stats():
    groups = {"a": {m: [0.7, 0.8, 0.9, 0.9, 1.0, 0.2] for m in ("accuracy", "precision", "recall", "f_score")}}
    root = ET.fromstring(box_svg(groups))
    boxes = [g for g in root.iter(SVG + "g") if g.get("class") == "box"]
    assert len(boxes) == 4
    s = box_stats([0.7, 0.8, 0.9, 0.9, 1.0, 0.2])
    for g in boxes:
        assert float(g.get("data-median")) == pytest.approx(s.median, abs=1e-6)
        assert float(g.get("data-q1")) == pytest.approx(s.q1, abs=1e-6)
        assert float(g.get("data-whisker-lo")) == pytest.approx(s.whisker_lo, abs=1e-6)
    assert s.outliers == (0.2,)


def test_write_report(tmp_path):
    trace = tmp_path / "trace.csv"
    trace.write_text("window,fold,probability,truth\n0,0,0.1,0\n1,0,0.9,1\n2,1,,0\n3,1,0.4,0\n")
    metrics = tmp_path / "m" / "metrics.csv"
    metrics.parent.mkdir()
    metrics.write_text("fold,start_window,end_window,status,accuracy,precision,recall,f_score,tp,fp,tn,fn,degenerate\n"
                       "0,0,2,ok,1,1,1,1,1,0,1,0,\n1,2,4,skipped: no events,,,,,,,,,\n")
    paths = write_report(trace, tmp_path / "out", [metrics])
    assert sorted(p.name for p in paths) == ["metrics_box.svg", "trace_fold0.svg", "trace_fold1.svg"]
    for p in paths:
        ET.parse(p)
