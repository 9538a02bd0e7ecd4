#!/usr/bin/env python3
"""
Tests for eval-curve charts
"""

import xml.etree.ElementTree as ET

import pytest

from svg_chart import render_line_chart, write_line_chart

SVG = "{http://www.w3.org/2000/svg}"


def test_one_line_per_series():
    series = {"oracle": [(0, 0.69), (10, 0.5)], "binary <&>": [(0, 0.69), (10, 0.6)]}
    svg = render_line_chart(series, title="oracle_ce", y_label="oracle_ce")
    assert 'id="series-0"' in svg
    assert 'id="series-1"' in svg
    assert 'id="series-2"' not in svg
    texts = [t.text for t in ET.fromstring(svg).iter(f"{SVG}text")]
    assert "binary <&>" in texts
    assert "oracle_ce" in texts


def test_rendering_is_repeatable():
    series = {"flat": [(0, 0.5), (1, 0.5)]}
    assert render_line_chart(series) == render_line_chart(series)


def test_empty_series_is_rejected():
    with pytest.raises(ValueError):
        render_line_chart({})
    with pytest.raises(ValueError):
        render_line_chart({"a": []})


def test_write_line_chart(tmp_path):
    path = write_line_chart(tmp_path / "charts" / "ce.svg", {"a": [(0, 1.0), (5, 0.2)]})
    assert "<svg" in path.read_text()
    png = write_line_chart(tmp_path / "ce.png", {"a": [(0, 1.0), (5, 0.2)]}, title="ce")
    assert png.read_bytes().startswith(b"\x89PNG")
