"""Deterministic SVG output: parseable, stable bytes, traceable config hash."""

import xml.etree.ElementTree as ET

import numpy as np
import pytest

from arousel.svg import bar_chart, effects_plot

SVG_NS = "{http://www.w3.org/2000/svg}"


def _bar(path, config_hash="abc123"):
    bar_chart(
        path,
        ["0.05", "0.1", "0.2"],
        [1.22, 3.05, 6.71],
        title="selected vs target",
        xlabel="target FDR",
        ylabel="% selected",
        config_hash=config_hash,
    )


def _effects(path):
    rng = np.random.default_rng(4)
    x = rng.standard_normal(24)
    panels = [
        {
            "name": "feat_a",
            "x": x,
            "y": 0.4 * x + rng.standard_normal(24) * 0.3,
            "slope": 0.4,
            "intercept": 0.0,
            "classes": ["calm"] * 12 + ["scary"] * 12,
        },
        {
            "name": "feat_b",
            "x": x,
            "y": -0.2 * x,
            "slope": -0.2,
            "intercept": 0.1,
        },
    ]
    effects_plot(path, panels, title="effects", config_hash="abc123")


def test_bar_chart_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    _bar(a)
    _bar(b)
    assert a.read_bytes() == b.read_bytes()


def test_effects_plot_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    _effects(a)
    _effects(b)
    assert a.read_bytes() == b.read_bytes()


def test_bar_chart_is_valid_xml_with_expected_elements(tmp_path):
    path = tmp_path / "bars.svg"
    _bar(path)
    root = ET.parse(path).getroot()
    assert root.tag == f"{SVG_NS}svg"
    rects = root.findall(f"{SVG_NS}rect")
    assert len(rects) == 1 + 3  # background + one bar per category
    texts = [t.text for t in root.iter(f"{SVG_NS}text")]
    for expected in ("0.05", "0.1", "0.2", "1.22", "3.05", "6.71",
                     "target FDR", "% selected", "selected vs target"):
        assert expected in texts


def test_effects_plot_draws_points_lines_and_legend(tmp_path):
    path = tmp_path / "effects.svg"
    _effects(path)
    root = ET.parse(path).getroot()
    circles = root.findall(f"{SVG_NS}circle")
    assert len(circles) == 24 * 2 + 2  # points per panel + legend swatches
    texts = [t.text for t in root.iter(f"{SVG_NS}text")]
    for expected in ("feat_a", "feat_b", "response", "calm", "scary", "effects"):
        assert expected in texts
    # two distinct point colors for the two classes
    fills = {c.get("fill") for c in circles}
    assert len(fills) >= 2


def test_config_hash_embedded_as_comment(tmp_path):
    path = tmp_path / "bars.svg"
    _bar(path, config_hash="feedface9012")
    text = path.read_text()
    assert "<!-- config-hash: feedface9012 -->" in text
    _bar(path, config_hash="")
    assert "<!-- config-hash: none -->" in path.read_text()


def test_no_timestamps_or_environment_leaks(tmp_path):
    path = tmp_path / "bars.svg"
    _bar(path)
    text = path.read_text()
    assert "2026" not in text  # no dates of any kind
    assert "/tmp" not in text and "home" not in text


def test_nan_bars_are_skipped_but_axis_survives(tmp_path):
    path = tmp_path / "bars.svg"
    bar_chart(path, ["a", "b"], [float("nan"), 2.0], config_hash="x")
    root = ET.parse(path).getroot()
    rects = root.findall(f"{SVG_NS}rect")
    assert len(rects) == 1 + 1  # background + only the finite bar
    texts = [t.text for t in root.iter(f"{SVG_NS}text")]
    assert "a" in texts and "b" in texts


def test_text_is_escaped(tmp_path):
    path = tmp_path / "bars.svg"
    bar_chart(path, ["a<b&c"], [1.0], title="x > y", config_hash="x")
    root = ET.parse(path).getroot()  # would raise on unescaped markup
    texts = [t.text for t in root.iter(f"{SVG_NS}text")]
    assert "a<b&c" in texts and "x > y" in texts
