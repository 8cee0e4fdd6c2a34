"""Rendering tests: every SVG must be well-formed XML with the expected
element census, stable bytes for identical inputs, and escaped labels."""

import xml.etree.ElementTree as ET

import numpy as np
import pytest

from clda.svg import CurveGroup, _fmt, _ramp_color, bars_svg, curves_svg, heatmap_svg

SVG_NS = "{http://www.w3.org/2000/svg}"


def parse(svg: str) -> ET.Element:
    return ET.fromstring(svg)


def tags(root: ET.Element, name: str) -> list:
    return list(root.iter(SVG_NS + name))


# ---------------------------------------------------------------------------
# color ramp and number formatting
# ---------------------------------------------------------------------------

class TestHelpers:
    def test_ramp_endpoints(self):
        assert _ramp_color(0.0) == "#23176b"
        assert _ramp_color(1.0) == "#f9e721"

    def test_ramp_clamps_out_of_range(self):
        assert _ramp_color(-3.0) == _ramp_color(0.0)
        assert _ramp_color(42.0) == _ramp_color(1.0)

    def test_ramp_midpoint_hits_table_entry(self):
        assert _ramp_color(0.5) == "#469683"

    def test_ramp_monotone_sampling_is_deterministic(self):
        a = [_ramp_color(t) for t in np.linspace(0, 1, 17)]
        b = [_ramp_color(t) for t in np.linspace(0, 1, 17)]
        assert a == b

    @pytest.mark.parametrize("value,text", [
        (0.5, "0.5"),
        (2.0, "2"),
        (1 / 3, "0.333333"),
        (-0.25, "-0.25"),
        (0.0, "0"),
    ])
    def test_fmt(self, value, text):
        assert _fmt(value) == text


# ---------------------------------------------------------------------------
# heatmap
# ---------------------------------------------------------------------------

GRID = [[0.0, 0.5], [1.0, 0.25], [0.75, 0.1]]
ROWS = ["alpha", "beta", "gamma"]
COLS = ["left", "right"]


class TestHeatmap:
    def test_parses_as_xml(self):
        root = parse(heatmap_svg(GRID, ROWS, COLS, "demo"))
        assert root.tag == SVG_NS + "svg"
        assert root.get("width") and root.get("height")

    def test_cell_census(self):
        root = parse(heatmap_svg(GRID, ROWS, COLS, "demo"))
        # one background rect plus one per cell
        assert len(tags(root, "rect")) == 1 + 3 * 2
        assert len(tags(root, "title")) == 3 * 2

    def test_label_census(self):
        root = parse(heatmap_svg(GRID, ROWS, COLS, "demo"))
        texts = [t.text for t in tags(root, "text")]
        # title + 3 row labels + 2 col labels + min/max legend
        assert len(texts) == 1 + 3 + 2 + 2
        for label in ROWS + COLS + ["demo"]:
            assert label in texts

    def test_tooltip_contains_value(self):
        root = parse(heatmap_svg(GRID, ROWS, COLS, "demo"))
        titles = [t.text for t in tags(root, "title")]
        assert "alpha x left: 0" in titles
        assert "beta x left: 1" in titles
        assert "gamma x right: 0.1" in titles

    def test_explicit_range_in_legend(self):
        svg = heatmap_svg(GRID, ROWS, COLS, "demo", vmin=0.0, vmax=1.0)
        texts = [t.text for t in tags(parse(svg), "text")]
        assert "min 0" in texts
        assert "max 1" in texts

    def test_constant_grid_uses_mid_ramp(self):
        svg = heatmap_svg(np.full((2, 2), 4.2), ["a", "b"], ["c", "d"], "flat")
        root = parse(svg)
        fills = {r.get("fill") for r in tags(root, "rect")} - {"white"}
        assert fills == {_ramp_color(0.5)}

    def test_escapes_labels_and_title(self):
        svg = heatmap_svg([[1.0]], ['a<b & "c"'], ["x>y"], "t & <u>")
        assert "a&lt;b &amp;" in svg
        texts = [t.text for t in tags(parse(svg), "text")]
        assert 'a<b & "c"' in texts
        assert "t & <u>" in texts

    def test_deterministic_output(self):
        assert heatmap_svg(GRID, ROWS, COLS, "demo") == heatmap_svg(GRID, ROWS, COLS, "demo")

    def test_rejects_non_2d(self):
        with pytest.raises(ValueError, match="2-D"):
            heatmap_svg([1.0, 2.0], ["a"], ["b"], "bad")

    def test_rejects_label_mismatch(self):
        with pytest.raises(ValueError, match="label"):
            heatmap_svg(GRID, ROWS[:2], COLS, "bad")
        with pytest.raises(ValueError, match="label"):
            heatmap_svg(GRID, ROWS, COLS + ["extra"], "bad")


# ---------------------------------------------------------------------------
# grouped bars
# ---------------------------------------------------------------------------

class TestBars:
    CATS = ["layer0", "layer1"]
    SERIES = {"attn": [1.0, 2.0], "mlp": [3.0, 4.0]}

    def test_parses_and_census(self):
        root = parse(bars_svg(self.CATS, self.SERIES, "bars"))
        # background + 4 bars + 2 legend swatches
        assert len(tags(root, "rect")) == 1 + 4 + 2
        assert len(tags(root, "line")) == 1

    def test_max_bar_spans_plot_height(self):
        root = parse(bars_svg(self.CATS, self.SERIES, "bars"))
        heights = {r.get("height") for r in tags(root, "rect")}
        assert "220.00" in heights

    def test_tooltips(self):
        root = parse(bars_svg(self.CATS, self.SERIES, "bars"))
        titles = [t.text for t in tags(root, "title")]
        assert "layer0 attn: 1" in titles
        assert "layer1 mlp: 4" in titles

    def test_all_zero_series_renders(self):
        svg = bars_svg(["a"], {"s": [0.0]}, "zero")
        root = parse(svg)
        bar = [r for r in tags(root, "rect") if r.get("height") == "0.00"]
        assert bar

    def test_escapes_labels(self):
        svg = bars_svg(["c<1>"], {"s&t": [1.0]}, "b<ars>")
        texts = [t.text for t in tags(parse(svg), "text")]
        assert "c<1>" in texts
        assert "s&t" in texts

    def test_deterministic_output(self):
        assert bars_svg(self.CATS, self.SERIES, "x") == bars_svg(self.CATS, self.SERIES, "x")

    def test_rejects_empty_inputs(self):
        with pytest.raises(ValueError):
            bars_svg([], {"s": []}, "bad")
        with pytest.raises(ValueError):
            bars_svg(["a"], {}, "bad")

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError, match="lengths"):
            bars_svg(["a", "b"], {"s": [1.0]}, "bad")


# ---------------------------------------------------------------------------
# training curves
# ---------------------------------------------------------------------------

def two_groups():
    return [
        CurveGroup("teacher", "#38598c", [[0.1, 0.4, 0.6], [0.2, 0.5, 0.7]]),
        CurveGroup("student", "#46967f", [[0.0, 0.3, 0.5]]),
    ]


class TestCurves:
    X = [0.0, 100.0, 200.0]

    def test_parses_and_census(self):
        root = parse(curves_svg(self.X, two_groups(), "curves", y_label="acc"))
        # one std band polygon per group
        assert len(tags(root, "polygon")) == 2
        # per-seed faint lines plus one bold mean per group
        assert len(tags(root, "polyline")) == (2 + 1) + (1 + 1)

    def test_axis_and_legend_text(self):
        root = parse(curves_svg(self.X, two_groups(), "curves", y_label="acc"))
        texts = [t.text for t in tags(root, "text")]
        assert "curves" in texts
        assert "step" in texts
        assert "acc" in texts
        assert "teacher" in texts and "student" in texts
        assert "0" in texts and "200" in texts  # x tick labels

    def test_flat_series_renders(self):
        groups = [CurveGroup("flat", "#000000", [[5.0, 5.0, 5.0]])]
        root = parse(curves_svg(self.X, groups, "flat"))
        assert len(tags(root, "polyline")) == 2

    def test_escapes_group_label(self):
        groups = [CurveGroup("a<b>&c", "#000000", [[0.0, 1.0]])]
        texts = [t.text for t in tags(parse(curves_svg([0, 1], groups, "t")), "text")]
        assert "a<b>&c" in texts

    def test_deterministic_output(self):
        a = curves_svg(self.X, two_groups(), "curves")
        b = curves_svg(self.X, two_groups(), "curves")
        assert a == b

    def test_rejects_short_x(self):
        with pytest.raises(ValueError, match="two x points"):
            curves_svg([0.0], two_groups(), "bad")

    def test_rejects_empty_groups(self):
        with pytest.raises(ValueError, match="groups"):
            curves_svg(self.X, [], "bad")

    def test_rejects_ragged_series(self):
        groups = [CurveGroup("bad", "#000000", [[1.0, 2.0]])]
        with pytest.raises(ValueError, match="match x grid"):
            curves_svg(self.X, groups, "bad")
