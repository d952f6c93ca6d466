"""Renderer oracle: geometry ground truth, determinism, text drawing."""

from __future__ import annotations

import random

import numpy as np
import pytest

from chart2svg.errors import SpecInvalid, UnsupportedGlyph
from chart2svg.model import ChartSpec, ChartType, Series, SeriesColor
from chart2svg.raster import RasterImage
from chart2svg.render import RenderTheme, draw_text, nice_ticks, render
from conftest import random_bar_spec, random_pie_spec


def two_bar_spec():
    return ChartSpec(
        chart_type=ChartType.BAR,
        category_labels=("A", "B"),
        series=(Series("s", SeriesColor(220, 50, 50), (10.0, 20.0)),),
        y_range=(0.0, 20.0),
        width_px=400,
        height_px=300,
    )


def test_two_red_bars_with_top_at_range_max():
    result = render(two_bar_spec())
    assert len(result.bars) == 2
    # bar B carries the range maximum: its top row must map back to 20
    bar_b = next(b for b in result.bars if b.category_index == 1)
    assert result.value_at_row(bar_b.bbox[1]) == pytest.approx(20.0, abs=1e-9)
    tick_rows = {row for row, value in result.ticks_y if value == 20.0}
    assert bar_b.bbox[1] in tick_rows
    reds = (result.image.px == (220, 50, 50)).all(axis=2)
    assert reds.sum() > 0


def test_equal_pie_values_make_four_quarters():
    spec = ChartSpec(
        chart_type=ChartType.PIE,
        category_labels=("A", "B", "C", "D"),
        series=(Series("s", SeriesColor(220, 50, 50), (1.0, 1.0, 1.0, 1.0)),),
        width_px=400,
        height_px=300,
    )
    result = render(spec)
    assert [a.sweep_angle for a in result.arcs] == [90.0] * 4
    assert [a.start_angle for a in result.arcs] == [0.0, 90.0, 180.0, 270.0]


def test_render_is_deterministic_bytes():
    spec = random_bar_spec(random.Random(5))
    a = render(spec).image.png_bytes()
    b = render(spec).image.png_bytes()
    assert a == b


def test_render_rejects_invalid_spec():
    spec = ChartSpec(
        chart_type=ChartType.PIE,
        category_labels=("A",),
        series=(Series("s", SeriesColor(220, 50, 50), (-1.0,)),),
        width_px=400,
        height_px=300,
    )
    with pytest.raises(SpecInvalid):
        render(spec)


def test_bar_tops_reproduce_values_within_half_pixel(bar_specs_small):
    for spec in bar_specs_small:
        result = render(spec)
        a, _ = result.value_axis
        for bar in result.bars:
            truth = spec.series[bar.series_index].values[bar.category_index]
            got = result.value_at_row(bar.bbox[1])
            assert abs(got - truth) <= abs(a) * 0.5 + 1e-9, spec


def test_pie_arc_angles_sum_to_360(pie_specs_small):
    for spec in pie_specs_small:
        result = render(spec)
        assert sum(a.sweep_angle for a in result.arcs) == pytest.approx(360.0, abs=1e-6)


def test_ground_truth_marks_inside_plot(bar_specs_small):
    for spec in bar_specs_small:
        result = render(spec)
        px0, py0, pw, ph = result.plot_bbox
        for bar in result.bars:
            x, y, w, h = bar.bbox
            assert px0 <= x and x + w <= px0 + pw
            assert py0 <= y and y + h <= py0 + ph


# --- nice ticks ---------------------------------------------------------------


def test_nice_ticks_count_and_step():
    for lo, hi in [(0, 20), (0, 100), (0, 7), (10, 90), (0, 1000), (0, 55)]:
        ticks = nice_ticks(lo, hi)
        assert 4 <= len(ticks) <= 7, (lo, hi, ticks)
        step = ticks[1] - ticks[0]
        mantissa = step / (10 ** np.floor(np.log10(step)))
        assert round(mantissa, 6) in (1.0, 2.0, 5.0)
        assert all(lo - 1e-9 <= t <= hi + 1e-9 for t in ticks)


def test_nice_ticks_rejects_bad_range():
    with pytest.raises(ValueError):
        nice_ticks(5, 5)


# --- draw_text ----------------------------------------------------------------


def test_draw_text_cell_width_metric():
    img = RasterImage.filled(100, 40, (255, 255, 255))
    _, bbox = draw_text(img, "42", 10, 10)
    assert bbox[2] == 12  # 2 cells x 6 px
    assert bbox[3] == 7


def test_draw_text_empty_string_is_noop():
    img = RasterImage.filled(60, 30, (255, 255, 255))
    out, bbox = draw_text(img, "", 5, 5)
    assert out.same_pixels(img)
    assert bbox == (5, 5, 0, 0)


def test_draw_text_erase_restores_original():
    img = RasterImage.filled(60, 30, (255, 255, 255))
    drawn, bbox = draw_text(img, "A", 20, 10)
    px = drawn.px.copy()
    x, y, w, h = bbox
    px[y : y + h, x : x + w] = (255, 255, 255)
    assert RasterImage(px).same_pixels(img)


def test_draw_text_rejects_unsupported_glyph():
    img = RasterImage.filled(60, 30, (255, 255, 255))
    with pytest.raises(UnsupportedGlyph):
        draw_text(img, "né", 5, 5)


def test_draw_text_space_advances_cursor():
    img = RasterImage.filled(100, 30, (255, 255, 255))
    _, bbox_spaced = draw_text(img, "a b", 5, 5)
    assert bbox_spaced[2] == 18


# --- theme --------------------------------------------------------------------


def test_antialias_theme_softens_edges():
    spec = two_bar_spec()
    hard = render(spec).image
    soft = render(spec, RenderTheme(antialias=True)).image
    assert not hard.same_pixels(soft)
    # a feathered bar has in-between values next to pure fill
    hard_red = (hard.px == (220, 50, 50)).all(axis=2).sum()
    soft_red = (soft.px == (220, 50, 50)).all(axis=2).sum()
    assert soft_red < hard_red


def test_legend_drawn_only_for_multi_series_or_pie():
    single = render(two_bar_spec())
    assert single.legend_bbox is None
    rng = random.Random(11)
    pie = render(random_pie_spec(rng))
    assert pie.legend_bbox is not None
