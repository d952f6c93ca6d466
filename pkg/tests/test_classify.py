"""Chart classification: background, series colors, type rules, and the
external-model override."""

from __future__ import annotations

import json
import random

import numpy as np
import pytest

from chart2svg.classify import (
    CLASSIFY_PROMPT,
    build_profile,
    classify_external,
    classify_heuristic,
    identify_background,
    identify_series_colors,
)
from chart2svg.clients import FixtureVlmClient
from chart2svg.errors import ClientUnavailable, MalformedReply, NoSeriesColors, Unclassifiable
from chart2svg.model import ChartType
from chart2svg.raster import RasterImage, color_distance, resample
from chart2svg.render import render
from conftest import random_bar_spec, random_line_spec, random_pie_spec


def test_background_of_render_is_white(bar_specs_small):
    result = render(bar_specs_small[0])
    assert identify_background(result.image) == (255, 255, 255)


def test_background_uniform_gray_border():
    img = RasterImage.filled(60, 40, (140, 140, 140))
    assert identify_background(img) == (140, 140, 140)


def test_background_mode_rule_on_split_border():
    px = np.full((40, 60, 3), 255, dtype=np.uint8)
    px[:, :24] = 0  # 40% of each border row is black
    assert identify_background(RasterImage(px)) == (255, 255, 255)


def test_series_colors_within_8_of_truth(bar_specs_small):
    for spec in bar_specs_small[:6]:
        result = render(spec)
        got = identify_series_colors(result.image, (255, 255, 255))
        truth = [s.color.rgb() for s in spec.series]
        assert len(got) == len(truth), spec
        for t in truth:
            nearest = min(color_distance(t, g.rgb()) for g in got)
            assert nearest <= 8.0


def test_series_colors_blank_image_raises():
    with pytest.raises(NoSeriesColors):
        identify_series_colors(RasterImage.filled(80, 60, (255, 255, 255)), (255, 255, 255))


def test_single_segment_pie_yields_one_color(pie_specs_small):
    spec = pie_specs_small[0]
    one = type(spec)(
        chart_type=spec.chart_type,
        category_labels=("All",),
        series=(type(spec.series[0])(spec.series[0].name, spec.series[0].color, (100.0,)),),
        width_px=spec.width_px,
        height_px=spec.height_px,
    )
    result = render(one)
    got = identify_series_colors(result.image, (255, 255, 255))
    assert len(got) == 1


def test_heuristic_type_on_renders(bar_specs_small, line_specs_small, pie_specs_small):
    for spec in list(bar_specs_small)[:6] + list(line_specs_small)[:4] + list(pie_specs_small)[:4]:
        result = render(spec)
        profile = build_profile(result.image)
        assert profile.chart_type is spec.chart_type, spec


def test_heuristic_blank_unclassifiable():
    img = RasterImage.filled(100, 80, (255, 255, 255))
    with pytest.raises(Unclassifiable):
        classify_heuristic(img, [])


def test_classification_invariant_under_expansion(bar_specs_small, line_specs_small, pie_specs_small):
    sample = [bar_specs_small[0], line_specs_small[0], pie_specs_small[0]]
    for spec in sample:
        image = render(spec).image
        for sx, sy in [(1.5, 1.0), (1.0, 1.5)]:
            profile = build_profile(resample(image, sx, sy))
            assert profile.chart_type is spec.chart_type, (spec.chart_type, sx, sy)


# --- external ----------------------------------------------------------------


def test_external_fixture_echo(tmp_path):
    img = RasterImage.filled(40, 30, (255, 255, 255))
    client = FixtureVlmClient(tmp_path)
    client.store(img.png_bytes(), CLASSIFY_PROMPT, json.dumps({"chart_type": "bar", "colors": ["#4C72B0"]}))
    profile = classify_external(img, client)
    assert profile.chart_type is ChartType.BAR
    assert [c.rgb() for c in profile.series_colors] == [(0x4C, 0x72, 0xB0)]
    assert profile.source.value == "external"


def test_external_malformed_reply(tmp_path):
    img = RasterImage.filled(40, 30, (255, 255, 255))
    client = FixtureVlmClient(tmp_path)
    client.store(img.png_bytes(), CLASSIFY_PROMPT, "definitely {not json")
    with pytest.raises(MalformedReply):
        classify_external(img, client)


def test_external_missing_fixture_unavailable(tmp_path):
    img = RasterImage.filled(40, 30, (255, 255, 255))
    client = FixtureVlmClient(tmp_path)
    with pytest.raises(ClientUnavailable):
        classify_external(img, client)
