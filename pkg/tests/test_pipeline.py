"""End-to-end conversion: configurations, determinism, critic ablation
mechanics, and external-client fallbacks."""

from __future__ import annotations

import dataclasses
import random

import pytest

from chart2svg import svgdoc
from chart2svg.classify import CLASSIFY_PROMPT
from chart2svg.clients import FixtureVlmClient
from chart2svg.errors import Chart2SvgError
from chart2svg.model import ChartType, spec_distance
from chart2svg.pipeline import PipelineConfig, convert
from chart2svg.raster import RasterImage
from chart2svg.render import render
from conftest import random_bar_spec


def test_ma_conversion_recovers_bars_within_tolerance(bar_specs_small):
    spec = bar_specs_small[0]
    result = render(spec)
    doc, recovered, trace = convert(result.image)
    rects = [e for e in doc.elements if isinstance(e, svgdoc.Rect)]
    assert len(rects) == len(result.bars)
    score = spec_distance(spec, recovered)
    assert not score.count_mismatch
    assert max(score.all_errors()) <= 0.03


def test_sa_and_ma_agree_on_clean_input(bar_specs_small):
    spec = bar_specs_small[1]
    image = render(spec).image
    _, rec_ma, _ = convert(image, PipelineConfig(mode="ma"))
    _, rec_sa, _ = convert(image, PipelineConfig(mode="sa"))
    assert len(rec_ma.series) == len(rec_sa.series)
    for a, b in zip(rec_ma.series, rec_sa.series):
        assert len(a.values) == len(b.values)


def corrupting_hook(target_variant: str):
    def hook(candidate):
        if candidate.variant_id != target_variant:
            return candidate
        marks = list(candidate.marks)
        m = marks[0]
        x, y, w, h = m.bbox
        marks[0] = dataclasses.replace(m, bbox=(x, y - 15, w, h + 15))
        return dataclasses.replace(candidate, marks=tuple(marks), confidence=1.0)

    return hook


def test_critic_beats_critic_off_under_corruption(bar_specs_small):
    spec = bar_specs_small[2]
    image = render(spec).image
    hook = corrupting_hook("bar/proj")
    _, rec_with, _ = convert(image, PipelineConfig(mode="ma", critic="rule", candidate_hook=hook))
    _, rec_without, _ = convert(image, PipelineConfig(mode="ma", critic="off", candidate_hook=hook))
    err_with = spec_distance(spec, rec_with).mean_rel_error
    err_without = spec_distance(spec, rec_without).mean_rel_error
    assert err_with < err_without


def test_convert_is_deterministic(bar_specs_small):
    image = render(bar_specs_small[3]).image
    doc1, rec1, _ = convert(image)
    doc2, rec2, _ = convert(image)
    assert svgdoc.serialize(doc1) == svgdoc.serialize(doc2)
    assert rec1 == rec2


def test_trace_timings_cover_wall_time(bar_specs_small):
    image = render(bar_specs_small[0]).image
    _, _, trace = convert(image)
    assert trace.wall_seconds > 0
    assert abs(trace.stage_seconds() - trace.wall_seconds) <= 0.05 * trace.wall_seconds


def test_unclassifiable_blank_image_reports_stage():
    blank = RasterImage.filled(300, 200, (255, 255, 255))
    with pytest.raises(Chart2SvgError) as err:
        convert(blank)
    assert getattr(err.value, "stage", None) == "classify"


def test_external_classifier_note_on_agreement(bar_specs_small, tmp_path):
    import json

    spec = bar_specs_small[0]
    image = render(spec).image
    client = FixtureVlmClient(tmp_path)
    client.store(
        image.png_bytes(),
        CLASSIFY_PROMPT,
        json.dumps({"chart_type": "bar", "colors": ["#DC3232"]}),
    )
    _, _, trace = convert(image, PipelineConfig(classify="external", vlm_client=client))
    assert any("agrees" in note for note in trace.notes)


def test_external_classifier_heuristic_wins_conflict(bar_specs_small, tmp_path):
    import json

    spec = bar_specs_small[0]
    image = render(spec).image
    client = FixtureVlmClient(tmp_path)
    client.store(
        image.png_bytes(),
        CLASSIFY_PROMPT,
        json.dumps({"chart_type": "pie", "colors": ["#DC3232"]}),
    )
    _, recovered, trace = convert(image, PipelineConfig(classify="external", vlm_client=client))
    assert recovered.chart_type is ChartType.BAR
    assert any("overridden by heuristic" in note for note in trace.notes)


def test_external_critic_falls_back_on_missing_fixture(bar_specs_small, tmp_path):
    spec = bar_specs_small[0]
    image = render(spec).image
    client = FixtureVlmClient(tmp_path)  # no fixtures stored
    doc, recovered, trace = convert(
        image, PipelineConfig(mode="ma", critic="external", vlm_client=client)
    )
    assert any("fell back to rules" in note for note in trace.notes)
    score = spec_distance(spec, recovered)
    assert max(score.all_errors()) <= 0.03


def test_candidate_counts_recorded(bar_specs_small):
    image = render(bar_specs_small[0]).image
    _, _, trace = convert(image)
    assert set(trace.candidate_counts) == {"bar/cc", "bar/cc-close", "bar/proj"}
