"""Relaxed Accuracy, Drop, manifests, and the structured-QA oracle."""

from __future__ import annotations

import random

import pytest

from chart2svg.evaluate import (
    EvalReport,
    QaRecord,
    Split,
    ZeroBaseline,
    drop,
    load_manifest,
    oracle_answer,
    relaxed_match,
    report_table,
    save_manifest,
    score,
)
from chart2svg.model import recovered_from_spec
from conftest import random_bar_spec


def test_numeric_within_tolerance():
    assert relaxed_match("14.5", "14")


def test_string_case_fold():
    assert relaxed_match("Blue", "blue")
    assert relaxed_match("  blue ", "blue")


def test_numeric_out_of_tolerance():
    assert not relaxed_match("20", "10")


def test_tolerance_is_gold_anchored_not_symmetric():
    assert not relaxed_match("105.2", "100")  # 5.2 > 5% of 100
    assert relaxed_match("100", "105.2")  # 5.2 <= 5% of 105.2


def test_zero_gold_requires_exact_zero():
    assert relaxed_match("0", "0")
    assert not relaxed_match("0.001", "0")


def test_percent_stripped_both_sides():
    assert relaxed_match("45%", "45")
    assert relaxed_match("45", "45%")


def test_reflexive_on_arbitrary_strings():
    rng = random.Random(61)
    for s in ["42", "blue", "3.5K", "Jan", "-7.25", "45%"]:
        assert relaxed_match(s, s)


# --- score -------------------------------------------------------------------


def records_fixture():
    return [
        QaRecord("a.png", "q1", "10", Split.HUMAN),
        QaRecord("a.png", "q2", "blue", Split.HUMAN),
        QaRecord("b.png", "q1", "5", Split.AUGMENTED),
        QaRecord("b.png", "q2", "red", Split.AUGMENTED),
    ]


def test_score_arithmetic():
    records = records_fixture()
    predictions = {
        ("a.png", "q1"): "10",
        ("a.png", "q2"): "green",
        ("b.png", "q1"): "5",
        ("b.png", "q2"): "red",
    }
    report = score(records, predictions)
    assert report.ra_human == 50.0
    assert report.ra_augmented == 100.0
    assert report.ra_overall == 75.0


def test_score_missing_prediction_flagged_wrong():
    records = records_fixture()
    report = score(records, {("a.png", "q1"): "10"})
    assert report.ra_overall == 25.0
    missing = [v for v in report.verdicts if v.missing]
    assert len(missing) == 3


def test_score_empty_set_renders_dashes():
    report = score([], {})
    assert report.ra_overall is None
    table = report_table([("pipeline", report)])
    assert "—" in table


def test_score_all_correct():
    records = records_fixture()
    predictions = {r.key(): r.label for r in records}
    report = score(records, predictions)
    assert (report.ra_human, report.ra_augmented, report.ra_overall) == (100.0, 100.0, 100.0)


def test_drop_metric():
    assert drop(80.0, 60.0) == pytest.approx(25.0)
    assert drop(70.0, 70.0) == 0.0
    assert drop(50.0, 60.0) == pytest.approx(-20.0)
    with pytest.raises(ZeroBaseline):
        drop(0.0, 10.0)


def test_report_table_alignment():
    report = EvalReport(52.6, 62.5, 57.6, 10, 10, (), drop_vs_baseline=23.9)
    table = report_table([("pipeline", report)])
    lines = table.splitlines()
    assert lines[0].split() == ["Models", "Human", "Aug", "Overall", "Drop"]
    assert lines[1].split() == ["pipeline", "52.6", "62.5", "57.6", "23.9"]


def test_manifest_round_trip(tmp_path):
    records = records_fixture()
    path = tmp_path / "m.jsonl"
    save_manifest(records, path)
    assert load_manifest(path) == records


def test_manifest_rejects_bad_line(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text('{"imgname": "a.png"}\n')
    with pytest.raises(ValueError):
        load_manifest(path)


# --- oracle ------------------------------------------------------------------


def chart_fixture():
    import random as _r

    rng = _r.Random(62)
    while True:
        spec = random_bar_spec(rng)
        if len(spec.series) == 1 and len(spec.category_labels) >= 3:
            return spec


def test_oracle_highest_category():
    spec = chart_fixture()
    chart = recovered_from_spec(spec)
    values = spec.series[0].values
    want = spec.category_labels[values.index(max(values))]
    assert oracle_answer(chart, "Which category has the highest value?") == want


def test_oracle_value_and_difference():
    spec = chart_fixture()
    chart = recovered_from_spec(spec)
    a, b = spec.category_labels[0], spec.category_labels[1]
    va, vb = spec.series[0].values[0], spec.series[0].values[1]
    got = oracle_answer(chart, f"What is the difference of {a} and {b}?")
    assert relaxed_match(got, f"{abs(va - vb)}")
    got = oracle_answer(chart, f"What is the value of {a}?")
    assert relaxed_match(got, str(va))


def test_oracle_value_for_series():
    import random as _r

    rng = _r.Random(63)
    spec = None
    while spec is None or len(spec.series) < 2:
        spec = random_bar_spec(rng)
    chart = recovered_from_spec(spec)
    cat = spec.category_labels[0]
    series = spec.series[1]
    got = oracle_answer(chart, f"What is the value of {cat} for {series.name}?")
    assert relaxed_match(got, str(series.values[0]))


def test_oracle_counts():
    spec = chart_fixture()
    chart = recovered_from_spec(spec)
    assert oracle_answer(chart, "How many categories are there?") == str(len(spec.category_labels))
    assert oracle_answer(chart, "How many series are there?") == "1"
    assert oracle_answer(chart, "How many bars are there?") == str(len(spec.category_labels))


def test_oracle_declines_free_form():
    chart = recovered_from_spec(chart_fixture())
    assert oracle_answer(chart, "Why did sales fall?") is None


def test_oracle_argmax_invariant_under_scaling():
    spec = chart_fixture()
    chart = recovered_from_spec(spec)
    answer = oracle_answer(chart, "Which category has the highest value?")
    import dataclasses

    scaled = dataclasses.replace(
        chart,
        series=tuple(
            dataclasses.replace(s, values=tuple(v * 3.7 for v in s.values))
            for s in chart.series
        ),
    )
    assert oracle_answer(scaled, "Which category has the highest value?") == answer
    low = oracle_answer(chart, "Which category has the lowest value?")
    assert oracle_answer(scaled, "Which category has the lowest value?") == low
