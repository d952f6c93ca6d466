"""Shared fixtures: seeded spec corpora, kernel warmup, and a session-wide
socket guard proving the suite never touches the network."""

from __future__ import annotations

import random
import socket

import pytest

from chart2svg import kernels
from chart2svg.model import ChartSpec, ChartType, Series, SeriesColor
from chart2svg.render import DEFAULT_PALETTE

SERIES_NAMES = ("Alpha", "Beta", "Gamma", "Delta", "Epsilon", "Zeta")
CATEGORY_NAMES = ("Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug")
Y_MAX_POOL = (10, 20, 40, 50, 80, 100, 200, 400)
TITLES = (None, "Report", "Results", None, "Survey", None)

_NETWORK_BLOCKED = {"active": False}


@pytest.fixture(scope="session", autouse=True)
def no_network():
    """Hermeticity guard: any attempt to open a network connection fails."""
    real_connect = socket.socket.connect

    def blocked(self, address):
        raise RuntimeError(f"network access blocked by the test suite: {address!r}")

    socket.socket.connect = blocked
    _NETWORK_BLOCKED["active"] = True
    yield
    socket.socket.connect = real_connect


def network_guard_active() -> bool:
    return _NETWORK_BLOCKED["active"]


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    kernels.warmup()


def pick_colors(rng: random.Random, n: int) -> list[SeriesColor]:
    return [SeriesColor(*rgb) for rgb in rng.sample(DEFAULT_PALETTE, n)]


def random_bar_spec(rng: random.Random, value_labels: bool = True) -> ChartSpec:
    n_series = rng.randint(1, 3)
    n_cats = rng.randint(2, 8)
    y_max = float(rng.choice(Y_MAX_POOL))
    colors = pick_colors(rng, n_series)
    series = tuple(
        Series(
            name=SERIES_NAMES[i],
            color=colors[i],
            values=tuple(round(rng.uniform(0.25, 0.98) * y_max, 2) for _ in range(n_cats)),
        )
        for i in range(n_series)
    )
    width = rng.choice((360, 400, 440, 480)) if n_series > 1 else rng.choice((320, 360, 400, 440))
    return ChartSpec(
        chart_type=ChartType.BAR,
        category_labels=CATEGORY_NAMES[:n_cats],
        series=series,
        y_range=(0.0, y_max),
        width_px=width,
        height_px=rng.choice((280, 300, 320)),
        title=rng.choice(TITLES),
        value_labels_drawn=value_labels,
    )


def random_line_spec(rng: random.Random, value_labels: bool = False) -> ChartSpec:
    n_series = rng.randint(1, 3)
    n_cats = rng.randint(3, 8)
    y_max = float(rng.choice(Y_MAX_POOL))
    colors = pick_colors(rng, n_series)
    series = tuple(
        Series(
            name=SERIES_NAMES[i],
            color=colors[i],
            values=tuple(round(rng.uniform(0.15, 0.95) * y_max, 2) for _ in range(n_cats)),
        )
        for i in range(n_series)
    )
    width = rng.choice((360, 400, 440, 480)) if n_series > 1 else rng.choice((320, 360, 400, 440))
    return ChartSpec(
        chart_type=ChartType.LINE,
        category_labels=CATEGORY_NAMES[:n_cats],
        series=series,
        y_range=(0.0, y_max),
        width_px=width,
        height_px=rng.choice((280, 300, 320)),
        title=rng.choice(TITLES),
        value_labels_drawn=value_labels,
    )


def random_pie_spec(rng: random.Random, value_labels: bool = False) -> ChartSpec:
    n_cats = rng.randint(2, 6)
    while True:
        weights = [rng.uniform(1.0, 10.0) for _ in range(n_cats)]
        total = sum(weights)
        percents = [round(100.0 * w / total, 1) for w in weights]
        percents[-1] = round(100.0 - sum(percents[:-1]), 1)
        if min(percents) >= 5.0:
            break
    return ChartSpec(
        chart_type=ChartType.PIE,
        category_labels=CATEGORY_NAMES[:n_cats],
        series=(
            Series(
                name="Share",
                color=SeriesColor(*DEFAULT_PALETTE[0]),
                values=tuple(percents),
            ),
        ),
        width_px=rng.choice((320, 360, 400)),
        height_px=rng.choice((280, 300, 320)),
        title=rng.choice(TITLES),
        value_labels_drawn=value_labels,
    )


@pytest.fixture(scope="session")
def bar_specs_small() -> list[ChartSpec]:
    rng = random.Random(101)
    return [random_bar_spec(rng) for _ in range(12)]


@pytest.fixture(scope="session")
def line_specs_small() -> list[ChartSpec]:
    rng = random.Random(202)
    return [random_line_spec(rng) for _ in range(8)]


@pytest.fixture(scope="session")
def pie_specs_small() -> list[ChartSpec]:
    rng = random.Random(303)
    return [random_pie_spec(rng) for _ in range(8)]
