"""Shared fixtures and builders for the test suite."""

import os

# Pin BLAS/OpenMP threads before numpy loads so timings and results are
# reproducible regardless of host core count.
for _var in (
    "OPENBLAS_NUM_THREADS",
    "OMP_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
):
    os.environ.setdefault(_var, "1")

import numpy as np
import pytest

from readgaze.core import DocumentLayout, PageLayout, PagePoint, TextLine, WordBox


def grid_layout(
    n_lines: int = 10,
    words_per_line: int = 8,
    page_index: int = 0,
    x_margin: float = 0.1,
    y_margin: float = 0.1,
    word_height: float = 0.02,
) -> DocumentLayout:
    """A page of evenly spaced word boxes arranged in horizontal lines."""
    words = []
    lines = []
    usable_w = 1.0 - 2 * x_margin
    usable_h = 1.0 - 2 * y_margin
    slot_w = usable_w / words_per_line
    wid = 0
    for li in range(n_lines):
        y_center = y_margin + (li + 0.5) * usable_h / n_lines
        line_word_ids = []
        for wj in range(words_per_line):
            x0 = x_margin + wj * slot_w
            words.append(
                WordBox(
                    word_id=wid,
                    reading_order=wid,
                    text=f"w{wid}",
                    x0=x0,
                    y0=y_center - word_height / 2,
                    x1=x0 + slot_w * 0.85,
                    y1=y_center + word_height / 2,
                )
            )
            line_word_ids.append(wid)
            wid += 1
        lines.append(TextLine(line_id=li, y_center=y_center, word_ids=tuple(line_word_ids)))
    return DocumentLayout(
        pages=(PageLayout(page_index=page_index, words=tuple(words), lines=tuple(lines)),)
    )


def cluster_points(
    x: float,
    y: float,
    t0_ms: float,
    n: int,
    page_index: int = 0,
    hz: float = 60.0,
    jitter: float = 0.0,
    seed: int = 0,
) -> list:
    """n page points at (x, y) sampled at the given rate, optional jitter."""
    rng = np.random.default_rng(seed)
    period = 1000.0 / hz
    pts = []
    for i in range(n):
        dx = rng.uniform(-jitter, jitter) if jitter else 0.0
        dy = rng.uniform(-jitter, jitter) if jitter else 0.0
        pts.append(PagePoint(page_index=page_index, x=x + dx, y=y + dy, t_ms=t0_ms + i * period))
    return pts


@pytest.fixture
def layout() -> DocumentLayout:
    return grid_layout()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
