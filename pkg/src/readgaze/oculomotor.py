"""Fixation detection and saccade direction classification.

Fixations come from a dispersion-window filter over page-space points
(see ``kernels.idt_spans``). Saccades connect adjacent fixations and get
a direction class by comparing the nearest words/lines under their two
endpoints; the full rule table lives in ``classify_direction``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .core import (
    DocumentLayout,
    Fixation,
    PageLayout,
    PagePoint,
    Saccade,
    SaccadeClass,
)
from .errors import EmptyLayout

#: Expanding a word's box by this much (page units) still counts as a hit.
WORD_HIT_MARGIN = 0.005
#: VerticalNext requires the horizontal move to stay under this (page units).
VERTICAL_NEXT_MAX_DX = 0.1


@dataclass(frozen=True)
class FilterConfig:
    """Knobs of the dispersion-window fixation filter (page units / ms)."""

    dispersion_threshold: float = 0.01
    min_duration_ms: float = 80.0
    max_gap_ms: float = 75.0

    def __post_init__(self) -> None:
        if not (self.dispersion_threshold > 0 and self.min_duration_ms > 0 and self.max_gap_ms > 0):
            raise ValueError("all filter parameters must be strictly positive")


def detect_fixations(
    points: Sequence[PagePoint], cfg: Optional[FilterConfig] = None
) -> tuple:
    """Group time-ordered page points into fixations.

    A maximal run whose bounding-box diagonal stays within the dispersion
    threshold becomes a fixation if it spans at least the minimum
    duration; runs break at page changes and at inter-sample gaps above
    ``max_gap_ms``. Centroid = arithmetic mean of the run's points.
    """
    cfg = cfg or FilterConfig()
    fixations: list[Fixation] = []
    run_start = 0
    n = len(points)
    for i in range(n + 1):
        if i < n and points[i].page_index == points[run_start].page_index:
            continue
        run = points[run_start:i]
        if run:
            fixations.extend(_detect_in_run(run, cfg))
        run_start = i
    return tuple(fixations)


def _detect_in_run(run: Sequence[PagePoint], cfg: FilterConfig) -> list:
    x = np.array([p.x for p in run], dtype=np.float64)
    y = np.array([p.y for p in run], dtype=np.float64)
    t = np.array([p.t_ms for p in run], dtype=np.float64)
    spans = kernels.idt_spans(
        x, y, t, cfg.dispersion_threshold, cfg.min_duration_ms, cfg.max_gap_ms
    )
    page = run[0].page_index
    out = []
    for i, j in spans:
        cx = float(np.mean(x[i : j + 1]))
        cy = float(np.mean(y[i : j + 1]))
        start, end = float(t[i]), float(t[j])
        out.append(
            Fixation(
                start_ms=start,
                end_ms=end,
                centroid=PagePoint(page_index=page, x=cx, y=cy, t_ms=0.5 * (start + end)),
                sample_count=int(j - i + 1),
            )
        )
    return out


class WordIndex:
    """Vectorized nearest-word / word-hit lookup for one page."""

    def __init__(self, page: PageLayout):
        self.page = page
        words = page.words
        self.n = len(words)
        if self.n:
            self.x0 = np.array([w.x0 for w in words])
            self.y0 = np.array([w.y0 for w in words])
            self.x1 = np.array([w.x1 for w in words])
            self.y1 = np.array([w.y1 for w in words])
            self.cx = 0.5 * (self.x0 + self.x1)
            self.cy = 0.5 * (self.y0 + self.y1)
            self.order = np.array([w.reading_order for w in words])
            self.word_ids = np.array([w.word_id for w in words])
            self.line_ids = self._line_ids(page)

    @staticmethod
    def _line_ids(page: PageLayout) -> np.ndarray:
        if page.lines:
            line_of = {}
            for ln in page.lines:
                for wid in ln.word_ids:
                    line_of[wid] = ln.line_id
            return np.array([line_of[w.word_id] for w in page.words])
        # No explicit lines: group words sharing the same vertical center.
        cys = sorted({0.5 * (w.y0 + w.y1) for w in page.words})
        rank = {cy: i for i, cy in enumerate(cys)}
        return np.array([rank[0.5 * (w.y0 + w.y1)] for w in page.words])

    def nearest(self, x: float, y: float) -> int:
        """Index (into page.words) of the word under or closest to a point.

        A word containing the point wins; among several containers, and in
        the fallback to pure distance, the nearest center wins, ties going
        to the lowest index. Always succeeds on a non-empty page.
        """
        inside = (self.x0 <= x) & (x <= self.x1) & (self.y0 <= y) & (y <= self.y1)
        d2 = (self.cx - x) ** 2 + (self.cy - y) ** 2
        if inside.any():
            cand = np.flatnonzero(inside)
            return int(cand[np.argmin(d2[cand])])
        return int(np.argmin(d2))

    def hit(self, x: float, y: float) -> Optional[int]:
        """Like ``nearest`` but only within a small margin around boxes.

        Returns None when the point is farther than ``WORD_HIT_MARGIN``
        from every word box; used to count covered words without letting
        off-text gaze inflate the tally.
        """
        m = WORD_HIT_MARGIN
        near = (
            (self.x0 - m <= x) & (x <= self.x1 + m) & (self.y0 - m <= y) & (y <= self.y1 + m)
        )
        if not near.any():
            return None
        cand = np.flatnonzero(near)
        d2 = (self.cx[cand] - x) ** 2 + (self.cy[cand] - y) ** 2
        return int(cand[np.argmin(d2)])


def classify_direction(
    dx: float,
    dy: float,
    from_word: Optional[int],
    to_word: Optional[int],
    index: Optional[WordIndex],
) -> SaccadeClass:
    """Direction class for a move between two fixations.

    With words under both endpoints (nearest-word assignment):
      same line:  reading-order skip >= 2 -> HORIZONTAL_LATER;
                  +1 -> FORWARD; negative -> REGRESSION; 0 -> NEUTRAL.
      new line:   exactly one line down and |dx| small -> VERTICAL_NEXT;
                  any move down -> LINE_FORWARD; up -> LINE_REGRESSION.
    Without a word layout, a geometric fallback applies: horizontal-ish
    moves are FORWARD iff dx > 0 (else REGRESSION); vertical-ish moves
    are LINE_FORWARD iff dy > 0 (else LINE_REGRESSION).
    """
    if index is None or index.n == 0 or from_word is None or to_word is None:
        if abs(dx) >= abs(dy):
            return SaccadeClass.FORWARD if dx > 0 else SaccadeClass.REGRESSION
        return SaccadeClass.LINE_FORWARD if dy > 0 else SaccadeClass.LINE_REGRESSION

    line_a = int(index.line_ids[from_word])
    line_b = int(index.line_ids[to_word])
    if line_a == line_b:
        delta = int(index.order[to_word]) - int(index.order[from_word])
        if delta >= 2:
            return SaccadeClass.HORIZONTAL_LATER
        if delta == 1:
            return SaccadeClass.FORWARD
        if delta < 0:
            return SaccadeClass.REGRESSION
        return SaccadeClass.NEUTRAL
    if line_b == line_a + 1 and abs(dx) < VERTICAL_NEXT_MAX_DX:
        return SaccadeClass.VERTICAL_NEXT
    if line_b > line_a:
        return SaccadeClass.LINE_FORWARD
    return SaccadeClass.LINE_REGRESSION


def derive_saccades(
    fixations: Sequence[Fixation], layout: DocumentLayout
) -> tuple:
    """One classified saccade per adjacent fixation pair.

    Cross-page moves are treated as line changes in document order
    (LINE_FORWARD onto a later page, LINE_REGRESSION onto an earlier one).
    A page with no words triggers the geometric fallback; that is the
    EmptyLayout degradation path, not an error.
    """
    if len(fixations) < 2:
        return ()
    indexes: dict[int, WordIndex] = {}

    def index_for(page_index: int) -> Optional[WordIndex]:
        if page_index not in indexes:
            try:
                indexes[page_index] = WordIndex(layout.page(page_index))
            except KeyError:
                raise EmptyLayout(f"layout has no page {page_index}")
        return indexes[page_index]

    out = []
    for i in range(len(fixations) - 1):
        a, b = fixations[i], fixations[i + 1]
        dx = b.centroid.x - a.centroid.x
        dy = b.centroid.y - a.centroid.y
        if a.centroid.page_index != b.centroid.page_index:
            cls = (
                SaccadeClass.LINE_FORWARD
                if b.centroid.page_index > a.centroid.page_index
                else SaccadeClass.LINE_REGRESSION
            )
        else:
            index = index_for(a.centroid.page_index)
            if index.n == 0:
                cls = classify_direction(dx, dy, None, None, None)
            else:
                fw = index.nearest(a.centroid.x, a.centroid.y)
                tw = index.nearest(b.centroid.x, b.centroid.y)
                cls = classify_direction(dx, dy, fw, tw, index)
        out.append(Saccade(from_idx=i, to_idx=i + 1, dx=dx, dy=dy, direction_class=cls))
    return tuple(out)


def covered_word_ids(
    fixations: Sequence[Fixation], layout: DocumentLayout
) -> set:
    """Distinct word ids hit by fixation centroids (margin-gated)."""
    indexes: dict[int, WordIndex] = {}
    hit_ids: set = set()
    for f in fixations:
        p = f.centroid
        if p.page_index not in indexes:
            try:
                indexes[p.page_index] = WordIndex(layout.page(p.page_index))
            except KeyError:
                continue
        idx = indexes[p.page_index]
        if idx.n == 0:
            continue
        w = idx.hit(p.x, p.y)
        if w is not None:
            hit_ids.add((p.page_index, int(idx.word_ids[w])))
    return hit_ids
