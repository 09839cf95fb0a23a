"""Per-window and per-segment gaze features.

All distances are physical centimeters: page-normalized coordinates are
scaled by the page's physical size before any geometry, so dispersion
and scanpath length survive anisotropic page aspect ratios.

A fixation belongs to the half-open window [t0, t1) iff it lies fully
inside: start >= t0 and end < t1. A saccade belongs iff both endpoint
fixations do. The same rule is used everywhere (features, labeling,
WPM) so the modules agree about membership.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    FORWARD_CLASSES,
    REGRESSION_CLASSES,
    DocumentLayout,
    Fixation,
    PageLayout,
    Saccade,
    SaccadeClass,
    Segment,
)
from .errors import NoDirectionalSaccades, ZeroDuration
from .oculomotor import covered_word_ids

#: Dispersion floor for the inverse-dispersion feature, in cm.
DISPERSION_EPS_CM = 1e-6

#: Column order for feature matrices and table exports.
FEATURE_NAMES = (
    "fixation_count",
    "mean_fixation_duration_ms",
    "fixation_dispersion",
    "mean_saccade_length",
    "rate_vertical_next",
    "rate_horizontal_later",
    "rate_line_regression",
    "rate_regression",
    "wpm",
    "inverse_dispersion",
    "scanpath_length_cm",
    "fbsr",
)


@dataclass(frozen=True)
class FeatureVector:
    """The per-window gaze feature set (fixed field order, see FEATURE_NAMES)."""

    fixation_count: int = 0
    mean_fixation_duration_ms: float = 0.0
    fixation_dispersion: float = 0.0
    mean_saccade_length: float = 0.0
    rate_vertical_next: float = 0.0
    rate_horizontal_later: float = 0.0
    rate_line_regression: float = 0.0
    rate_regression: float = 0.0
    wpm: float = 0.0
    inverse_dispersion: float = 0.0
    scanpath_length_cm: float = 0.0
    fbsr: float = 0.0

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in FEATURE_NAMES], dtype=np.float64)

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in FEATURE_NAMES}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureVector":
        kwargs = {f: d[f] for f in FEATURE_NAMES}
        kwargs["fixation_count"] = int(kwargs["fixation_count"])
        return cls(**kwargs)


def to_cm(x: float, y: float, page: PageLayout) -> "tuple[float, float]":
    """Page-normalized coordinates -> physical centimeters."""
    return x * page.width_cm, y * page.height_cm


def fixations_in_window(
    fixations: Sequence[Fixation], t0: float, t1: float
) -> "list[int]":
    """Indices of fixations fully inside [t0, t1)."""
    return [
        i for i, f in enumerate(fixations) if f.start_ms >= t0 and f.end_ms < t1
    ]


def fbsr(saccades: Sequence[Saccade]) -> float:
    """Forward-type share of all direction-carrying saccades.

    Forward-type is any class that advances through the text; NEUTRAL
    saccades carry no direction and are excluded. Raises when nothing
    directional remains.
    """
    fwd = sum(1 for s in saccades if s.direction_class in FORWARD_CLASSES)
    back = sum(1 for s in saccades if s.direction_class in REGRESSION_CLASSES)
    if fwd + back == 0:
        raise NoDirectionalSaccades("no forward- or regression-type saccades")
    return fwd / (fwd + back)


def wpm(
    segment: Segment, fixations: Sequence[Fixation], layout: DocumentLayout
) -> "tuple[float, int]":
    """Reading rate over a segment: (words per minute, distinct words covered)."""
    if segment.duration_ms <= 0:
        raise ZeroDuration("segment has no duration")
    idx = fixations_in_window(fixations, segment.start_ms, segment.end_ms)
    covered = covered_word_ids([fixations[i] for i in idx], layout)
    minutes = segment.duration_ms / 60000.0
    return len(covered) / minutes, len(covered)


def window_features(
    fixations: Sequence[Fixation],
    saccades: Sequence[Saccade],
    layout: DocumentLayout,
    t0: float,
    t1: float,
) -> FeatureVector:
    """Feature vector over the half-open window [t0, t1).

    An empty window yields the all-zero vector. When a window has
    fixations but no direction-carrying saccades, fbsr is reported as
    0.0 (the zero-fill convention), matching the empty-window behavior.
    """
    if not t1 > t0:
        raise ZeroDuration(f"window [{t0}, {t1}) has no duration")
    idx = fixations_in_window(fixations, t0, t1)
    if not idx:
        return FeatureVector()
    sel = [fixations[i] for i in idx]
    selected = set(idx)
    kept = [s for s in saccades if s.from_idx in selected and s.to_idx in selected]

    pages = {f.centroid.page_index: layout.page(f.centroid.page_index) for f in sel}
    pts_cm = np.array(
        [to_cm(f.centroid.x, f.centroid.y, pages[f.centroid.page_index]) for f in sel]
    )
    durations = np.array([f.duration_ms for f in sel])

    center = pts_cm.mean(axis=0)
    dispersion = float(np.mean(np.hypot(*(pts_cm - center).T))) if len(sel) else 0.0

    diffs = np.diff(pts_cm, axis=0)
    scanpath = float(np.hypot(diffs[:, 0], diffs[:, 1]).sum()) if len(sel) > 1 else 0.0

    if kept:
        amps = []
        counts = {c: 0 for c in SaccadeClass}
        for s in kept:
            a = fixations[s.from_idx].centroid
            b = fixations[s.to_idx].centroid
            ax, ay = to_cm(a.x, a.y, pages.get(a.page_index) or layout.page(a.page_index))
            bx, by = to_cm(b.x, b.y, pages.get(b.page_index) or layout.page(b.page_index))
            amps.append(math.hypot(bx - ax, by - ay))
            counts[s.direction_class] += 1
        mean_sacc = float(np.mean(amps))
        n_sacc = len(kept)
        rate_vn = counts[SaccadeClass.VERTICAL_NEXT] / n_sacc
        rate_hl = counts[SaccadeClass.HORIZONTAL_LATER] / n_sacc
        rate_lr = counts[SaccadeClass.LINE_REGRESSION] / n_sacc
        rate_r = counts[SaccadeClass.REGRESSION] / n_sacc
        try:
            ratio = fbsr(kept)
        except NoDirectionalSaccades:
            ratio = 0.0
    else:
        mean_sacc = rate_vn = rate_hl = rate_lr = rate_r = ratio = 0.0

    covered = covered_word_ids(sel, layout)
    minutes = (t1 - t0) / 60000.0

    return FeatureVector(
        fixation_count=len(sel),
        mean_fixation_duration_ms=float(durations.mean()),
        fixation_dispersion=dispersion,
        mean_saccade_length=mean_sacc,
        rate_vertical_next=rate_vn,
        rate_horizontal_later=rate_hl,
        rate_line_regression=rate_lr,
        rate_regression=rate_r,
        wpm=len(covered) / minutes,
        inverse_dispersion=1.0 / max(dispersion, DISPERSION_EPS_CM),
        scanpath_length_cm=scanpath,
        fbsr=ratio,
    )


def segment_features(
    segment: Segment,
    fixations: Sequence[Fixation],
    saccades: Sequence[Saccade],
    layout: DocumentLayout,
) -> "tuple[FeatureVector, dict]":
    """Features over a whole segment plus its summary-table row.

    The summary mirrors the per-behavior statistics schema:
    duration_s, fixation_count, scanpath_length_cm,
    median_fixation_duration_ms.
    """
    vec = window_features(fixations, saccades, layout, segment.start_ms, segment.end_ms)
    idx = fixations_in_window(fixations, segment.start_ms, segment.end_ms)
    durations = [fixations[i].duration_ms for i in idx]
    summary = {
        "duration_s": segment.duration_ms / 1000.0,
        "fixation_count": vec.fixation_count,
        "scanpath_length_cm": vec.scanpath_length_cm,
        "median_fixation_duration_ms": float(np.median(durations)) if durations else 0.0,
    }
    return vec, summary


def feature_matrix(vectors: Sequence[FeatureVector]) -> np.ndarray:
    """Stack feature vectors into an (n, 12) float64 matrix."""
    if not vectors:
        return np.empty((0, len(FEATURE_NAMES)))
    return np.stack([v.to_array() for v in vectors])
