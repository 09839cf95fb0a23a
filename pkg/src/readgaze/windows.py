"""Sliding training/evaluation windows with strict labeling rules.

Two window families:
  * time windows of t_s seconds (2..15), stride-based, labeled only when
    the window lies fully inside one labeled segment;
  * fixation windows of k fixations, stride 1, labeled only when at
    least ceil(0.8 k) of the fixations (8 of 10 at the default) sit in
    one labeled segment, measured at each fixation's midpoint time.

Anything else is Unlabeled: excluded from training, retained so the
inference path still sees boundary-straddling data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .core import BehaviorLabel, Fixation, Segment
from .errors import BadWindowSize

MIN_TIME_WINDOW_S = 2.0
MAX_TIME_WINDOW_S = 15.0
DEFAULT_FIXATION_WINDOW = 10


@dataclass(frozen=True)
class LabeledWindow:
    """A candidate training/inference unit.

    kind is "time" or "fixation". Time spans are half-open [t0, t1).
    Fixation windows also carry their inclusive index range and the time
    span from first fixation start to last fixation end. label is None
    for Unlabeled windows; coverage is the best single-segment share.
    """

    kind: str
    t0_ms: float
    t1_ms: float
    label: Optional[BehaviorLabel] = None
    coverage: float = 0.0
    fix_lo: int = -1
    fix_hi: int = -1

    @property
    def labeled(self) -> bool:
        return self.label is not None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "t0_ms": self.t0_ms,
            "t1_ms": self.t1_ms,
            "label": self.label.value if self.label else None,
            "coverage": self.coverage,
            "fix_lo": self.fix_lo,
            "fix_hi": self.fix_hi,
        }


def slide_time_windows(
    segments: Sequence[Segment],
    duration_ms: float,
    t_s: float,
    stride_s: float = 1.0,
) -> "list[LabeledWindow]":
    """Time windows at t0 = 0, stride, 2*stride, ... while t0 + t_s fits.

    A window gets its segment's final label iff it is fully contained in
    that segment; a window touching two segments or labeled-segment
    boundary is Unlabeled (coverage records the best overlap share).
    """
    if not (MIN_TIME_WINDOW_S <= t_s <= MAX_TIME_WINDOW_S):
        raise BadWindowSize(
            f"t_s must be within [{MIN_TIME_WINDOW_S}, {MAX_TIME_WINDOW_S}] s, got {t_s}"
        )
    if stride_s <= 0:
        raise BadWindowSize(f"stride must be positive, got {stride_s}")
    span = t_s * 1000.0
    stride = stride_s * 1000.0
    out: list[LabeledWindow] = []
    k = 0
    while k * stride + span <= duration_ms:
        t0 = k * stride
        t1 = t0 + span
        label: Optional[BehaviorLabel] = None
        best = 0.0
        for seg in segments:
            overlap = max(0.0, min(t1, seg.end_ms) - max(t0, seg.start_ms))
            share = overlap / span
            if share > best:
                best = share
            if seg.start_ms <= t0 and t1 <= seg.end_ms and seg.label_final is not None:
                label = seg.label_final
                best = 1.0
        out.append(
            LabeledWindow(kind="time", t0_ms=t0, t1_ms=t1, label=label, coverage=best)
        )
        k += 1
    return out


def slide_fixation_windows(
    fixations: Sequence[Fixation],
    segments: Sequence[Segment],
    k: int = DEFAULT_FIXATION_WINDOW,
) -> "list[LabeledWindow]":
    """Stride-1 windows of k consecutive fixations.

    A fixation belongs to the segment containing its midpoint. A window
    is labeled iff at least ceil(0.8 k) of its fixations fall in one
    finally-labeled segment.
    """
    if k < 2:
        raise BadWindowSize(f"fixation window needs k >= 2, got {k}")
    need = math.ceil(0.8 * k)
    # midpoint membership, computed once per fixation
    members: list[Optional[int]] = []
    for f in fixations:
        seg_idx = None
        for si, seg in enumerate(segments):
            if seg.start_ms <= f.mid_ms < seg.end_ms:
                seg_idx = si
                break
        members.append(seg_idx)

    out: list[LabeledWindow] = []
    for lo in range(0, len(fixations) - k + 1):
        hi = lo + k - 1
        counts: dict[int, int] = {}
        for i in range(lo, hi + 1):
            si = members[i]
            if si is not None:
                counts[si] = counts.get(si, 0) + 1
        label: Optional[BehaviorLabel] = None
        best = 0
        for si, c in counts.items():
            if c > best:
                best = c
            if c >= need and segments[si].label_final is not None:
                label = segments[si].label_final
        out.append(
            LabeledWindow(
                kind="fixation",
                t0_ms=fixations[lo].start_ms,
                t1_ms=fixations[hi].end_ms,
                label=label,
                coverage=best / k,
                fix_lo=lo,
                fix_hi=hi,
            )
        )
    return out


def windows_table(windows: Sequence[LabeledWindow]) -> str:
    """Delimited audit manifest: one row per window."""
    lines = ["kind\tt0_ms\tt1_ms\tfix_lo\tfix_hi\tlabel\tcoverage"]
    for w in windows:
        lines.append(
            "\t".join(
                [
                    w.kind,
                    f"{w.t0_ms:.3f}",
                    f"{w.t1_ms:.3f}",
                    str(w.fix_lo),
                    str(w.fix_hi),
                    w.label.value if w.label else "unlabeled",
                    f"{w.coverage:.4f}",
                ]
            )
        )
    return "\n".join(lines)
