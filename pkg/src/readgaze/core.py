"""Core domain types: gaze samples, page geometry, oculomotor events,
behavior labels, segments, and document layouts.

All types are immutable value objects (frozen dataclasses); they can be
shared freely across threads. Timestamps are milliseconds since session
start, stored as floats so 60 Hz periods (~16.67 ms) do not alias.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Optional, Sequence


@dataclass(frozen=True)
class GazeSample:
    """One raw eye-tracker sample in screen coordinate space."""

    t_ms: float
    sx: float
    sy: float
    valid: bool = True
    session_id: str = ""

    def to_dict(self) -> dict:
        return {"t_ms": self.t_ms, "sx": self.sx, "sy": self.sy, "valid": self.valid}

    @classmethod
    def from_dict(cls, d: dict, session_id: str = "") -> "GazeSample":
        return cls(
            t_ms=float(d["t_ms"]),
            sx=float(d["sx"]),
            sy=float(d["sy"]),
            valid=bool(d["valid"]),
            session_id=session_id,
        )


@dataclass(frozen=True)
class PageRect:
    """Bounding rectangle of a page element on screen at a point in time."""

    page_index: int
    l: float
    t: float
    w: float
    h: float
    t_ms: float = 0.0

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.h > 0):
            from .errors import DegenerateRect

            raise DegenerateRect(f"rect must have positive size, got w={self.w} h={self.h}")

    def to_dict(self) -> dict:
        return {
            "page_index": self.page_index,
            "l": self.l,
            "t": self.t,
            "w": self.w,
            "h": self.h,
            "t_ms": self.t_ms,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PageRect":
        return cls(
            page_index=int(d["page_index"]),
            l=float(d["l"]),
            t=float(d["t"]),
            w=float(d["w"]),
            h=float(d["h"]),
            t_ms=float(d.get("t_ms", 0.0)),
        )


@dataclass(frozen=True)
class PagePoint:
    """A gaze point in page coordinate space.

    x and y are page-normalized: (0, 0) is the page's top-left corner and
    (1, 1) its bottom-right. Values outside [0, 1] are kept (gaze may fall
    off-page during scrolling) and flagged via ``off_page``.
    """

    page_index: int
    x: float
    y: float
    t_ms: float

    @property
    def off_page(self) -> bool:
        return not (0.0 <= self.x <= 1.0 and 0.0 <= self.y <= 1.0)

    def to_dict(self) -> dict:
        return {"page_index": self.page_index, "x": self.x, "y": self.y, "t_ms": self.t_ms}

    @classmethod
    def from_dict(cls, d: dict) -> "PagePoint":
        return cls(
            page_index=int(d["page_index"]),
            x=float(d["x"]),
            y=float(d["y"]),
            t_ms=float(d["t_ms"]),
        )


@dataclass(frozen=True)
class Fixation:
    """A stable-gaze interval with its centroid in page space."""

    start_ms: float
    end_ms: float
    centroid: PagePoint
    sample_count: int

    @property
    def duration_ms(self) -> float:
        return self.end_ms - self.start_ms

    @property
    def mid_ms(self) -> float:
        return 0.5 * (self.start_ms + self.end_ms)

    def to_dict(self) -> dict:
        return {
            "start_ms": self.start_ms,
            "end_ms": self.end_ms,
            "centroid": self.centroid.to_dict(),
            "sample_count": self.sample_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Fixation":
        return cls(
            start_ms=float(d["start_ms"]),
            end_ms=float(d["end_ms"]),
            centroid=PagePoint.from_dict(d["centroid"]),
            sample_count=int(d["sample_count"]),
        )


class SaccadeClass(enum.Enum):
    """Direction class of a saccade relative to the text's reading order."""

    FORWARD = "forward"
    REGRESSION = "regression"
    LINE_FORWARD = "line-forward"
    LINE_REGRESSION = "line-regression"
    VERTICAL_NEXT = "vertical-next"
    HORIZONTAL_LATER = "horizontal-later"
    NEUTRAL = "neutral"


#: Classes that advance through the text, used by the forward/backward ratio.
FORWARD_CLASSES = frozenset(
    {
        SaccadeClass.FORWARD,
        SaccadeClass.LINE_FORWARD,
        SaccadeClass.VERTICAL_NEXT,
        SaccadeClass.HORIZONTAL_LATER,
    }
)
#: Classes that move back through the text.
REGRESSION_CLASSES = frozenset({SaccadeClass.REGRESSION, SaccadeClass.LINE_REGRESSION})


@dataclass(frozen=True)
class Saccade:
    """Movement between two adjacent fixations (``to_idx == from_idx + 1``)."""

    from_idx: int
    to_idx: int
    dx: float
    dy: float
    direction_class: SaccadeClass

    @property
    def amplitude(self) -> float:
        return math.hypot(self.dx, self.dy)

    def to_dict(self) -> dict:
        return {
            "from_idx": self.from_idx,
            "to_idx": self.to_idx,
            "dx": self.dx,
            "dy": self.dy,
            "amplitude": self.amplitude,
            "direction_class": self.direction_class.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Saccade":
        return cls(
            from_idx=int(d["from_idx"]),
            to_idx=int(d["to_idx"]),
            dx=float(d["dx"]),
            dy=float(d["dy"]),
            direction_class=SaccadeClass(d["direction_class"]),
        )


class BehaviorLabel(enum.Enum):
    """The six reading-behavior archetypes."""

    STATIC = "static"
    DEEP = "deep"
    SEQUENTIAL = "sequential"
    NON_SEQUENTIAL = "non-sequential"
    SKIMMING = "skimming"
    PREVIEWING_MAPPING = "previewing/mapping"

    @classmethod
    def from_string(cls, s: str) -> "BehaviorLabel":
        return cls(s)


#: Labels with enough data to train classifiers on.
TRAINED_LABELS = (BehaviorLabel.SEQUENTIAL, BehaviorLabel.NON_SEQUENTIAL, BehaviorLabel.SKIMMING)


@dataclass(frozen=True)
class Segment:
    """A labeled time interval of one behavior within a session."""

    start_ms: float
    end_ms: float
    label_r1: Optional[BehaviorLabel] = None
    label_r2: Optional[BehaviorLabel] = None
    label_final: Optional[BehaviorLabel] = None
    words_covered: int = 0
    wpm: float = 0.0
    final_override: bool = False
    override_note: str = ""

    def __post_init__(self) -> None:
        if not self.end_ms > self.start_ms:
            raise ValueError(f"segment end {self.end_ms} must exceed start {self.start_ms}")
        if self.label_final is not None and not self.final_override:
            if self.label_r1 is None or self.label_r2 is None:
                raise ValueError("final label requires both reviewer labels or an override")

    @property
    def duration_ms(self) -> float:
        return self.end_ms - self.start_ms

    def overlaps(self, other: "Segment") -> bool:
        return self.start_ms < other.end_ms and other.start_ms < self.end_ms

    def to_dict(self) -> dict:
        return {
            "start_ms": self.start_ms,
            "end_ms": self.end_ms,
            "label_r1": self.label_r1.value if self.label_r1 else None,
            "label_r2": self.label_r2.value if self.label_r2 else None,
            "label_final": self.label_final.value if self.label_final else None,
            "words_covered": self.words_covered,
            "wpm": self.wpm,
            "final_override": self.final_override,
            "override_note": self.override_note,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Segment":
        def lbl(v):
            return BehaviorLabel(v) if v else None

        return cls(
            start_ms=float(d["start_ms"]),
            end_ms=float(d["end_ms"]),
            label_r1=lbl(d.get("label_r1")),
            label_r2=lbl(d.get("label_r2")),
            label_final=lbl(d.get("label_final")),
            words_covered=int(d.get("words_covered", 0)),
            wpm=float(d.get("wpm", 0.0)),
            final_override=bool(d.get("final_override", False)),
            override_note=str(d.get("override_note", "")),
        )


def validate_segments(segments: Sequence[Segment]) -> None:
    """Reject segment lists that overlap or run backwards in time."""
    ordered = sorted(segments, key=lambda s: s.start_ms)
    for a, b in zip(ordered, ordered[1:]):
        if a.overlaps(b):
            raise ValueError(
                f"segments overlap: [{a.start_ms}, {a.end_ms}) and [{b.start_ms}, {b.end_ms})"
            )


@dataclass(frozen=True)
class WordBox:
    """One word of the document with its page-normalized bounding box."""

    word_id: int
    reading_order: int
    text: str
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def cx(self) -> float:
        return 0.5 * (self.x0 + self.x1)

    @property
    def cy(self) -> float:
        return 0.5 * (self.y0 + self.y1)

    def contains(self, x: float, y: float, margin: float = 0.0) -> bool:
        return (self.x0 - margin) <= x <= (self.x1 + margin) and (
            self.y0 - margin
        ) <= y <= (self.y1 + margin)

    def to_dict(self) -> dict:
        return {
            "word_id": self.word_id,
            "reading_order": self.reading_order,
            "text": self.text,
            "rect": {"x0": self.x0, "y0": self.y0, "x1": self.x1, "y1": self.y1},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WordBox":
        r = d["rect"]
        return cls(
            word_id=int(d["word_id"]),
            reading_order=int(d["reading_order"]),
            text=str(d.get("text", "")),
            x0=float(r["x0"]),
            y0=float(r["y0"]),
            x1=float(r["x1"]),
            y1=float(r["y1"]),
        )


@dataclass(frozen=True)
class TextLine:
    """A line of words, identified by its vertical center."""

    line_id: int
    y_center: float
    word_ids: tuple

    def to_dict(self) -> dict:
        return {"line_id": self.line_id, "y_center": self.y_center, "word_ids": list(self.word_ids)}

    @classmethod
    def from_dict(cls, d: dict) -> "TextLine":
        return cls(
            line_id=int(d["line_id"]),
            y_center=float(d["y_center"]),
            word_ids=tuple(int(w) for w in d["word_ids"]),
        )


# US letter, the default physical page size for cm conversions.
LETTER_WIDTH_CM = 21.59
LETTER_HEIGHT_CM = 27.94


@dataclass(frozen=True)
class PageLayout:
    """Words and lines of a single page plus its physical dimensions."""

    page_index: int
    width_cm: float = LETTER_WIDTH_CM
    height_cm: float = LETTER_HEIGHT_CM
    words: tuple = ()
    lines: tuple = ()

    def __post_init__(self) -> None:
        orders = sorted(w.reading_order for w in self.words)
        if orders != list(range(len(self.words))):
            raise ValueError("reading_order must be a permutation of 0..N-1")
        line_of = {}
        for line in self.lines:
            for wid in line.word_ids:
                if wid in line_of:
                    raise ValueError(f"word {wid} belongs to more than one line")
                line_of[wid] = line.line_id
        for w in self.words:
            if not (0.0 <= w.x0 <= w.x1 <= 1.0 and 0.0 <= w.y0 <= w.y1 <= 1.0):
                raise ValueError(f"word {w.word_id} rect outside the unit square")
            if self.lines and w.word_id not in line_of:
                raise ValueError(f"word {w.word_id} belongs to no line")

    def to_dict(self) -> dict:
        return {
            "page_index": self.page_index,
            "width_cm": self.width_cm,
            "height_cm": self.height_cm,
            "words": [w.to_dict() for w in self.words],
            "lines": [ln.to_dict() for ln in self.lines],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PageLayout":
        return cls(
            page_index=int(d["page_index"]),
            width_cm=float(d.get("width_cm", LETTER_WIDTH_CM)),
            height_cm=float(d.get("height_cm", LETTER_HEIGHT_CM)),
            words=tuple(WordBox.from_dict(w) for w in d.get("words", [])),
            lines=tuple(TextLine.from_dict(ln) for ln in d.get("lines", [])),
        )


@dataclass(frozen=True)
class DocumentLayout:
    """All pages of the stimulus document."""

    pages: tuple

    def page(self, index: int) -> PageLayout:
        for p in self.pages:
            if p.page_index == index:
                return p
        raise KeyError(f"no page with index {index}")

    @property
    def word_count(self) -> int:
        return sum(len(p.words) for p in self.pages)

    def to_dict(self) -> dict:
        return {"pages": [p.to_dict() for p in self.pages]}

    @classmethod
    def from_dict(cls, d: dict) -> "DocumentLayout":
        return cls(pages=tuple(PageLayout.from_dict(p) for p in d["pages"]))

    @classmethod
    def empty(cls, page_index: int = 0) -> "DocumentLayout":
        return cls(pages=(PageLayout(page_index=page_index),))


@dataclass(frozen=True)
class ValidationReport:
    """Counts of stream defects found by ``validate_session``."""

    sample_count: int = 0
    invalid_count: int = 0
    out_of_order_count: int = 0
    gap_count: int = 0
    rect_count: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


GAP_THRESHOLD_MS = 500.0


def validate_session(
    samples: Iterable[GazeSample], rects: Iterable[PageRect] = ()
) -> ValidationReport:
    """Report-only health check of a raw session stream.

    Counts invalid samples, timestamp inversions, and inter-sample gaps
    above ``GAP_THRESHOLD_MS``. Never mutates or filters the input.
    """
    n = invalid = out_of_order = gaps = 0
    prev_t: Optional[float] = None
    for s in samples:
        n += 1
        if not s.valid:
            invalid += 1
        if prev_t is not None:
            if s.t_ms < prev_t:
                out_of_order += 1
            elif s.t_ms - prev_t > GAP_THRESHOLD_MS:
                gaps += 1
        prev_t = s.t_ms
    return ValidationReport(
        sample_count=n,
        invalid_count=invalid,
        out_of_order_count=out_of_order,
        gap_count=gaps,
        rect_count=sum(1 for _ in rects),
    )
