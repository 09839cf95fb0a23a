"""Raw log parsing and screen-to-page projection.

A gaze point is projected into page-normalized coordinates by expressing
it relative to the page element's on-screen rectangle:

    x = (sx - rect.l) / rect.w
    y = (sy - rect.t) / rect.h

The projection is exact IEEE double arithmetic and is invariant under
uniform rescaling of screen space applied to both sample and rect, so
page coordinates are independent of screen resolution.

On-disk raw forms: a gaze log (delimited text or JSON-lines, fields
t_ms, sx, sy, valid), a viewport log (JSON-lines of rect events), and a
layout document (single JSON). The combined canonical session document
lives in the store module.
"""

from __future__ import annotations

import bisect
import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .core import DocumentLayout, GazeSample, PagePoint, PageRect
from .errors import DegenerateRect, NoViewport


class Condition(enum.Enum):
    """How the session was collected."""

    INSTRUCTED = "instructed"
    IN_THE_WILD = "in-the-wild"


def project_to_pcs(sample: GazeSample, rect: PageRect) -> PagePoint:
    """Project one screen-space sample into page space via its viewport rect."""
    if not (rect.w > 0 and rect.h > 0):
        raise DegenerateRect(f"rect must have positive size, got w={rect.w} h={rect.h}")
    return PagePoint(
        page_index=rect.page_index,
        x=(sample.sx - rect.l) / rect.w,
        y=(sample.sy - rect.t) / rect.h,
        t_ms=sample.t_ms,
    )


def unproject(point: PagePoint, rect: PageRect) -> GazeSample:
    """Map a page-space point back to screen space (inverse of project_to_pcs)."""
    if not (rect.w > 0 and rect.h > 0):
        raise DegenerateRect(f"rect must have positive size, got w={rect.w} h={rect.h}")
    return GazeSample(
        t_ms=point.t_ms,
        sx=rect.l + point.x * rect.w,
        sy=rect.t + point.y * rect.h,
    )


class RectTrack:
    """Time-indexed viewport rectangles: step function, last-at-or-before."""

    def __init__(self, rects: Sequence[PageRect]):
        if not rects:
            raise NoViewport("a session needs at least one viewport rect")
        self._rects = sorted(rects, key=lambda r: r.t_ms)
        self._times = [r.t_ms for r in self._rects]

    @property
    def first_t(self) -> float:
        return self._times[0]

    def at(self, t_ms: float) -> PageRect:
        i = bisect.bisect_right(self._times, t_ms) - 1
        if i < 0:
            raise NoViewport(f"no viewport rect in force at t={t_ms} ms")
        return self._rects[i]

    def __len__(self) -> int:
        return len(self._rects)

    def __iter__(self):
        return iter(self._rects)


@dataclass(frozen=True)
class SessionBundle:
    """One recording: raw samples, viewport events, layout, provenance."""

    session_id: str
    participant_id: str
    samples: tuple
    rect_events: tuple
    layout: DocumentLayout
    condition: Condition = Condition.INSTRUCTED

    @property
    def duration_ms(self) -> float:
        if not self.samples:
            return 0.0
        return self.samples[-1].t_ms - self.samples[0].t_ms


def project_stream(bundle: SessionBundle) -> list:
    """Project a whole bundle into page points.

    Invalid samples are omitted. A valid sample arriving before any rect
    event is a NoViewport error (mis-merged logs), not a silent drop.
    """
    track = RectTrack(bundle.rect_events)
    out: list[PagePoint] = []
    for s in bundle.samples:
        if not s.valid:
            continue
        if s.t_ms < track.first_t:
            raise NoViewport(
                f"valid sample at t={s.t_ms} ms precedes the first rect event "
                f"at t={track.first_t} ms"
            )
        out.append(project_to_pcs(s, track.at(s.t_ms)))
    return out


# ---------------------------------------------------------------------------
# Raw log readers
# ---------------------------------------------------------------------------

_TRUTHY = {"1", "true", "t", "yes"}


def read_gaze_log(path: "str | Path", session_id: str = "") -> tuple:
    """Read a gaze log: JSON-lines or delimited text, one sample per line.

    Delimited files may start with a header row naming the four fields;
    separators can be commas, tabs, or runs of spaces.
    """
    samples = []
    with open(path, "r", encoding="utf-8") as f:
        for raw in f:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("{"):
                samples.append(GazeSample.from_dict(json.loads(line), session_id))
                continue
            parts = [p for p in line.replace(",", " ").replace("\t", " ").split(" ") if p]
            if parts[0].lower() in ("t_ms", "t", "time"):
                continue  # header row
            t_ms, sx, sy = float(parts[0]), float(parts[1]), float(parts[2])
            valid = parts[3].lower() in _TRUTHY if len(parts) > 3 else True
            samples.append(
                GazeSample(t_ms=t_ms, sx=sx, sy=sy, valid=valid, session_id=session_id)
            )
    return tuple(samples)


def read_viewport_log(path: "str | Path") -> tuple:
    """Read a viewport log: JSON-lines, one rect event per line."""
    rects = []
    with open(path, "r", encoding="utf-8") as f:
        for raw in f:
            line = raw.strip()
            if line:
                rects.append(PageRect.from_dict(json.loads(line)))
    return tuple(rects)


def read_layout(path: "str | Path") -> DocumentLayout:
    """Read a layout document (single JSON file)."""
    with open(path, "r", encoding="utf-8") as f:
        return DocumentLayout.from_dict(json.load(f))


def load_bundle(
    gaze_path: "str | Path",
    viewport_path: "str | Path",
    layout_path: "str | Path",
    session_id: str = "",
    participant_id: str = "",
    condition: Condition = Condition.INSTRUCTED,
) -> SessionBundle:
    """Assemble a SessionBundle from the three raw log files."""
    sid = session_id or Path(gaze_path).stem
    return SessionBundle(
        session_id=sid,
        participant_id=participant_id or sid,
        samples=read_gaze_log(gaze_path, sid),
        rect_events=read_viewport_log(viewport_path),
        layout=read_layout(layout_path),
        condition=condition,
    )
