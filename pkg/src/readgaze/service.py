"""HTTP JSON API over the session store.

Serves sessions, fixations, the annotation table, per-fixation model
predictions, inter-rater agreement, and rendered scanplots. Reviewer
identity travels in the ``X-Reviewer-Role`` header (``r1`` or ``r2``).

The dual-label protocol is enforced here, not in any client: while a
segment lacks the second reviewer's label, each reviewer sees only
their own label (the other reviewer's field is omitted from responses,
and asking for it explicitly is a 403), so the second label is always
given blind. Final labels require both reviewer labels or an explicit
override with a justification.
"""

from __future__ import annotations

import json
from typing import Optional

from fastapi import FastAPI, File, Header, Query, Request, UploadFile
from fastapi.responses import JSONResponse, PlainTextResponse, Response
from pydantic import BaseModel

from .core import BehaviorLabel, Segment
from .errors import (
    MalformedUpload,
    ProtocolViolation,
    RoleViolation,
    SegmentOverlap,
    StoreError,
    TooFewFixations,
    UnknownId,
    ZeroDuration,
)
from .render import RenderConfig, encode_png, render_window
from .store import SessionStore

__all__ = ["create_app", "segment_view"]

ROLES = ("r1", "r2")


# ---------------------------------------------------------------------------
# Request bodies
# ---------------------------------------------------------------------------


class SegmentBody(BaseModel):
    start_ms: float
    end_ms: float


class LabelBody(BaseModel):
    label: str


class FinalBody(BaseModel):
    label: str
    override: bool = False
    justification: str = ""


class SplitBody(BaseModel):
    t_ms: float


# ---------------------------------------------------------------------------
# Views
# ---------------------------------------------------------------------------


def _parse_label(value: str) -> BehaviorLabel:
    try:
        return BehaviorLabel(value)
    except ValueError:
        raise MalformedUpload(
            f"unknown label {value!r}; valid labels: "
            f"{[b.value for b in BehaviorLabel]}"
        )


def segment_view(segment_id: str, seg: Segment, role: Optional[str]) -> dict:
    """Serialized segment with the blind-protocol field withholding.

    Until both reviewer labels exist, each reviewer label is visible
    only to its own reviewer; the other reviewer's field is omitted
    entirely (not nulled, so its presence cannot leak whether the other
    reviewer has labeled yet). Once both labels are present everything
    is visible to everyone.
    """
    doc = {"segment_id": segment_id, **seg.to_dict()}
    both = seg.label_r1 is not None and seg.label_r2 is not None
    if not both:
        for slot in ROLES:
            if role != slot:
                doc.pop(f"label_{slot}", None)
    return doc


def _reviewer(x_reviewer_role: Optional[str]) -> Optional[str]:
    if x_reviewer_role is None:
        return None
    if x_reviewer_role not in ROLES:
        raise RoleViolation(
            f"unknown reviewer role {x_reviewer_role!r}; expected one of {ROLES}"
        )
    return x_reviewer_role


def _require_reviewer(role: Optional[str]) -> str:
    if role is None:
        raise RoleViolation("a reviewer role header (X-Reviewer-Role) is required")
    return role


# ---------------------------------------------------------------------------
# App factory
# ---------------------------------------------------------------------------


def create_app(store: SessionStore) -> FastAPI:
    app = FastAPI(title="readgaze", docs_url=None, redoc_url=None)
    app.state.store = store

    status_for = {
        UnknownId: 404,
        SegmentOverlap: 409,
        ProtocolViolation: 409,
        RoleViolation: 403,
        MalformedUpload: 422,
    }

    @app.exception_handler(StoreError)
    async def _store_error(request: Request, exc: StoreError):
        code = next(
            (c for t, c in status_for.items() if isinstance(exc, t)), 500
        )
        return JSONResponse(
            status_code=code,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return JSONResponse(
            status_code=422,
            content={"error": "ValueError", "detail": str(exc)},
        )

    @app.exception_handler(ZeroDuration)
    async def _zero_duration(request: Request, exc: ZeroDuration):
        return JSONResponse(
            status_code=422,
            content={"error": "ZeroDuration", "detail": str(exc)},
        )

    @app.exception_handler(TooFewFixations)
    async def _too_few(request: Request, exc: TooFewFixations):
        return JSONResponse(
            status_code=422,
            content={"error": "TooFewFixations", "detail": str(exc)},
        )

    # -- sessions ----------------------------------------------------------

    @app.get("/api/sessions")
    def list_sessions():
        return {"sessions": [r.to_dict() for r in store.list_records()]}

    @app.post("/api/sessions", status_code=201)
    def create_session(
        gaze: UploadFile = File(...),
        viewport: UploadFile = File(...),
        layout: UploadFile = File(...),
        participant_id: Optional[str] = None,
    ):
        record = store.create_session(
            gaze.file.read(),
            viewport.file.read(),
            layout.file.read(),
            participant_id=participant_id,
        )
        return record.to_dict()

    @app.get("/api/sessions/{session_id}/fixations")
    def fixations(
        session_id: str,
        from_ms: Optional[float] = Query(None, alias="from"),
        to_ms: Optional[float] = Query(None, alias="to"),
    ):
        """Fixations fully inside [from, to); unbounded when omitted."""
        store.wait_ready(session_id)
        rows = []
        for i, f in enumerate(store.fixations(session_id)):
            if from_ms is not None and f.start_ms < from_ms:
                continue
            if to_ms is not None and not f.end_ms < to_ms:
                continue
            rows.append({"index": i, **f.to_dict()})
        return {"session_id": session_id, "fixations": rows}

    # -- segments ----------------------------------------------------------

    @app.get("/api/sessions/{session_id}/segments")
    def list_segments(
        session_id: str, x_reviewer_role: Optional[str] = Header(None)
    ):
        role = _reviewer(x_reviewer_role)
        return {
            "session_id": session_id,
            "segments": [
                segment_view(sid, seg, role)
                for sid, seg in store.segments(session_id)
            ],
        }

    @app.post("/api/sessions/{session_id}/segments", status_code=201)
    def create_segment(
        session_id: str,
        body: SegmentBody,
        x_reviewer_role: Optional[str] = Header(None),
    ):
        role = _require_reviewer(_reviewer(x_reviewer_role))
        seg_id, seg = store.add_segment(session_id, body.start_ms, body.end_ms)
        return segment_view(seg_id, seg, role)

    @app.get("/api/sessions/{session_id}/segments/{segment_id}/label/{slot}")
    def read_label(
        session_id: str,
        segment_id: str,
        slot: str,
        x_reviewer_role: Optional[str] = Header(None),
    ):
        """Explicit single-field read; withheld fields are a 403."""
        role = _reviewer(x_reviewer_role)
        if slot not in ROLES:
            raise MalformedUpload(f"label slot must be one of {ROLES}, got {slot!r}")
        for sid, seg in store.segments(session_id):
            if sid == segment_id:
                both = seg.label_r1 is not None and seg.label_r2 is not None
                if not both and role != slot:
                    raise RoleViolation(
                        f"label_{slot} is withheld until both reviewer labels exist"
                    )
                value = getattr(seg, f"label_{slot}")
                return {
                    "segment_id": segment_id,
                    f"label_{slot}": value.value if value else None,
                }
        raise UnknownId(f"unknown segment {segment_id!r}")

    @app.put("/api/sessions/{session_id}/segments/{segment_id}/label")
    def put_label(
        session_id: str,
        segment_id: str,
        body: LabelBody,
        x_reviewer_role: Optional[str] = Header(None),
    ):
        role = _require_reviewer(_reviewer(x_reviewer_role))
        seg = store.set_label(session_id, segment_id, role, _parse_label(body.label))
        return segment_view(segment_id, seg, role)

    @app.put("/api/sessions/{session_id}/segments/{segment_id}/final")
    def put_final(
        session_id: str,
        segment_id: str,
        body: FinalBody,
        x_reviewer_role: Optional[str] = Header(None),
    ):
        role = _require_reviewer(_reviewer(x_reviewer_role))
        seg = store.set_final(
            session_id,
            segment_id,
            _parse_label(body.label),
            override=body.override,
            justification=body.justification,
        )
        return segment_view(segment_id, seg, role)

    @app.post("/api/sessions/{session_id}/segments/{segment_id}/split")
    def split_segment(
        session_id: str,
        segment_id: str,
        body: SplitBody,
        x_reviewer_role: Optional[str] = Header(None),
    ):
        role = _require_reviewer(_reviewer(x_reviewer_role))
        halves = store.split_segment(session_id, segment_id, body.t_ms)
        return {
            "session_id": session_id,
            "segments": [segment_view(sid, seg, role) for sid, seg in halves],
        }

    # -- analysis ----------------------------------------------------------

    @app.get("/api/sessions/{session_id}/irr")
    def irr(session_id: str):
        return store.irr(session_id)

    @app.get("/api/sessions/{session_id}/predictions")
    def predictions(session_id: str, model: str):
        store.wait_ready(session_id)
        return {
            "session_id": session_id,
            "model": model,
            "timeline": store.predictions(session_id, model),
        }

    @app.get("/api/models")
    def models():
        return {"models": store.model_names()}

    @app.get("/api/sessions/{session_id}/export")
    def export(session_id: str):
        return PlainTextResponse(
            store.export_annotation_table(session_id),
            media_type="text/tab-separated-values",
        )

    # -- rendering ---------------------------------------------------------

    @app.get("/api/render/{session_id}")
    def render(
        session_id: str,
        from_ms: Optional[float] = Query(None, alias="from"),
        to_ms: Optional[float] = Query(None, alias="to"),
        w: int = Query(480, ge=4, le=4096),
        h: int = Query(640, ge=4, le=4096),
    ):
        store.wait_ready(session_id)
        fixations = store.fixations(session_id)
        lo = 0
        selected = []
        for i, f in enumerate(fixations):
            if from_ms is not None and f.mid_ms < from_ms:
                continue
            if to_ms is not None and f.mid_ms >= to_ms:
                continue
            if not selected:
                lo = i
            selected.append(f)
        config = RenderConfig(width_px=w, height_px=h)
        image = render_window(
            selected, config, session_id=session_id, index_offset=lo
        )
        return Response(content=encode_png(image.pixels), media_type="image/png")

    return app
