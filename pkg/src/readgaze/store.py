"""File-backed session store: one directory per session, no database.

Disk layout under the data directory::

    manifest.json                     corpus index, schema-versioned
    <session_id>/gaze.jsonl           raw gaze samples
    <session_id>/viewport.jsonl       viewport rect events
    <session_id>/layout.json          document layout
    <session_id>/segments.json        annotation table (atomic writes)
    <session_id>/fixations.json       detection cache, recomputable
    <session_id>/record.json          provenance for uploaded sessions
    <session_id>/predictions/<m>.json per-model timeline cache
    models/<name>.rgzc                registered checkpoints

Every segment write goes temp-file-then-rename, so a crash at any
point leaves the previous complete file in place. Reads and writes on
one session are serialized by a per-session reader-writer lock;
fixation detection for uploaded sessions runs on a small worker pool
and is idempotent (the cache is recomputed from the raw files if a
run fails or is interrupted).
"""

from __future__ import annotations

import json
import os
import shutil
import tempfile
import threading
import time
from concurrent.futures import Future, ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional

from .cnn import MODEL_RENDER, load_checkpoint, predict_stream
from .core import BehaviorLabel, Fixation, Segment, validate_segments
from .errors import (
    FaultInjected,
    MalformedUpload,
    ProtocolViolation,
    SchemaMismatch,
    SegmentOverlap,
    UnknownId,
)
from .ingest import (
    Condition,
    SessionBundle,
    read_gaze_log,
    read_layout,
    read_viewport_log,
    project_stream,
)
from .metrics import wpm
from .oculomotor import FilterConfig, detect_fixations, derive_saccades
from .stats import cohens_kappa

__all__ = [
    "SCHEMA_VERSION",
    "SessionRecord",
    "SessionStore",
    "atomic_write_bytes",
    "format_mmss",
]

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# Atomic writes
# ---------------------------------------------------------------------------


def atomic_write_bytes(
    path: "str | Path",
    data: bytes,
    fault: Optional[Callable[[str], None]] = None,
) -> None:
    """Write a file so that readers only ever see a complete version.

    The payload goes to a temp file in the same directory (same
    filesystem, so the final rename is atomic), is flushed and fsynced,
    then renamed over the target. ``fault`` is a test hook invoked at the
    named stages; raising from it simulates a crash at that point.
    """
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    # On any failure the temp file is left behind, exactly as a crash
    # would leave it; stale temps are discarded when the store opens.
    with os.fdopen(fd, "wb") as f:
        if fault:
            fault("before-write")
        f.write(data)
        f.flush()
        os.fsync(f.fileno())
    if fault:
        fault("before-rename")
    os.replace(tmp, path)


def _discard_stale_temps(directory: Path) -> None:
    for leftover in directory.glob(".*.tmp"):
        leftover.unlink(missing_ok=True)


# ---------------------------------------------------------------------------
# Reader-writer lock
# ---------------------------------------------------------------------------


class RWLock:
    """Many concurrent readers or one writer, with writer preference."""

    def __init__(self) -> None:
        self._cond = threading.Condition()
        self._readers = 0
        self._writer_active = False
        self._writers_waiting = 0

    @contextmanager
    def read(self):
        with self._cond:
            while self._writer_active or self._writers_waiting:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                if self._readers == 0:
                    self._cond.notify_all()

    @contextmanager
    def write(self):
        with self._cond:
            self._writers_waiting += 1
            while self._writer_active or self._readers:
                self._cond.wait()
            self._writers_waiting -= 1
            self._writer_active = True
        try:
            yield
        finally:
            with self._cond:
                self._writer_active = False
                self._cond.notify_all()


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SessionRecord:
    """Catalog entry for one stored session."""

    session_id: str
    participant_id: str
    condition: str
    created_at: float
    schema_version: int
    files: dict
    status: str  # "ready" once the fixation cache exists, else "cold"

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "participant_id": self.participant_id,
            "condition": self.condition,
            "created_at": self.created_at,
            "schema_version": self.schema_version,
            "files": dict(self.files),
            "status": self.status,
        }


def _session_files(root: Path, session_id: str) -> dict:
    d = root / session_id
    return {
        "gaze": str(d / "gaze.jsonl"),
        "viewport": str(d / "viewport.jsonl"),
        "layout": str(d / "layout.json"),
        "segments": str(d / "segments.json"),
        "fixations": str(d / "fixations.json"),
        "predictions": str(d / "predictions"),
    }


# ---------------------------------------------------------------------------
# Store
# ---------------------------------------------------------------------------


class SessionStore:
    """Sessions, annotations, caches, and registered models on disk."""

    def __init__(
        self,
        data_dir: "str | Path",
        filter_config: Optional[FilterConfig] = None,
        workers: int = 2,
    ) -> None:
        self.root = Path(data_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        self.filter_config = filter_config or FilterConfig()
        self.fault_hook: Optional[Callable[[str], None]] = None
        self._locks: dict = {}
        self._locks_mutex = threading.Lock()
        self._manifest_lock = threading.Lock()
        self._pipeline = ThreadPoolExecutor(
            max_workers=workers, thread_name_prefix="pipeline"
        )
        self._jobs: dict = {}
        self._bundles: dict = {}
        self._load_manifest()
        for sid in self._sessions:
            _discard_stale_temps(self.root / sid)

    # -- manifest ----------------------------------------------------------

    def _load_manifest(self) -> None:
        self._sessions: dict = {}
        path = self.root / "manifest.json"
        if path.exists():
            doc = json.loads(path.read_text(encoding="utf-8"))
            version = doc.get("schema_version")
            if version != SCHEMA_VERSION:
                raise SchemaMismatch(
                    f"manifest schema_version {version!r}, supported {SCHEMA_VERSION}"
                )
            entries = doc.get("sessions", [])
        else:
            entries = [
                {"session_id": d.name, "participant_id": d.name, "condition": "instructed"}
                for d in sorted(self.root.iterdir())
                if d.is_dir() and (d / "gaze.jsonl").exists()
            ]
        for e in entries:
            self._sessions[e["session_id"]] = e

    def _write_manifest(self) -> None:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "sessions": [self._sessions[k] for k in sorted(self._sessions)],
        }
        atomic_write_bytes(
            self.root / "manifest.json",
            json.dumps(doc, sort_keys=True, indent=1).encode("utf-8"),
        )

    # -- locking -----------------------------------------------------------

    def _lock(self, session_id: str) -> RWLock:
        with self._locks_mutex:
            if session_id not in self._locks:
                self._locks[session_id] = RWLock()
            return self._locks[session_id]

    def _require(self, session_id: str) -> dict:
        entry = self._sessions.get(session_id)
        if entry is None:
            raise UnknownId(f"unknown session {session_id!r}")
        return entry

    # -- catalog -----------------------------------------------------------

    def session_ids(self) -> list:
        return sorted(self._sessions)

    def record(self, session_id: str) -> SessionRecord:
        entry = self._require(session_id)
        files = _session_files(self.root, session_id)
        record_path = self.root / session_id / "record.json"
        created = 0.0
        if record_path.exists():
            created = float(
                json.loads(record_path.read_text(encoding="utf-8")).get(
                    "created_at", 0.0
                )
            )
        if not created:
            created = os.path.getmtime(files["gaze"])
        return SessionRecord(
            session_id=session_id,
            participant_id=entry.get("participant_id", session_id),
            condition=entry.get("condition", "instructed"),
            created_at=created,
            schema_version=SCHEMA_VERSION,
            files=files,
            status="ready" if Path(files["fixations"]).exists() else "cold",
        )

    def list_records(self) -> list:
        return [self.record(sid) for sid in self.session_ids()]

    # -- ingest ------------------------------------------------------------

    def create_session(
        self,
        gaze: bytes,
        viewport: bytes,
        layout: bytes,
        session_id: Optional[str] = None,
        participant_id: Optional[str] = None,
        condition: str = "instructed",
    ) -> SessionRecord:
        """Persist an uploaded session and schedule fixation detection."""
        if session_id is None:
            n = len(self._sessions) + 1
            while f"s{n:04d}" in self._sessions:
                n += 1
            sid = f"s{n:04d}"
        else:
            sid = session_id
            if sid in self._sessions:
                raise MalformedUpload(f"session {sid!r} already exists")
        d = self.root / sid
        d.mkdir(parents=True, exist_ok=True)
        (d / "gaze.jsonl").write_bytes(gaze)
        (d / "viewport.jsonl").write_bytes(viewport)
        (d / "layout.json").write_bytes(layout)
        try:
            bundle = self._load_bundle(sid, participant_id or sid, condition)
            if not bundle.samples:
                raise MalformedUpload("gaze log holds no samples")
        except Exception as exc:
            self._bundles.pop(sid, None)
            shutil.rmtree(d, ignore_errors=True)
            if isinstance(exc, MalformedUpload):
                raise
            raise MalformedUpload(f"cannot parse uploaded session: {exc}") from exc
        self._write_segments_envelope(sid, {"next_id": 1, "segments": []})
        (d / "record.json").write_text(
            json.dumps(
                {
                    "session_id": sid,
                    "participant_id": participant_id or sid,
                    "condition": condition,
                    "created_at": time.time(),
                    "schema_version": SCHEMA_VERSION,
                },
                sort_keys=True,
            ),
            encoding="utf-8",
        )
        with self._manifest_lock:
            self._sessions[sid] = {
                "session_id": sid,
                "participant_id": participant_id or sid,
                "condition": condition,
            }
            self._write_manifest()
        self._jobs[sid] = self._pipeline.submit(self._warm_fixations, sid)
        return self.record(sid)

    def _load_bundle(
        self, session_id: str, participant_id: str, condition: str
    ) -> SessionBundle:
        if session_id in self._bundles:
            return self._bundles[session_id]
        d = self.root / session_id
        bundle = SessionBundle(
            session_id=session_id,
            participant_id=participant_id,
            samples=read_gaze_log(d / "gaze.jsonl", session_id),
            rect_events=read_viewport_log(d / "viewport.jsonl"),
            layout=read_layout(d / "layout.json"),
            condition=Condition(condition),
        )
        self._bundles[session_id] = bundle
        return bundle

    def bundle(self, session_id: str) -> SessionBundle:
        entry = self._require(session_id)
        return self._load_bundle(
            session_id,
            entry.get("participant_id", session_id),
            entry.get("condition", "instructed"),
        )

    def _warm_fixations(self, session_id: str) -> int:
        """Pipeline job: compute and cache fixations. Retries once."""
        try:
            return len(self.fixations(session_id))
        except Exception:
            return len(self.fixations(session_id))

    def wait_ready(self, session_id: str) -> None:
        job: Optional[Future] = self._jobs.get(session_id)
        if job is not None:
            job.result()

    # -- derived events ----------------------------------------------------

    def fixations(self, session_id: str) -> list:
        self._require(session_id)
        cache = self.root / session_id / "fixations.json"
        lock = self._lock(session_id)
        with lock.read():
            if cache.exists():
                doc = json.loads(cache.read_text(encoding="utf-8"))
                if doc.get("schema_version") != SCHEMA_VERSION:
                    raise SchemaMismatch("fixation cache schema mismatch")
                return [Fixation.from_dict(x) for x in doc["fixations"]]
        bundle = self.bundle(session_id)
        fixations = detect_fixations(project_stream(bundle), self.filter_config)
        with lock.write():
            atomic_write_bytes(
                cache,
                json.dumps(
                    {
                        "schema_version": SCHEMA_VERSION,
                        "fixations": [f.to_dict() for f in fixations],
                    },
                    sort_keys=True,
                ).encode("utf-8"),
            )
        return list(fixations)

    def saccades(self, session_id: str) -> list:
        bundle = self.bundle(session_id)
        return derive_saccades(self.fixations(session_id), bundle.layout)

    # -- segments ----------------------------------------------------------

    def _read_segments_envelope(self, session_id: str) -> dict:
        path = self.root / session_id / "segments.json"
        if not path.exists():
            return {"next_id": 1, "segments": []}
        doc = json.loads(path.read_text(encoding="utf-8"))
        if isinstance(doc, list):
            # Plain segment list (synthesis output): adopt ids in time order.
            rows = [
                {"segment_id": f"g{i + 1:04d}", **seg}
                for i, seg in enumerate(sorted(doc, key=lambda s: s["start_ms"]))
            ]
            return {"next_id": len(rows) + 1, "segments": rows}
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise SchemaMismatch("segments file schema mismatch")
        return {"next_id": doc["next_id"], "segments": doc["segments"]}

    def _write_segments_envelope(self, session_id: str, envelope: dict) -> None:
        rows = sorted(envelope["segments"], key=lambda s: s["start_ms"])
        payload = {
            "schema_version": SCHEMA_VERSION,
            "next_id": envelope["next_id"],
            "segments": rows,
        }
        atomic_write_bytes(
            self.root / session_id / "segments.json",
            json.dumps(payload, sort_keys=True, indent=1).encode("utf-8"),
            fault=self.fault_hook,
        )

    def segments(self, session_id: str) -> list:
        """[(segment_id, Segment)] in time order."""
        self._require(session_id)
        with self._lock(session_id).read():
            envelope = self._read_segments_envelope(session_id)
        out = []
        for row in sorted(envelope["segments"], key=lambda s: s["start_ms"]):
            data = {k: v for k, v in row.items() if k != "segment_id"}
            out.append((row["segment_id"], Segment.from_dict(data)))
        return out

    def _mutate_segments(self, session_id: str, mutate: Callable[[dict], object]):
        """Run read-modify-write on the envelope under the write lock."""
        self._require(session_id)
        with self._lock(session_id).write():
            envelope = self._read_segments_envelope(session_id)
            result = mutate(envelope)
            segments = [
                Segment.from_dict({k: v for k, v in row.items() if k != "segment_id"})
                for row in envelope["segments"]
            ]
            validate_segments(segments)
            self._write_segments_envelope(session_id, envelope)
        return result

    def _measured(self, session_id: str, segment: Segment) -> Segment:
        """Recompute words covered and reading rate for a segment."""
        fixations = self.fixations(session_id)
        layout = self.bundle(session_id).layout
        rate, covered = wpm(segment, fixations, layout)
        return replace(segment, wpm=rate, words_covered=covered)

    @staticmethod
    def _find(envelope: dict, segment_id: str) -> dict:
        for row in envelope["segments"]:
            if row["segment_id"] == segment_id:
                return row
        raise UnknownId(f"unknown segment {segment_id!r}")

    def add_segment(self, session_id: str, start_ms: float, end_ms: float):
        """Create an unlabeled segment; rejects overlap with any existing one."""
        segment = self._measured(
            session_id, Segment(start_ms=float(start_ms), end_ms=float(end_ms))
        )

        def mutate(envelope: dict):
            for row in envelope["segments"]:
                present = Segment.from_dict(
                    {k: v for k, v in row.items() if k != "segment_id"}
                )
                if segment.overlaps(present):
                    raise SegmentOverlap(
                        f"[{segment.start_ms}, {segment.end_ms}) overlaps "
                        f"[{present.start_ms}, {present.end_ms})"
                    )
            seg_id = f"s{envelope['next_id']:04d}"
            envelope["next_id"] += 1
            envelope["segments"].append({"segment_id": seg_id, **segment.to_dict()})
            return seg_id, segment

        return self._mutate_segments(session_id, mutate)

    def set_label(
        self, session_id: str, segment_id: str, which: str, label: BehaviorLabel
    ):
        """Record one reviewer's label; finalized segments are immutable."""
        if which not in ("r1", "r2"):
            raise ValueError(f"reviewer slot must be r1 or r2, got {which!r}")

        def mutate(envelope: dict):
            row = self._find(envelope, segment_id)
            if row.get("label_final"):
                raise ProtocolViolation(
                    f"segment {segment_id!r} already has a final label"
                )
            row[f"label_{which}"] = label.value
            return Segment.from_dict({k: v for k, v in row.items() if k != "segment_id"})

        return self._mutate_segments(session_id, mutate)

    def set_final(
        self,
        session_id: str,
        segment_id: str,
        label: BehaviorLabel,
        override: bool = False,
        justification: str = "",
    ):
        """Resolve a segment's final label.

        Allowed only once both reviewer labels exist, or with an explicit
        override accompanied by a justification.
        """

        def mutate(envelope: dict):
            row = self._find(envelope, segment_id)
            both = bool(row.get("label_r1")) and bool(row.get("label_r2"))
            if not both:
                if not override:
                    raise ProtocolViolation(
                        "final label needs both reviewer labels or an override"
                    )
                if not justification.strip():
                    raise ProtocolViolation("override requires a justification")
            row["label_final"] = label.value
            row["final_override"] = bool(override and not both)
            row["override_note"] = justification if override and not both else ""
            return Segment.from_dict({k: v for k, v in row.items() if k != "segment_id"})

        return self._mutate_segments(session_id, mutate)

    def split_segment(self, session_id: str, segment_id: str, t_ms: float):
        """Split a segment at t_ms; both halves lose all labels."""
        # Measurement inputs are gathered before taking the write lock.
        fixations = self.fixations(session_id)
        layout = self.bundle(session_id).layout

        def mutate(envelope: dict):
            row = self._find(envelope, segment_id)
            if not (row["start_ms"] < t_ms < row["end_ms"]):
                raise ValueError(
                    f"split point {t_ms} outside ({row['start_ms']}, {row['end_ms']})"
                )
            envelope["segments"].remove(row)
            halves = []
            for lo, hi in ((row["start_ms"], t_ms), (t_ms, row["end_ms"])):
                seg = Segment(start_ms=lo, end_ms=hi)
                rate, covered = wpm(seg, fixations, layout)
                seg = replace(seg, wpm=rate, words_covered=covered)
                seg_id = f"s{envelope['next_id']:04d}"
                envelope["next_id"] += 1
                envelope["segments"].append({"segment_id": seg_id, **seg.to_dict()})
                halves.append((seg_id, seg))
            return halves

        return self._mutate_segments(session_id, mutate)

    # -- agreement ---------------------------------------------------------

    def irr(self, session_id: str) -> dict:
        """Cohen's kappa over dual-labeled segments plus the disagreements."""
        rows = self.segments(session_id)
        dual = [(sid, s) for sid, s in rows if s.label_r1 and s.label_r2]
        disagreements = [
            {
                "segment_id": sid,
                "start_ms": s.start_ms,
                "end_ms": s.end_ms,
                "label_r1": s.label_r1.value,
                "label_r2": s.label_r2.value,
            }
            for sid, s in dual
            if s.label_r1 is not s.label_r2
        ]
        kappa = None
        if dual:
            kappa = cohens_kappa(
                [s.label_r1.value for _, s in dual],
                [s.label_r2.value for _, s in dual],
            )
        return {
            "session_id": session_id,
            "n_segments": len(rows),
            "n_dual_labeled": len(dual),
            "kappa": kappa,
            "disagreements": disagreements,
        }

    # -- predictions -------------------------------------------------------

    def model_names(self) -> list:
        d = self.root / "models"
        if not d.is_dir():
            return []
        return sorted(p.stem for p in d.glob("*.rgzc"))

    def register_model(self, name: str, checkpoint: bytes) -> None:
        d = self.root / "models"
        d.mkdir(parents=True, exist_ok=True)
        atomic_write_bytes(d / f"{name}.rgzc", checkpoint)

    def predictions(self, session_id: str, model: str) -> list:
        """Per-fixation predicted-label timeline, cached per model."""
        self._require(session_id)
        if model not in self.model_names():
            raise UnknownId(f"unknown model {model!r}")
        cache_dir = self.root / session_id / "predictions"
        cache = cache_dir / f"{model}.json"
        if cache.exists():
            doc = json.loads(cache.read_text(encoding="utf-8"))
            if doc.get("schema_version") == SCHEMA_VERSION:
                return doc["timeline"]
        params = load_checkpoint(self.root / "models" / f"{model}.rgzc")
        fixations = self.fixations(session_id)
        timeline = [
            {
                "fixation_index": p.fixation_index,
                "t_ms": fixations[p.fixation_index].mid_ms,
                "label": p.label.value,
                "probabilities": [float(v) for v in p.probabilities],
            }
            for p in predict_stream(params, fixations, MODEL_RENDER)
        ]
        cache_dir.mkdir(parents=True, exist_ok=True)
        atomic_write_bytes(
            cache,
            json.dumps(
                {"schema_version": SCHEMA_VERSION, "timeline": timeline},
                sort_keys=True,
            ).encode("utf-8"),
        )
        return timeline

    # -- export ------------------------------------------------------------

    def export_annotation_table(self, session_id: str) -> str:
        """Delimited annotation table, one row per segment in time order."""
        rows = ["start\tend\tlabel_r1\tlabel_r2\tlabel_final\twords_covered\twpm"]
        for _, seg in self.segments(session_id):
            rows.append(
                "\t".join(
                    [
                        format_mmss(seg.start_ms),
                        format_mmss(seg.end_ms),
                        seg.label_r1.value if seg.label_r1 else "",
                        seg.label_r2.value if seg.label_r2 else "",
                        seg.label_final.value if seg.label_final else "",
                        str(seg.words_covered),
                        f"{seg.wpm:.2f}",
                    ]
                )
            )
        return "\n".join(rows) + "\n"

    def close(self) -> None:
        self._pipeline.shutdown(wait=True)


def format_mmss(t_ms: float) -> str:
    """Millisecond timestamp as m:ss (seconds floor-rounded)."""
    seconds = int(t_ms // 1000)
    return f"{seconds // 60}:{seconds % 60:02d}"
