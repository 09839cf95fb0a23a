"""Projection arithmetic, stream projection, and raw log readers."""

import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from readgaze.core import DocumentLayout, GazeSample, PagePoint, PageRect
from readgaze.errors import NoViewport
from readgaze.ingest import (
    Condition,
    RectTrack,
    SessionBundle,
    load_bundle,
    project_stream,
    project_to_pcs,
    read_gaze_log,
    read_viewport_log,
    unproject,
)

from .conftest import grid_layout

RECT = PageRect(page_index=0, l=100.0, t=200.0, w=800.0, h=1000.0)


class TestProjectToPcs:
    def test_rect_origin_maps_to_zero(self):
        p = project_to_pcs(GazeSample(t_ms=0.0, sx=100.0, sy=200.0), RECT)
        assert (p.x, p.y) == (0.0, 0.0)

    def test_rect_midpoint(self):
        p = project_to_pcs(GazeSample(t_ms=0.0, sx=500.0, sy=700.0), RECT)
        assert (p.x, p.y) == (0.5, 0.5)

    def test_point_left_and_above_rect_is_off_page(self):
        p = project_to_pcs(GazeSample(t_ms=0.0, sx=50.0, sy=100.0), RECT)
        assert p.x == pytest.approx(-0.0625, abs=0)
        assert p.y == pytest.approx(-0.1, abs=0)
        assert p.off_page

    def test_page_index_and_time_carried(self):
        r = PageRect(page_index=3, l=0, t=0, w=10, h=10, t_ms=0.0)
        p = project_to_pcs(GazeSample(t_ms=42.0, sx=5.0, sy=5.0), r)
        assert p.page_index == 3
        assert p.t_ms == 42.0


class TestUnproject:
    def test_origin(self):
        s = unproject(PagePoint(page_index=0, x=0.0, y=0.0, t_ms=0.0), RECT)
        assert (s.sx, s.sy) == (100.0, 200.0)

    def test_corner(self):
        s = unproject(PagePoint(page_index=0, x=1.0, y=1.0, t_ms=0.0), RECT)
        assert (s.sx, s.sy) == (900.0, 1200.0)

    def test_round_trip_random_points(self):
        rng = np.random.default_rng(7)
        for _ in range(10_000):
            p = PagePoint(
                page_index=0,
                x=float(rng.uniform(-0.2, 1.2)),
                y=float(rng.uniform(-0.2, 1.2)),
                t_ms=0.0,
            )
            back = project_to_pcs(unproject(p, RECT), RECT)
            assert abs(back.x - p.x) < 1e-9
            assert abs(back.y - p.y) < 1e-9


@given(
    l=st.floats(-5000, 5000),
    t=st.floats(-5000, 5000),
    w=st.floats(1, 4000),
    h=st.floats(1, 4000),
    sx=st.floats(-6000, 6000),
    sy=st.floats(-6000, 6000),
    scale=st.floats(0.01, 100),
)
def test_projection_resolution_invariant(l, t, w, h, sx, sy, scale):
    """Scaling screen space leaves page coordinates unchanged."""
    rect = PageRect(page_index=0, l=l, t=t, w=w, h=h)
    scaled = PageRect(page_index=0, l=l * scale, t=t * scale, w=w * scale, h=h * scale)
    p = project_to_pcs(GazeSample(t_ms=0.0, sx=sx, sy=sy), rect)
    q = project_to_pcs(GazeSample(t_ms=0.0, sx=sx * scale, sy=sy * scale), scaled)
    assert abs(p.x - q.x) <= 1e-12 * max(1.0, abs(p.x))
    assert abs(p.y - q.y) <= 1e-12 * max(1.0, abs(p.y))


class TestRectTrack:
    def test_last_at_or_before_semantics(self):
        r0 = PageRect(page_index=0, l=0, t=0, w=100, h=100, t_ms=0.0)
        r1 = PageRect(page_index=0, l=0, t=100, w=100, h=100, t_ms=50.0)
        track = RectTrack([r1, r0])  # construction sorts by time
        assert track.at(0.0) is r0
        assert track.at(49.999) is r0
        assert track.at(50.0) is r1
        assert track.at(1e9) is r1

    def test_sample_before_all_rects_raises(self):
        track = RectTrack([PageRect(page_index=0, l=0, t=0, w=1, h=1, t_ms=10.0)])
        with pytest.raises(NoViewport):
            track.at(9.999)


def _bundle(samples, rects):
    return SessionBundle(
        session_id="s",
        participant_id="p",
        samples=tuple(samples),
        rect_events=tuple(rects),
        layout=DocumentLayout.empty(),
    )


class TestProjectStream:
    def test_static_rect_projects_all(self):
        samples = [GazeSample(t_ms=t, sx=500.0, sy=700.0) for t in (0.0, 16.7, 33.3)]
        rect = PageRect(page_index=0, l=100, t=200, w=800, h=1000, t_ms=0.0)
        pts = project_stream(_bundle(samples, [rect]))
        assert len(pts) == 3
        assert all((p.x, p.y) == (0.5, 0.5) for p in pts)

    def test_scroll_shifts_later_points(self):
        # The page element moves up 100 px mid-stream; later samples land
        # 100/h further down the page than the un-scrolled projection.
        h = 1000.0
        r0 = PageRect(page_index=0, l=100, t=200, w=800, h=h, t_ms=0.0)
        r1 = PageRect(page_index=0, l=100, t=100, w=800, h=h, t_ms=50.0)
        samples = [GazeSample(t_ms=t, sx=500.0, sy=700.0) for t in (0.0, 100.0)]
        pts = project_stream(_bundle(samples, [r0, r1]))
        by_hand_before = (700.0 - 200.0) / h
        by_hand_after = (700.0 - 100.0) / h
        assert pts[0].y == pytest.approx(by_hand_before, abs=1e-15)
        assert pts[1].y == pytest.approx(by_hand_after, abs=1e-15)
        assert pts[1].y - pts[0].y == pytest.approx(100.0 / h, abs=1e-12)

    def test_invalid_samples_omitted(self):
        samples = [
            GazeSample(t_ms=float(i), sx=1.0, sy=1.0, valid=(i != 4)) for i in range(10)
        ]
        rect = PageRect(page_index=0, l=0, t=0, w=10, h=10, t_ms=0.0)
        assert len(project_stream(_bundle(samples, [rect]))) == 9

    def test_valid_sample_before_first_rect_is_error(self):
        samples = [GazeSample(t_ms=0.0, sx=1.0, sy=1.0)]
        rect = PageRect(page_index=0, l=0, t=0, w=10, h=10, t_ms=5.0)
        with pytest.raises(NoViewport):
            project_stream(_bundle(samples, [rect]))

    def test_invalid_sample_before_first_rect_is_fine(self):
        samples = [
            GazeSample(t_ms=0.0, sx=1.0, sy=1.0, valid=False),
            GazeSample(t_ms=6.0, sx=1.0, sy=1.0),
        ]
        rect = PageRect(page_index=0, l=0, t=0, w=10, h=10, t_ms=5.0)
        assert len(project_stream(_bundle(samples, [rect]))) == 1

    def test_order_preserving(self):
        samples = [GazeSample(t_ms=float(i) * 16.7, sx=float(i), sy=0.0) for i in range(50)]
        rect = PageRect(page_index=0, l=0, t=0, w=100, h=100, t_ms=0.0)
        pts = project_stream(_bundle(samples, [rect]))
        assert [p.t_ms for p in pts] == [s.t_ms for s in samples]


class TestLogReaders:
    def test_delimited_gaze_log_with_header(self, tmp_path):
        path = tmp_path / "gaze.csv"
        path.write_text("t_ms,sx,sy,valid\n0,10.5,20.5,1\n16.7,11.0,21.0,0\n")
        samples = read_gaze_log(path, "sess")
        assert len(samples) == 2
        assert samples[0] == GazeSample(t_ms=0.0, sx=10.5, sy=20.5, valid=True, session_id="sess")
        assert samples[1].valid is False

    def test_jsonl_gaze_log(self, tmp_path):
        path = tmp_path / "gaze.jsonl"
        rows = [
            {"t_ms": 0.0, "sx": 1.0, "sy": 2.0, "valid": True},
            {"t_ms": 16.7, "sx": 3.0, "sy": 4.0, "valid": False},
        ]
        path.write_text("\n".join(json.dumps(r) for r in rows))
        samples = read_gaze_log(path)
        assert [s.sx for s in samples] == [1.0, 3.0]

    def test_viewport_log_and_bundle(self, tmp_path):
        gaze = tmp_path / "gaze.csv"
        gaze.write_text("0,500,700,1\n")
        vp = tmp_path / "viewport.jsonl"
        vp.write_text(
            json.dumps({"page_index": 0, "l": 100, "t": 200, "w": 800, "h": 1000, "t_ms": 0})
            + "\n"
        )
        lay = tmp_path / "layout.json"
        lay.write_text(json.dumps(grid_layout(2, 3).to_dict()))
        bundle = load_bundle(gaze, vp, lay, session_id="abc", participant_id="p1")
        assert bundle.session_id == "abc"
        assert bundle.condition is Condition.INSTRUCTED
        pts = project_stream(bundle)
        assert (pts[0].x, pts[0].y) == (0.5, 0.5)
        rects = read_viewport_log(vp)
        assert rects[0].w == 800
