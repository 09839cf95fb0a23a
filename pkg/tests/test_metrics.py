"""Feature computation against a naive reference implementation."""

import math

import numpy as np
import pytest

from readgaze.core import (
    BehaviorLabel,
    DocumentLayout,
    Fixation,
    PageLayout,
    PagePoint,
    Saccade,
    SaccadeClass,
    Segment,
)
from readgaze.errors import NoDirectionalSaccades, ZeroDuration
from readgaze.metrics import (
    DISPERSION_EPS_CM,
    FEATURE_NAMES,
    FeatureVector,
    fbsr,
    feature_matrix,
    segment_features,
    to_cm,
    window_features,
    wpm,
)
from readgaze.oculomotor import covered_word_ids, derive_saccades

from .conftest import grid_layout


def fix_at(x, y, start, dur=150.0, page=0):
    return Fixation(
        start_ms=start,
        end_ms=start + dur,
        centroid=PagePoint(page, x, y, start + dur / 2),
        sample_count=9,
    )


def sacc(i, cls, fx):
    a, b = fx[i].centroid, fx[i + 1].centroid
    return Saccade(from_idx=i, to_idx=i + 1, dx=b.x - a.x, dy=b.y - a.y, direction_class=cls)


# ---------------------------------------------------------------------------
# Naive reference: recompute every feature definition from first principles,
# in a different code shape (pure Python loops, no numpy).
# ---------------------------------------------------------------------------

def reference_features(fixations, saccades, layout, t0, t1):
    sel_idx = [i for i, f in enumerate(fixations) if f.start_ms >= t0 and f.end_ms < t1]
    if not sel_idx:
        return {name: 0.0 for name in FEATURE_NAMES}
    page = layout.pages[0]
    W, H = page.width_cm, page.height_cm
    pts = [(fixations[i].centroid.x * W, fixations[i].centroid.y * H) for i in sel_idx]
    durs = [fixations[i].end_ms - fixations[i].start_ms for i in sel_idx]

    mx = sum(p[0] for p in pts) / len(pts)
    my = sum(p[1] for p in pts) / len(pts)
    disp = sum(math.hypot(p[0] - mx, p[1] - my) for p in pts) / len(pts)

    scan = sum(
        math.hypot(pts[k + 1][0] - pts[k][0], pts[k + 1][1] - pts[k][1])
        for k in range(len(pts) - 1)
    )

    sel_set = set(sel_idx)
    kept = [s for s in saccades if s.from_idx in sel_set and s.to_idx in sel_set]
    if kept:
        amps = []
        for s in kept:
            a, b = fixations[s.from_idx].centroid, fixations[s.to_idx].centroid
            amps.append(math.hypot((b.x - a.x) * W, (b.y - a.y) * H))
        mean_sacc = sum(amps) / len(amps)
        n = len(kept)
        counts = {}
        for s in kept:
            counts[s.direction_class] = counts.get(s.direction_class, 0) + 1
        rate_vn = counts.get(SaccadeClass.VERTICAL_NEXT, 0) / n
        rate_hl = counts.get(SaccadeClass.HORIZONTAL_LATER, 0) / n
        rate_lr = counts.get(SaccadeClass.LINE_REGRESSION, 0) / n
        rate_r = counts.get(SaccadeClass.REGRESSION, 0) / n
        fwd = sum(
            counts.get(c, 0)
            for c in (
                SaccadeClass.FORWARD,
                SaccadeClass.LINE_FORWARD,
                SaccadeClass.VERTICAL_NEXT,
                SaccadeClass.HORIZONTAL_LATER,
            )
        )
        back = counts.get(SaccadeClass.REGRESSION, 0) + counts.get(
            SaccadeClass.LINE_REGRESSION, 0
        )
        ratio = fwd / (fwd + back) if fwd + back else 0.0
    else:
        mean_sacc = rate_vn = rate_hl = rate_lr = rate_r = ratio = 0.0

    covered = covered_word_ids([fixations[i] for i in sel_idx], layout)
    return {
        "fixation_count": float(len(sel_idx)),
        "mean_fixation_duration_ms": sum(durs) / len(durs),
        "fixation_dispersion": disp,
        "mean_saccade_length": mean_sacc,
        "rate_vertical_next": rate_vn,
        "rate_horizontal_later": rate_hl,
        "rate_line_regression": rate_lr,
        "rate_regression": rate_r,
        "wpm": len(covered) / ((t1 - t0) / 60000.0),
        "inverse_dispersion": 1.0 / max(disp, DISPERSION_EPS_CM),
        "scanpath_length_cm": scan,
        "fbsr": ratio,
    }


class TestWindowFeatures:
    def test_square_corner_dispersion(self):
        # Four centroids at the corners of a square whose half-diagonal is
        # sqrt(2) cm: mean radial distance from the centroid is sqrt(2).
        layout = DocumentLayout(
            pages=(PageLayout(page_index=0, width_cm=10.0, height_cm=10.0),)
        )
        # square of side 2 cm centered at (5, 5) cm -> page units /10
        corners = [(4, 4), (4, 6), (6, 4), (6, 6)]
        fx = [fix_at(cx / 10.0, cy / 10.0, i * 300.0) for i, (cx, cy) in enumerate(corners)]
        vec = window_features(fx, [], layout, 0.0, 2000.0)
        assert vec.fixation_dispersion == pytest.approx(math.sqrt(2.0), abs=1e-12)

    def test_three_four_five_scanpath(self):
        layout = DocumentLayout(
            pages=(PageLayout(page_index=0, width_cm=10.0, height_cm=10.0),)
        )
        fx = [fix_at(0.0, 0.0, 0.0), fix_at(0.3, 0.4, 300.0)]  # 3 cm, 4 cm apart
        vec = window_features(fx, [], layout, 0.0, 1000.0)
        assert vec.scanpath_length_cm == pytest.approx(5.0, abs=1e-12)

    def test_empty_window_all_zero(self, layout):
        vec = window_features([], [], layout, 0.0, 5000.0)
        assert vec == FeatureVector()
        assert vec.fixation_count == 0

    def test_zero_duration_window_rejected(self, layout):
        with pytest.raises(ZeroDuration):
            window_features([], [], layout, 100.0, 100.0)

    def test_thousand_random_windows_match_reference(self, layout, rng):
        # one long synthetic fixation/saccade stream, many random windows
        fx = []
        t = 0.0
        for _ in range(400):
            fx.append(
                fix_at(
                    float(rng.uniform(0.05, 0.95)),
                    float(rng.uniform(0.05, 0.95)),
                    t,
                    dur=float(rng.uniform(80, 500)),
                )
            )
            t = fx[-1].end_ms + float(rng.uniform(10, 80))
        saccades = derive_saccades(fx, layout)
        total = fx[-1].end_ms
        for _ in range(1000):
            t0 = float(rng.uniform(0, total - 2000))
            t1 = t0 + float(rng.uniform(500, 15000))
            vec = window_features(fx, saccades, layout, t0, t1)
            ref = reference_features(fx, saccades, layout, t0, t1)
            got = vec.to_dict()
            for name in FEATURE_NAMES:
                assert got[name] == pytest.approx(ref[name], abs=1e-9), name

    def test_rates_bounded_and_numerators_bounded(self, layout, rng):
        fx = [
            fix_at(float(rng.uniform(0.1, 0.9)), float(rng.uniform(0.1, 0.9)), i * 250.0)
            for i in range(60)
        ]
        saccades = derive_saccades(fx, layout)
        vec = window_features(fx, saccades, layout, 0.0, fx[-1].end_ms + 1.0)
        n_sacc = len(saccades)
        for r in (
            vec.rate_vertical_next,
            vec.rate_horizontal_later,
            vec.rate_line_regression,
            vec.rate_regression,
            vec.fbsr,
        ):
            assert 0.0 <= r <= 1.0
        numer = (
            vec.rate_vertical_next
            + vec.rate_horizontal_later
            + vec.rate_line_regression
            + vec.rate_regression
        ) * n_sacc
        assert numer <= n_sacc + 1e-9

    def test_time_translation_invariance(self, layout, rng):
        fx = [
            fix_at(float(rng.uniform(0.1, 0.9)), float(rng.uniform(0.1, 0.9)), i * 250.0)
            for i in range(30)
        ]
        saccades = derive_saccades(fx, layout)
        vec0 = window_features(fx, saccades, layout, 0.0, 8000.0)
        shift = 12345.0
        fx_shifted = [
            Fixation(
                f.start_ms + shift,
                f.end_ms + shift,
                PagePoint(f.centroid.page_index, f.centroid.x, f.centroid.y, f.centroid.t_ms + shift),
                f.sample_count,
            )
            for f in fx
        ]
        vec1 = window_features(fx_shifted, saccades, layout, shift, 8000.0 + shift)
        assert np.allclose(vec0.to_array(), vec1.to_array(), atol=1e-9)

    def test_inverse_dispersion_monotone(self):
        layout = DocumentLayout(
            pages=(PageLayout(page_index=0, width_cm=10.0, height_cm=10.0),)
        )
        vals = []
        for spread in (0.01, 0.05, 0.1, 0.2):
            fx = [
                fix_at(0.5 - spread, 0.5, 0.0),
                fix_at(0.5 + spread, 0.5, 300.0),
            ]
            vec = window_features(fx, [], layout, 0.0, 1000.0)
            vals.append(vec.inverse_dispersion)
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_disjoint_windows_fixation_count_additive(self, layout, rng):
        fx = [
            fix_at(float(rng.uniform(0.1, 0.9)), float(rng.uniform(0.1, 0.9)), i * 250.0)
            for i in range(40)
        ]
        saccades = derive_saccades(fx, layout)
        a = window_features(fx, saccades, layout, 0.0, 5000.0)
        b = window_features(fx, saccades, layout, 5000.0, 10000.0)
        both = window_features(fx, saccades, layout, 0.0, 10000.0)
        assert a.fixation_count + b.fixation_count == both.fixation_count
        # scanpath gains only the junction hop between the two windows
        assert both.scanpath_length_cm >= a.scanpath_length_cm + b.scanpath_length_cm - 1e-9


class TestFbsr:
    def test_two_forward_one_regression(self):
        fx = [fix_at(0.1 * i, 0.5, i * 200.0) for i in range(4)]
        s = [
            sacc(0, SaccadeClass.FORWARD, fx),
            sacc(1, SaccadeClass.FORWARD, fx),
            sacc(2, SaccadeClass.REGRESSION, fx),
        ]
        assert fbsr(s) == pytest.approx(2.0 / 3.0)

    def test_all_forward_is_one(self):
        fx = [fix_at(0.1 * i, 0.5, i * 200.0) for i in range(3)]
        s = [sacc(0, SaccadeClass.FORWARD, fx), sacc(1, SaccadeClass.LINE_FORWARD, fx)]
        assert fbsr(s) == 1.0

    def test_forward_types_counted(self):
        fx = [fix_at(0.1 * i, 0.5, i * 200.0) for i in range(5)]
        s = [
            sacc(0, SaccadeClass.VERTICAL_NEXT, fx),
            sacc(1, SaccadeClass.HORIZONTAL_LATER, fx),
            sacc(2, SaccadeClass.LINE_REGRESSION, fx),
            sacc(3, SaccadeClass.REGRESSION, fx),
        ]
        assert fbsr(s) == pytest.approx(0.5)

    def test_neutral_only_raises(self):
        fx = [fix_at(0.5, 0.5, 0.0), fix_at(0.5, 0.5, 200.0)]
        with pytest.raises(NoDirectionalSaccades):
            fbsr([sacc(0, SaccadeClass.NEUTRAL, fx)])


class TestWpm:
    def test_unit_rate(self, layout):
        # 60 distinct words over 60 s -> 60 WPM
        words = layout.pages[0].words[:60]
        fx = [fix_at(w.cx, w.cy, i * 990.0, dur=500.0) for i, w in enumerate(words)]
        seg = Segment(start_ms=0.0, end_ms=60000.0)
        rate, covered = wpm(seg, fx, layout)
        assert covered == 60
        assert rate == pytest.approx(60.0)

    def test_skim_rate_two_decimals(self, layout):
        # 25 distinct words over 8.4 s -> 178.57 WPM at 2 d.p.
        words = layout.pages[0].words[:25]
        fx = [fix_at(w.cx, w.cy, i * 330.0, dur=150.0) for i, w in enumerate(words)]
        seg = Segment(start_ms=0.0, end_ms=8400.0)
        rate, covered = wpm(seg, fx, layout)
        assert covered == 25
        assert round(rate, 2) == 178.57

    def test_repeated_word_counts_once(self, layout):
        w = layout.pages[0].words[0]
        fx = [fix_at(w.cx, w.cy, i * 400.0, dur=200.0) for i in range(20)]
        seg = Segment(start_ms=0.0, end_ms=10000.0)
        rate, covered = wpm(seg, fx, layout)
        assert covered == 1
        assert rate == pytest.approx(6.0)

    def test_zero_duration_rejected(self, layout):
        with pytest.raises(ValueError):
            Segment(start_ms=0.0, end_ms=0.0)


class TestSegmentFeatures:
    def test_single_fixation_degenerate(self, layout):
        fx = [fix_at(0.5, 0.5, 100.0)]
        seg = Segment(start_ms=0.0, end_ms=1000.0)
        vec, summary = segment_features(seg, fx, [], layout)
        assert vec.scanpath_length_cm == 0.0
        assert vec.mean_saccade_length == 0.0
        assert summary["fixation_count"] == 1
        assert summary["duration_s"] == 1.0

    def test_summary_median_duration(self, layout):
        fx = [
            fix_at(0.3, 0.3, 0.0, dur=100.0),
            fix_at(0.4, 0.3, 200.0, dur=300.0),
            fix_at(0.5, 0.3, 600.0, dur=200.0),
        ]
        seg = Segment(start_ms=0.0, end_ms=1000.0)
        _, summary = segment_features(seg, fx, [], layout)
        assert summary["median_fixation_duration_ms"] == 200.0


class TestFeatureMatrix:
    def test_stacking_order(self):
        a = FeatureVector(fixation_count=3, wpm=120.0)
        b = FeatureVector(fixation_count=5, fbsr=0.8)
        m = feature_matrix([a, b])
        assert m.shape == (2, len(FEATURE_NAMES))
        assert m[0, FEATURE_NAMES.index("fixation_count")] == 3
        assert m[1, FEATURE_NAMES.index("fbsr")] == 0.8

    def test_round_trip_dict(self):
        v = FeatureVector(fixation_count=7, wpm=99.5, fbsr=0.25)
        assert FeatureVector.from_dict(v.to_dict()) == v
