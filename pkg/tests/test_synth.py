"""Synthetic corpus generator: archetype fidelity, determinism, round-trips.

The generator is the package's stand-in training corpus, so these tests
hold it to measurable contracts: each archetype's segments must land in
that archetype's rule region when run through the real detection pipeline,
per-behavior medians must sit inside the reference interquartile bands,
and everything must be bit-reproducible from a seed.
"""

import json
from collections import Counter

import numpy as np
import pytest

from readgaze.baseline import classify_rules
from readgaze.core import BehaviorLabel
from readgaze.errors import LayoutTooSmall
from readgaze.ingest import load_bundle, project_stream
from readgaze.metrics import segment_features
from readgaze.oculomotor import FilterConfig, derive_saccades, detect_fixations
from readgaze.stats import t_test_ind
from readgaze.synth import (
    ArchetypeParams,
    SessionSpec,
    default_params,
    generate_corpus,
    generate_segment,
    generate_session,
    make_layout,
    make_participant,
    write_corpus,
)

ALL_LABELS = tuple(BehaviorLabel)

# Reference per-behavior medians with their interquartile ranges:
# (duration_s, fixation_count, scanpath_cm, median_fixation_duration_ms).
MEDIAN_BANDS = {
    BehaviorLabel.STATIC: ((4.98, 2.31), (11, 3), (8.24, 4.92), (467.03, 247.04)),
    BehaviorLabel.DEEP: ((11.61, 6.16), (25, 12.25), (49.74, 35.83), (262.02, 100.46)),
    BehaviorLabel.SEQUENTIAL: ((25.84, 29.15), (63, 80), (141.03, 187.97), (232.55, 51.92)),
    BehaviorLabel.NON_SEQUENTIAL: ((8.68, 9.86), (24, 17.50), (54.66, 72.44), (221.60, 57.67)),
    BehaviorLabel.SKIMMING: ((5.80, 5.30), (10, 11), (30.59, 37.02), (181.67, 47.02)),
    BehaviorLabel.PREVIEWING_MAPPING: ((7.50, 6.55), (8, 12.50), (51.28, 53.01), (208.70, 55.46)),
}


# ---------------------------------------------------------------------------
# Shared corpus run through the full analysis pipeline (generated once).
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def corpus27():
    return generate_corpus(27, seed=0)


@pytest.fixture(scope="module")
def analyzed27(corpus27):
    """(label, FeatureVector, summary, predicted) for every segment, plus
    per-session durations, via the real projection/detection pipeline."""
    layout = make_layout(seed=0)
    cfg = FilterConfig()
    rows = []
    session_seconds = []
    for sess in corpus27:
        pts = project_stream(sess.bundle)
        fixations = detect_fixations(pts, cfg)
        saccades = derive_saccades(fixations, layout)
        session_seconds.append(sess.bundle.duration_ms / 1000.0)
        for seg in sess.segments:
            vec, summary = segment_features(seg, fixations, saccades, layout)
            rows.append((seg.label_final, vec, summary, classify_rules(vec)))
    return rows, session_seconds


# ---------------------------------------------------------------------------
# Default parameters
# ---------------------------------------------------------------------------


class TestDefaultParams:
    def test_static_fixation_duration_median(self):
        assert default_params(BehaviorLabel.STATIC).fixation_duration_ms == pytest.approx(467.03)

    def test_skimming_fixation_duration_median(self):
        assert default_params(BehaviorLabel.SKIMMING).fixation_duration_ms == pytest.approx(181.67)

    def test_deep_fixation_duration_median(self):
        assert default_params(BehaviorLabel.DEEP).fixation_duration_ms == pytest.approx(262.02)

    def test_sequential_fixation_duration_median(self):
        assert default_params(BehaviorLabel.SEQUENTIAL).fixation_duration_ms == pytest.approx(
            232.55
        )

    @pytest.mark.parametrize("label", ALL_LABELS)
    def test_fields_well_formed(self, label):
        p = default_params(label)
        assert p.label is label
        assert 0.0 <= p.sequentiality <= 1.0
        assert p.target_wpm > 0 and p.fixation_duration_ms > 0
        assert p.target_wpm_dispersion >= 0 and p.fixation_duration_dispersion >= 0

    def test_sequential_is_most_ordered(self):
        seq = default_params(BehaviorLabel.SEQUENTIAL).sequentiality
        nonseq = default_params(BehaviorLabel.NON_SEQUENTIAL).sequentiality
        assert seq > nonseq

    def test_rejects_invalid_probability(self):
        good = default_params(BehaviorLabel.SEQUENTIAL)
        with pytest.raises(ValueError):
            ArchetypeParams(
                label=good.label,
                target_wpm=good.target_wpm,
                target_wpm_dispersion=good.target_wpm_dispersion,
                fixation_duration_ms=good.fixation_duration_ms,
                fixation_duration_dispersion=good.fixation_duration_dispersion,
                sequentiality=1.5,
            )


# ---------------------------------------------------------------------------
# Determinism
# ---------------------------------------------------------------------------


class TestDeterminism:
    @pytest.mark.parametrize("label", ALL_LABELS)
    def test_segment_bit_reproducible(self, label):
        layout = make_layout(seed=3)
        params = default_params(label)
        a = generate_segment(params, layout, 8.0, rng_seed=41)
        b = generate_segment(params, layout, 8.0, rng_seed=41)
        assert a == b

    def test_different_seeds_differ(self):
        layout = make_layout(seed=3)
        params = default_params(BehaviorLabel.SEQUENTIAL)
        a = generate_segment(params, layout, 8.0, rng_seed=1)
        b = generate_segment(params, layout, 8.0, rng_seed=2)
        assert a != b

    def test_corpus_byte_identical(self, tmp_path):
        out = []
        for run in ("one", "two"):
            d = tmp_path / run
            write_corpus(generate_corpus(3, seed=77), d)
            blob = b""
            for f in sorted(d.rglob("*")):
                if f.is_file():
                    blob += f.name.encode() + f.read_bytes()
            out.append(blob)
        assert out[0] == out[1]

    def test_participant_perturbations_reproducible(self):
        a = make_participant("p00", 123)
        b = make_participant("p00", 123)
        assert a == b


# ---------------------------------------------------------------------------
# Archetype signatures
# ---------------------------------------------------------------------------


class TestArchetypeSignatures:
    def test_static_wpm_near_zero(self):
        layout = make_layout(seed=5)
        params = default_params(BehaviorLabel.STATIC)
        for seed in range(20):
            _, _, seg = generate_segment(params, layout, 5.0, rng_seed=seed)
            assert seg.wpm <= 5.0

    def test_static_centroids_within_cluster_radius(self):
        layout = make_layout(seed=5)
        params = default_params(BehaviorLabel.STATIC)
        for seed in range(20):
            fixations, _, _ = generate_segment(params, layout, 6.0, rng_seed=seed)
            xs = np.array([f.centroid.x for f in fixations])
            ys = np.array([f.centroid.y for f in fixations])
            d = np.hypot(xs - xs.mean(), ys - ys.mean())
            assert float(d.max()) <= params.cluster_radius

    def test_sequential_lands_in_typical_reading_range(self):
        layout = make_layout(seed=5)
        params = default_params(BehaviorLabel.SEQUENTIAL)
        rates, ratios = [], []
        for seed in range(100):
            fixations, saccades, seg = generate_segment(params, layout, 30.0, rng_seed=seed)
            vec, _ = segment_features(seg, fixations, saccades, layout)
            rates.append(vec.wpm)
            ratios.append(vec.fbsr)
        assert 52.0 <= float(np.median(rates)) < 124.0
        assert float(np.median(ratios)) > 0.8

    def test_forward_backward_ratio_separates_reading_orders(self):
        layout = make_layout(seed=5)
        seq_p = default_params(BehaviorLabel.SEQUENTIAL)
        non_p = default_params(BehaviorLabel.NON_SEQUENTIAL)
        seq_vals, non_vals = [], []
        for seed in range(100):
            fx, sc, seg = generate_segment(seq_p, layout, 12.0, rng_seed=seed)
            vec, _ = segment_features(seg, fx, sc, layout)
            seq_vals.append(vec.fbsr)
            fx, sc, seg = generate_segment(non_p, layout, 12.0, rng_seed=10_000 + seed)
            vec, _ = segment_features(seg, fx, sc, layout)
            non_vals.append(vec.fbsr)
        res = t_test_ind(seq_vals, non_vals)
        assert float(np.mean(seq_vals)) > float(np.mean(non_vals))
        assert res.p_value < 0.001

    def test_deep_rereads_a_line(self):
        layout = make_layout(seed=5)
        page = layout.pages[0]
        wx = np.array([(w.x0 + w.x1) / 2 for w in page.words])
        wy = np.array([(w.y0 + w.y1) / 2 for w in page.words])
        wline = {w.word_id: li.line_id for li in page.lines for w in page.words if w.word_id in li.word_ids}
        ids = np.array([w.word_id for w in page.words])
        params = default_params(BehaviorLabel.DEEP)
        for seed in range(10):
            fixations, _, _ = generate_segment(params, layout, 12.0, rng_seed=seed)
            lines = []
            xs = []
            for f in fixations:
                k = int(np.argmin((wx - f.centroid.x) ** 2 + (wy - f.centroid.y) ** 2))
                lines.append(wline[int(ids[k])])
                xs.append(f.centroid.x)
            # A "pass" over a line starts when gaze enters it, or when it
            # snaps back to the line start while staying on the same line.
            passes = Counter()
            span = max(xs) - min(xs)
            for i, li in enumerate(lines):
                entered = i == 0 or lines[i - 1] != li
                rewound = not entered and xs[i] < xs[i - 1] - 0.5 * span
                if entered or rewound:
                    passes[li] += 1
            assert max(passes.values()) >= 3

    def test_reading_archetypes_need_words(self):
        tiny = make_layout(seed=0, n_lines=2, words_per_line=4)
        for label in (
            BehaviorLabel.DEEP,
            BehaviorLabel.SEQUENTIAL,
            BehaviorLabel.NON_SEQUENTIAL,
            BehaviorLabel.SKIMMING,
        ):
            with pytest.raises(LayoutTooSmall):
                generate_segment(default_params(label), tiny, 8.0, rng_seed=0)

    def test_static_tolerates_tiny_layout(self):
        tiny = make_layout(seed=0, n_lines=2, words_per_line=4)
        fixations, _, _ = generate_segment(
            default_params(BehaviorLabel.STATIC), tiny, 5.0, rng_seed=0
        )
        assert len(fixations) >= 2

    def test_rejects_nonpositive_duration(self):
        layout = make_layout(seed=0)
        with pytest.raises(ValueError):
            generate_segment(default_params(BehaviorLabel.STATIC), layout, 0.0, rng_seed=0)


# ---------------------------------------------------------------------------
# Region consistency at scripted-fixation level
# ---------------------------------------------------------------------------


class TestRegionConsistency:
    @pytest.mark.parametrize("label", ALL_LABELS)
    def test_segments_classify_as_their_archetype(self, label):
        layout = make_layout(seed=7)
        params = default_params(label)
        rng = np.random.default_rng(
            np.random.SeedSequence([99, list(MEDIAN_BANDS).index(label)])
        )
        from readgaze.synth import _DURATION

        med, sigma, floor_s, cap_s = _DURATION[label]
        n = 150
        hits = 0
        for _ in range(n):
            dur = min(cap_s, max(floor_s, med * float(np.exp(sigma * rng.standard_normal()))))
            fx, sc, seg = generate_segment(params, layout, dur, int(rng.integers(0, 2**62)))
            vec, _ = segment_features(seg, fx, sc, layout)
            hits += classify_rules(vec) is label
        assert hits / n >= 0.95


# ---------------------------------------------------------------------------
# Corpus-level statistics through the full pipeline
# ---------------------------------------------------------------------------


class TestCorpusStatistics:
    def test_session_count_and_ids(self, corpus27):
        assert len(corpus27) == 27
        ids = [s.bundle.session_id for s in corpus27]
        assert len(set(ids)) == 27
        participants = {s.bundle.participant_id for s in corpus27}
        assert len(participants) == 27

    def test_total_behaviors_in_band(self, corpus27):
        total = sum(len(s.segments) for s in corpus27)
        assert 334 * 0.75 <= total <= 334 * 1.25

    def test_mean_session_seconds_in_band(self, analyzed27):
        _, session_seconds = analyzed27
        mean_s = float(np.mean(session_seconds))
        assert 282.57 * 0.75 <= mean_s <= 282.57 * 1.25

    def test_sequential_dominates_label_mix(self, corpus27):
        counts = Counter(seg.label_final for s in corpus27 for seg in s.segments)
        seq = counts[BehaviorLabel.SEQUENTIAL]
        assert all(seq > c for lab, c in counts.items() if lab is not BehaviorLabel.SEQUENTIAL)

    def test_detected_segments_classify_consistently(self, analyzed27):
        rows, _ = analyzed27
        hits = Counter()
        totals = Counter()
        for label, _, _, predicted in rows:
            totals[label] += 1
            hits[label] += predicted is label
        for label in ALL_LABELS:
            assert totals[label] > 0
            assert hits[label] / totals[label] >= 0.95

    @pytest.mark.parametrize("label", ALL_LABELS)
    def test_per_behavior_medians_inside_reference_bands(self, analyzed27, label):
        rows, _ = analyzed27
        mine = [r for r in rows if r[0] is label]
        durations = [s["duration_s"] for _, _, s, _ in mine]
        counts = [s["fixation_count"] for _, _, s, _ in mine]
        paths = [s["scanpath_length_cm"] for _, _, s, _ in mine]
        fixdurs = [s["median_fixation_duration_ms"] for _, _, s, _ in mine]
        for values, (center, iqr) in zip(
            (durations, counts, paths, fixdurs), MEDIAN_BANDS[label]
        ):
            got = float(np.median(values))
            assert center - iqr <= got <= center + iqr

    def test_requires_two_participants(self):
        with pytest.raises(ValueError):
            generate_corpus(1, seed=0)


# ---------------------------------------------------------------------------
# Disk round-trip: synthetic output is valid ingest input
# ---------------------------------------------------------------------------


class TestWriteCorpusRoundTrip:
    def test_bundle_files_reload_identically(self, tmp_path):
        corpus = generate_corpus(3, seed=5)
        write_corpus(corpus, tmp_path)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert {m["session_id"] for m in manifest["sessions"]} == {
            s.bundle.session_id for s in corpus
        }
        for sess in corpus:
            d = tmp_path / sess.bundle.session_id
            bundle = load_bundle(
                d / "gaze.jsonl",
                d / "viewport.jsonl",
                d / "layout.json",
                session_id=sess.bundle.session_id,
                participant_id=sess.bundle.participant_id,
            )
            assert bundle.samples == sess.bundle.samples
            assert bundle.rect_events == sess.bundle.rect_events
            assert bundle.layout == sess.bundle.layout

    def test_ground_truth_segments_survive_round_trip(self, tmp_path):
        corpus = generate_corpus(2, seed=6)
        write_corpus(corpus, tmp_path)
        sess = corpus[0]
        raw = json.loads((tmp_path / sess.bundle.session_id / "segments.json").read_text())
        assert len(raw) == len(sess.segments)
        for row, seg in zip(raw, sess.segments):
            assert row["label_final"] == seg.label_final.value
            assert row["start_ms"] == seg.start_ms
            assert row["end_ms"] == seg.end_ms

    def test_session_spec_controls_behavior_count(self):
        layout = make_layout(seed=0)
        participant = make_participant("p00", 9)
        spec = SessionSpec(behaviors_mean=4.0, min_behaviors=3)
        sess = generate_session(participant, spec, layout)
        assert len(sess.segments) >= 3
