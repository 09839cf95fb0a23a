"""Synthetic labeled scanpath generator for the six behavior archetypes.

Each archetype is generated along three measurable continua — velocity
(words per minute), density (inverse dispersion), and sequentiality
(forward-saccade share) — so that the measured features of a generated
segment land in that archetype's declared region of the velocity/density
plane. The generator works in two layers:

1. a *planner* that lays out dwell centers and durations in page space,
2. an *assembler* that turns plans into a 60 Hz raw sample stream
   (with ballistic travel samples and blink dropouts between dwells)
   that the ingest + fixation pipeline re-detects.

Corpus generation is fully seeded and bit-reproducible: every
participant owns an independent generator spawned from the corpus seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import (
    BehaviorLabel,
    DocumentLayout,
    GazeSample,
    Fixation,
    PageLayout,
    PagePoint,
    PageRect,
    Segment,
    TextLine,
    WordBox,
)
from .errors import LayoutTooSmall
from .ingest import Condition, SessionBundle, load_bundle
from .metrics import wpm as measure_wpm
from .oculomotor import derive_saccades

SAMPLE_HZ = 60.0
DT_MS = 1000.0 / SAMPLE_HZ

# Participant-level multiplicative perturbation of archetype medians.
PARTICIPANT_SIGMA = 0.15
# Probability that a session opens with a previewing/mapping behavior.
OPEN_WITH_OVERVIEW_P = 0.5

# Geometry guards, in page units. Dwell centers closer than MIN_HOP
# could merge under the dispersion filter (threshold 0.01); travel
# samples are spaced at least TRAVEL_STEP apart so that no short
# sub-window of a travel path ever satisfies the dispersion criterion.
MIN_HOP = 0.016
TRAVEL_STEP = 0.012
JITTER_CLAMP = 0.0028

_READING_LABELS = frozenset(
    {
        BehaviorLabel.DEEP,
        BehaviorLabel.SEQUENTIAL,
        BehaviorLabel.NON_SEQUENTIAL,
        BehaviorLabel.SKIMMING,
    }
)


@dataclass(frozen=True)
class ArchetypeParams:
    """Generation parameters for one behavior archetype.

    ``target_wpm`` and ``fixation_duration_ms`` are medians of log-normal
    distributions with the paired ``*_dispersion`` giving sigma of the
    underlying normal. ``sequentiality`` is the probability that a
    directed move advances in reading order.
    """

    label: BehaviorLabel
    target_wpm: float
    target_wpm_dispersion: float
    fixation_duration_ms: float
    fixation_duration_dispersion: float
    sequentiality: float
    cluster_radius: float = 0.05  # Static: max centroid distance from cluster center
    reread_passes: int = 3  # Deep: minimum passes over the anchor line
    skip_geometric_mean: float = 2.0  # Skimming: mean words skipped per hop
    page_span: float = 0.9  # PreviewingMapping: vertical fraction of page covered
    jitter_sigma: float = 0.0018  # within-dwell sample scatter, page units

    def __post_init__(self) -> None:
        if not (self.target_wpm > 0 and self.fixation_duration_ms > 0):
            raise ValueError("log-normal medians must be positive")
        if not 0.0 <= self.sequentiality <= 1.0:
            raise ValueError(f"sequentiality must lie in [0, 1], got {self.sequentiality}")
        if not 0.0 <= self.page_span <= 1.0:
            raise ValueError(f"page_span must lie in [0, 1], got {self.page_span}")


# Per-archetype medians. Fixation-duration medians and dispersions are
# fitted to the published per-behavior medians/IQRs (IQR/median =
# 2*sinh(0.6745*sigma) for a log-normal); the participant-level sigma
# 0.15 is subtracted in quadrature so the pooled spread stays on target.
_DEFAULTS: dict = {
    BehaviorLabel.STATIC: ArchetypeParams(
        label=BehaviorLabel.STATIC,
        target_wpm=0.5,
        target_wpm_dispersion=0.30,
        fixation_duration_ms=467.03,
        fixation_duration_dispersion=0.3575,
        sequentiality=1.0,
    ),
    BehaviorLabel.DEEP: ArchetypeParams(
        label=BehaviorLabel.DEEP,
        target_wpm=36.0,
        target_wpm_dispersion=0.08,
        fixation_duration_ms=262.02,
        fixation_duration_dispersion=0.2394,
        sequentiality=0.90,
    ),
    BehaviorLabel.SEQUENTIAL: ArchetypeParams(
        label=BehaviorLabel.SEQUENTIAL,
        target_wpm=83.0,
        target_wpm_dispersion=0.13,
        fixation_duration_ms=232.55,
        fixation_duration_dispersion=0.0691,
        sequentiality=0.95,
    ),
    BehaviorLabel.NON_SEQUENTIAL: ArchetypeParams(
        label=BehaviorLabel.NON_SEQUENTIAL,
        target_wpm=66.0,
        target_wpm_dispersion=0.15,
        fixation_duration_ms=221.60,
        fixation_duration_dispersion=0.1204,
        sequentiality=0.34,
    ),
    BehaviorLabel.SKIMMING: ArchetypeParams(
        label=BehaviorLabel.SKIMMING,
        target_wpm=200.0,
        target_wpm_dispersion=0.12,
        fixation_duration_ms=181.67,
        fixation_duration_dispersion=0.1187,
        sequentiality=0.94,
    ),
    BehaviorLabel.PREVIEWING_MAPPING: ArchetypeParams(
        label=BehaviorLabel.PREVIEWING_MAPPING,
        target_wpm=20.0,
        target_wpm_dispersion=0.40,
        fixation_duration_ms=208.70,
        fixation_duration_dispersion=0.1268,
        sequentiality=0.50,
    ),
}

# Segment-duration log-normals (median seconds, sigma) and the mean
# inter-dwell gap (ms) that spaces dwells so segment duration, dwell
# count, and dwell duration land on their per-behavior targets together.
_DURATION: dict = {
    BehaviorLabel.STATIC: (5.5, 0.3409, 2.0, 14.0),
    BehaviorLabel.DEEP: (11.61, 0.3888, 4.5, 32.0),
    BehaviorLabel.SEQUENTIAL: (25.84, 0.7965, 6.0, 60.0),
    BehaviorLabel.NON_SEQUENTIAL: (8.68, 0.8014, 5.5, 40.0),
    BehaviorLabel.SKIMMING: (4.1, 0.45, 2.6, 8.0),
    BehaviorLabel.PREVIEWING_MAPPING: (7.5, 0.6285, 3.0, 24.0),
}
_GAP_MS: dict = {
    BehaviorLabel.STATIC: 35.0,
    BehaviorLabel.DEEP: 195.0,
    BehaviorLabel.SEQUENTIAL: 177.0,
    BehaviorLabel.NON_SEQUENTIAL: 138.0,
    BehaviorLabel.SKIMMING: 108.0,
    BehaviorLabel.PREVIEWING_MAPPING: 727.0,
}

# Session-mixture weights: sequential dominates, mirroring the corpus
# imbalance; previewing additionally opens sessions half the time.
_MIX_WEIGHTS: dict = {
    BehaviorLabel.SEQUENTIAL: 0.50,
    BehaviorLabel.NON_SEQUENTIAL: 0.16,
    BehaviorLabel.SKIMMING: 0.11,
    BehaviorLabel.PREVIEWING_MAPPING: 0.10,
    BehaviorLabel.DEEP: 0.07,
    BehaviorLabel.STATIC: 0.06,
}
_LABEL_ORDER = tuple(_MIX_WEIGHTS)

BEHAVIORS_PER_SESSION_MEAN = 12.37
_MIN_BEHAVIORS = 3


def default_params(label: BehaviorLabel) -> ArchetypeParams:
    """Declared default generation parameters for one archetype."""
    return _DEFAULTS[label]


def _lognormal(rng: np.random.Generator, median: float, sigma: float) -> float:
    return float(median * math.exp(sigma * rng.standard_normal()))


@dataclass(frozen=True)
class SyntheticParticipant:
    """Per-participant perturbation of the archetype defaults.

    All factors are multiplicative log-normals with sigma
    ``PARTICIPANT_SIGMA`` so leave-one-participant-out folds see
    genuinely different distributions.
    """

    participant_id: str
    seed: int
    wpm_factor: dict
    fixdur_factor: dict
    duration_factor: dict
    grammar: dict
    open_with_overview_p: float = OPEN_WITH_OVERVIEW_P


def make_participant(participant_id: str, seed: int) -> SyntheticParticipant:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))

    def factors() -> dict:
        return {
            lab: float(math.exp(PARTICIPANT_SIGMA * rng.standard_normal()))
            for lab in _LABEL_ORDER
        }

    wpm_f = factors()
    dur_f = factors()
    len_f = factors()
    raw = {
        lab: _MIX_WEIGHTS[lab] * math.exp(0.25 * rng.standard_normal())
        for lab in _LABEL_ORDER
    }
    total = sum(raw.values())
    grammar = {lab: v / total for lab, v in raw.items()}
    return SyntheticParticipant(
        participant_id=participant_id,
        seed=seed,
        wpm_factor=wpm_f,
        fixdur_factor=dur_f,
        duration_factor=len_f,
        grammar=grammar,
    )


def make_layout(seed: int = 0, n_lines: int = 18, words_per_line: int = 9) -> DocumentLayout:
    """A single-page stimulus layout: a jittered grid of word boxes."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0xD0C])))
    margin_x, margin_top = 0.12, 0.08
    usable_w = 1.0 - 2 * margin_x
    pitch_y = (0.90 - margin_top) / n_lines
    slot_w = usable_w / words_per_line
    word_h = 0.020
    words = []
    lines = []
    order = 0
    for li in range(n_lines):
        cy = margin_top + (li + 0.5) * pitch_y
        ids = []
        for wi in range(words_per_line):
            x0 = margin_x + wi * slot_w
            w = slot_w * (0.55 + 0.30 * float(rng.random()))
            words.append(
                WordBox(
                    word_id=order,
                    reading_order=order,
                    text=f"w{order}",
                    x0=round(x0, 6),
                    y0=round(cy - word_h / 2, 6),
                    x1=round(x0 + w, 6),
                    y1=round(cy + word_h / 2, 6),
                )
            )
            ids.append(order)
            order += 1
        lines.append(TextLine(line_id=li, y_center=round(cy, 6), word_ids=tuple(ids)))
    page = PageLayout(page_index=0, words=tuple(words), lines=tuple(lines))
    return DocumentLayout(pages=(page,))


# ---------------------------------------------------------------------------
# Dwell planners (page-space centers for one segment of each archetype)
# ---------------------------------------------------------------------------


def _word_arrays(page: PageLayout) -> "tuple[np.ndarray, np.ndarray, np.ndarray]":
    order = sorted(page.words, key=lambda w: w.reading_order)
    cx = np.array([w.cx for w in order])
    cy = np.array([w.cy for w in order])
    line = np.empty(len(order), dtype=np.int64)
    line_of = {}
    for ln in page.lines:
        for wid in ln.word_ids:
            line_of[wid] = ln.line_id
    for i, w in enumerate(order):
        line[i] = line_of.get(w.word_id, 0)
    return cx, cy, line


def _word_pos(cx: np.ndarray, cy: np.ndarray, idx: int, rng: np.random.Generator) -> "tuple[float, float]":
    return (
        float(cx[idx] + 0.012 * (rng.random() - 0.5)),
        float(cy[idx] + 0.006 * (rng.random() - 0.5)),
    )


def _respace(centers: list) -> list:
    """Nudge any dwell closer than MIN_HOP to its predecessor."""
    out = [centers[0]]
    for x, y in centers[1:]:
        px, py = out[-1]
        d = math.hypot(x - px, y - py)
        if d < MIN_HOP:
            if d == 0.0:
                x += MIN_HOP
            else:
                s = MIN_HOP / d
                x = px + (x - px) * s
                y = py + (y - py) * s
        out.append((x, y))
    return out


def _plan_static(page: PageLayout, n: int, params: ArchetypeParams, rng: np.random.Generator) -> list:
    """A resting cluster parked in page whitespace (no word coverage)."""
    ys = [w.y1 for w in page.words]
    y_lo = (max(ys) if ys else 0.85) + 0.035
    cy = min(0.96, y_lo + 0.01)
    cx = 0.25 + 0.5 * float(rng.random())
    # Hop lengths are drawn in physical space so scanpath length lands on
    # target regardless of page aspect.
    r_x = 0.85 / page.width_cm
    r_y = 0.85 / page.height_cm
    centers = [(cx, cy)]
    for _ in range(n - 1):
        for _attempt in range(40):
            x = cx + r_x * (2.0 * float(rng.random()) - 1.0)
            y = cy + r_y * (2.0 * float(rng.random()) - 1.0)
            px, py = centers[-1]
            if math.hypot(x - px, y - py) >= MIN_HOP:
                break
        centers.append((x, y))
    return centers


def _plan_sequential(
    page: PageLayout, n: int, p_new: float, seq: float, rng: np.random.Generator
) -> list:
    cx, cy, _ = _word_arrays(page)
    n_words = len(cx)
    advance_budget = int(math.ceil(p_new * n * 1.3)) + 4
    start_max = max(0, n_words - advance_budget)
    idx = int(rng.integers(0, start_max + 1))
    p_dir = min(p_new / max(seq, 1e-9), 0.97)
    centers = [_word_pos(cx, cy, idx, rng)]
    frontier = idx
    regressed = False
    for _ in range(n - 1):
        if rng.random() < p_dir:
            if regressed:
                # After re-checking earlier text the reader returns to
                # where they left off, so coverage keeps its pace.
                idx = min(frontier + 1, n_words - 1)
                frontier = idx
                regressed = False
            elif rng.random() < seq:
                idx = min(idx + 1, n_words - 1)
                frontier = max(frontier, idx)
            else:
                idx = max(0, idx - int(rng.integers(1, 6)))
                regressed = True
        centers.append(_word_pos(cx, cy, idx, rng))
    return _respace(centers)


def _plan_nonsequential(
    page: PageLayout, n: int, p_new: float, seq: float, rng: np.random.Generator
) -> list:
    """Hop between a few anchor passages, re-reading their lead words.

    The reader keeps two to four active reading positions ("heads")
    spread over the page and bounces between them, advancing a little at
    each visit.  Jumps mostly target a passage above the current one, so
    the forward/backward saccade balance stays near even.
    """
    cx, cy, line = _word_arrays(page)
    line_ids = sorted(set(int(v) for v in line))
    rows = [np.sort(np.nonzero(line == lid)[0]) for lid in line_ids]
    n_lines = len(rows)
    k = 2 if n < 16 else (3 if n < 40 else 4)
    k = max(2, min(k, 1 + (n_lines - 1) // 3))
    gap = 3 if k == 2 else 2
    base = int(rng.integers(0, max(1, n_lines - gap * (k - 1))))
    heads = []
    for j in range(k):
        row = rows[min(base + gap * j, n_lines - 1)]
        third = row.size // max(k, 1)
        lo = min(j * third, max(0, row.size - 3))
        heads.append(int(row[min(lo + int(rng.integers(0, max(third, 1))), row.size - 1)]))
    p_adv = min(p_new, 0.36)
    p_jump = min(p_adv * (1.0 - seq) / max(seq, 1e-9), 0.97 - p_adv)
    r = k - 1
    idx = heads[r]
    centers = [_word_pos(cx, cy, idx, rng)]
    seen = [idx]
    prev_adv = False
    for _ in range(n - 1):
        # A little progress is usually followed by a check-back, so the
        # advance/jump balance holds even over a handful of dwells.
        a = p_adv * (0.5 if prev_adv else 1.3)
        j = min(p_jump * (1.3 if prev_adv else 0.9), 0.97 - a)
        u = rng.random()
        prev_adv = u < a
        if u < a:
            lid = int(line[heads[r]])
            row = rows[lid]
            pos = int(np.searchsorted(row, heads[r]))
            if pos + 1 < row.size:
                heads[r] = int(row[pos + 1])
            elif lid + 1 < n_lines:
                # The passage continues on the following line.
                heads[r] = int(rows[lid + 1][0])
            idx = heads[r]
        elif u < a + j:
            if rng.random() < 0.85:
                back = [j for j in range(k) if heads[j] < idx]
                if back:
                    r = back[int(rng.integers(0, len(back)))]
                    idx = heads[r]
                else:
                    # Nothing active above: glance back at a word already
                    # read, without disturbing any reading position.
                    behind = [w for w in seen if w < idx]
                    if behind:
                        idx = behind[int(rng.integers(0, len(behind)))]
                    else:
                        r = int(rng.integers(0, k))
                        idx = heads[r]
            else:
                fwd = [j for j in range(k) if heads[j] > idx]
                if fwd:
                    r = fwd[int(rng.integers(0, len(fwd)))]
                    idx = heads[r]
        centers.append(_word_pos(cx, cy, idx, rng))
        if idx not in seen:
            seen.append(idx)
    return _respace(centers)


def _plan_deep(
    page: PageLayout,
    n: int,
    params: ArchetypeParams,
    duration_s: float,
    wpm_t: float,
    rng: np.random.Generator,
) -> list:
    """Repeated passes over a small block of words spanning 1-3 lines."""
    cx, cy, line = _word_arrays(page)
    passes = max(int(params.reread_passes), 3)
    block = int(round(duration_s * wpm_t / 60.0))
    block = max(2, min(block, 15, max(2, n // passes)))
    per_line = min(block, 5)
    n_lines_used = int(math.ceil(block / per_line))
    line_ids = sorted(set(int(v) for v in line))
    l0 = line_ids[int(rng.integers(0, max(1, len(line_ids) - n_lines_used + 1)))]
    first_row = np.nonzero(line == l0)[0]
    start = int(rng.integers(0, max(1, first_row.size - per_line + 1)))
    members: list = []
    for lo in range(n_lines_used):
        row = np.nonzero(line == l0 + lo)[0]
        if row.size == 0:
            continue
        # Later lines reuse line 0's horizontal offset so the block stays
        # a compact rectangle rather than smearing across the full line.
        s = min(start, max(0, row.size - per_line))
        members.extend(int(i) for i in row[s : s + per_line])
    members = members[:block] if len(members) >= 2 else members + members
    centers: list = []
    pos = 0
    while len(centers) < n:
        word = members[pos % len(members)]
        centers.append(_word_pos(cx, cy, word, rng))
        if rng.random() < params.sequentiality:
            pos += 1
    # Guarantee the pass count even when refixations ate the budget: the
    # walk must wrap the block at least `passes` times.
    min_len = passes * len(members)
    while pos < min_len:
        word = members[pos % len(members)]
        centers.append(_word_pos(cx, cy, word, rng))
        pos += 1
    return _respace(centers)


def _plan_skimming(
    page: PageLayout, n: int, params: ArchetypeParams, rng: np.random.Generator
) -> list:
    """Serpentine skip-reading over one section: large hops, alternating
    line direction, confined to a band of lines so the sweep stays dense."""
    cx, cy, line = _word_arrays(page)
    line_ids = sorted(set(int(v) for v in line))
    band_h = min(7, len(line_ids))
    band_lo = int(rng.integers(0, max(1, len(line_ids) - band_h + 1)))
    band = line_ids[band_lo : band_lo + band_h]
    rows = {lid: np.nonzero(line == lid)[0] for lid in band}
    li = 0
    direction = 1
    row = rows[band[li]]
    j = 0 if direction > 0 else row.size - 1
    centers = [_word_pos(cx, cy, int(row[j]), rng)]
    p = 1.0 / max(params.skip_geometric_mean, 1.0)
    while len(centers) < n:
        if rng.random() < params.sequentiality:
            stride = 1 + int(rng.geometric(p))
            j += direction * stride
            if j < 0 or j >= row.size:
                li += 1 + int(rng.random() < 0.35)
                if li >= len(band):
                    li = int(rng.integers(0, 2))
                direction = -direction
                row = rows[band[li]]
                j = 0 if direction > 0 else row.size - 1
        else:
            j = max(0, min(row.size - 1, j - direction))
        centers.append(_word_pos(cx, cy, int(row[j]), rng))
    return _respace(centers)


def _plan_preview(
    page: PageLayout,
    n: int,
    params: ArchetypeParams,
    duration_s: float,
    wpm_t: float,
    rng: np.random.Generator,
) -> list:
    """A full-page reconnaissance zig-zag with few word landings."""
    cx, cy, _ = _word_arrays(page)
    span = params.page_span
    y_lo, y_hi = 0.5 - span / 2, 0.5 + span / 2
    xs_left = 0.08
    xs_right = 0.92
    n_hits = min(n, int(round(wpm_t * duration_s / 60.0)))
    hit_slots = set(rng.choice(n, size=n_hits, replace=False).tolist()) if n_hits > 0 else set()
    centers: list = []
    side = bool(rng.integers(0, 2))
    run_left = 2 + int(rng.random() < 0.34)
    for k in range(n):
        frac = k / max(n - 1, 1)
        y = y_lo + frac * (y_hi - y_lo)
        if run_left == 0:
            side = not side
            run_left = 2 + int(rng.random() < 0.34)
        run_left -= 1
        x = xs_left if side else xs_right
        x += 0.06 * (float(rng.random()) - 0.5)
        if k in hit_slots and len(cx) > 0:
            # Land on the word nearest the sweep point so the glance
            # pattern keeps its page-wide footprint.
            w = int(np.argmin((cx - x) ** 2 + (cy - y) ** 2))
            centers.append(_word_pos(cx, cy, w, rng))
        else:
            centers.append((x, y))
    return _respace(centers)


# ---------------------------------------------------------------------------
# Segment planning and assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SegmentPlan:
    """Dwell centers/durations and gap budgets for one behavior segment."""

    label: BehaviorLabel
    centers: tuple
    durations_ms: tuple
    gaps_ms: tuple
    lead_ms: float
    duration_ms: float


def _plan_segment(
    params: ArchetypeParams,
    page: PageLayout,
    duration_s: float,
    rng: np.random.Generator,
    fixdur_factor: float = 1.0,
    wpm_factor: float = 1.0,
) -> SegmentPlan:
    label = params.label
    if label in _READING_LABELS and len(page.words) < 10:
        raise LayoutTooSmall(
            f"{label.value} generation needs at least 10 words, layout has {len(page.words)}"
        )
    duration_ms = duration_s * 1000.0
    lead = 100.0
    tail = 80.0
    fixdur_median = params.fixation_duration_ms * fixdur_factor
    wpm_t = _lognormal(rng, params.target_wpm, params.target_wpm_dispersion) * wpm_factor
    gap_med = _GAP_MS[label]
    if label is BehaviorLabel.SKIMMING:
        # Even a slow skimmer outpaces reading; floor the hop rate so the
        # pace never degrades into an ordinary reading rhythm.
        wpm_t = max(wpm_t, 155.0)
        interval = 0.97 * 60000.0 / wpm_t
        gap_med = max(35.0, interval - fixdur_median * math.exp(params.fixation_duration_dispersion**2 / 2))
    elif label is BehaviorLabel.SEQUENTIAL:
        # Line-by-line reading saturates well short of a skimmer's pace.
        wpm_t = min(wpm_t, 108.0)
    # Draw dwell durations and gaps until the time budget is spent.
    durations: list = []
    gaps: list = []
    t = lead
    gap_sigma = 0.30
    gap_median = gap_med / math.exp(gap_sigma**2 / 2)
    while True:
        d = _lognormal(rng, fixdur_median, params.fixation_duration_dispersion)
        d = min(max(d, 100.0), 1400.0)
        if t + d > duration_ms - tail:
            break
        durations.append(d)
        t += d
        g = _lognormal(rng, gap_median, gap_sigma)
        g = min(max(g, 25.0), 4.0 * gap_med)
        if t + g + 100.0 > duration_ms - tail:
            break
        gaps.append(g)
        t += g
    if len(durations) < 2:
        durations = [max(100.0, duration_ms * 0.35)] * 2
        gaps = [max(25.0, duration_ms * 0.1)]
    n = len(durations)
    if label is BehaviorLabel.STATIC:
        centers = _plan_static(page, n, params, rng)
    elif label is BehaviorLabel.DEEP:
        centers = _plan_deep(page, n, params, duration_s, wpm_t, rng)
    elif label is BehaviorLabel.SEQUENTIAL:
        p_new = wpm_t * (sum(durations) / n + gap_med) / 60000.0
        centers = _plan_sequential(page, n, min(p_new, 0.92), params.sequentiality, rng)
    elif label is BehaviorLabel.NON_SEQUENTIAL:
        p_new = wpm_t * (sum(durations) / n + gap_med) / 60000.0
        centers = _plan_nonsequential(page, n, min(p_new, 0.92), params.sequentiality, rng)
    elif label is BehaviorLabel.SKIMMING:
        centers = _plan_skimming(page, n, params, rng)
    else:
        centers = _plan_preview(page, n, params, duration_s, wpm_t, rng)
    # Deep planning may extend the dwell list to honor its pass count;
    # pad durations/gaps for the extras.
    while len(durations) < len(centers):
        durations.append(min(max(_lognormal(rng, fixdur_median, params.fixation_duration_dispersion), 100.0), 1400.0))
        gaps.append(max(25.0, gap_median * 0.5))
    centers = centers[: len(durations)]
    while len(gaps) < len(durations) - 1:
        gaps.append(max(25.0, gap_median * 0.5))
    gaps = gaps[: len(durations) - 1]
    total = sum(durations) + sum(gaps) + lead + tail
    return SegmentPlan(
        label=label,
        centers=tuple(centers),
        durations_ms=tuple(durations),
        gaps_ms=tuple(gaps),
        lead_ms=lead,
        duration_ms=max(duration_ms, total),
    )


def _plan_fixations(plan: SegmentPlan, t0_ms: float, page_index: int) -> list:
    """Materialize a plan as Fixation events (no sample synthesis)."""
    out = []
    t = t0_ms + plan.lead_ms
    for i, (c, d) in enumerate(zip(plan.centers, plan.durations_ms)):
        n_samp = int(round(d / DT_MS)) + 1
        end = t + (n_samp - 1) * DT_MS
        out.append(
            Fixation(
                start_ms=t,
                end_ms=end,
                centroid=PagePoint(page_index=page_index, x=c[0], y=c[1], t_ms=0.5 * (t + end)),
                sample_count=n_samp,
            )
        )
        t = end + (plan.gaps_ms[i] if i < len(plan.gaps_ms) else 0.0)
    return out


def generate_segment(
    params: ArchetypeParams,
    layout: DocumentLayout,
    duration_s: float,
    rng_seed: int,
) -> "tuple[tuple, tuple, Segment]":
    """Generate one labeled behavior segment as fixation/saccade events.

    Returns (fixations, saccades, segment); the segment carries both
    reviewer labels (ground truth) plus measured words_covered and wpm.
    """
    if duration_s <= 0:
        raise ValueError(f"duration_s must be positive, got {duration_s}")
    page = layout.pages[0]
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(rng_seed)))
    plan = _plan_segment(params, page, duration_s, rng)
    fixations = tuple(_plan_fixations(plan, 0.0, page.page_index))
    saccades = tuple(derive_saccades(fixations, layout))
    segment = Segment(
        start_ms=0.0,
        end_ms=plan.duration_ms,
        label_r1=params.label,
        label_r2=params.label,
        label_final=params.label,
    )
    rate, covered = measure_wpm(segment, fixations, layout)
    segment = replace(segment, words_covered=covered, wpm=rate)
    return fixations, saccades, segment


# ---------------------------------------------------------------------------
# Sample-level assembly (60 Hz streams with travel and blink dropouts)
# ---------------------------------------------------------------------------


def _emit_segment_samples(
    plan: SegmentPlan,
    k0: int,
    rng: np.random.Generator,
    jitter_sigma: float,
    out_xy: list,
) -> int:
    """Append (x, y, valid) rows for one segment; returns next sample index.

    ``k0`` is the sample-grid index where the segment's lead-in starts.
    """
    k = k0 + int(round(plan.lead_ms / DT_MS))
    # Lead-in: a couple of invalid samples (tracker settling).
    while len(out_xy) < k:
        out_xy.append((0.0, 0.0, False))
    for i, (c, d) in enumerate(zip(plan.centers, plan.durations_ms)):
        n_samp = int(round(d / DT_MS)) + 1
        jx = rng.standard_normal(n_samp) * jitter_sigma
        jy = rng.standard_normal(n_samp) * jitter_sigma
        np.clip(jx, -JITTER_CLAMP, JITTER_CLAMP, out=jx)
        np.clip(jy, -JITTER_CLAMP, JITTER_CLAMP, out=jy)
        for s in range(n_samp):
            out_xy.append((c[0] + float(jx[s]), c[1] + float(jy[s]), True))
        if i < len(plan.gaps_ms):
            g = plan.gaps_ms[i]
            n_gap = max(1, int(round(g / DT_MS)) - 1)
            nxt = plan.centers[i + 1]
            dist = math.hypot(nxt[0] - c[0], nxt[1] - c[1])
            n_travel = min(n_gap, max(0, int(dist / TRAVEL_STEP) - 1), 3)
            for s in range(n_travel):
                f = (s + 1.0) / (n_travel + 1.0)
                out_xy.append((c[0] + f * (nxt[0] - c[0]), c[1] + f * (nxt[1] - c[1]), True))
            for _ in range(n_gap - n_travel):
                out_xy.append((0.0, 0.0, False))
    return len(out_xy)


@dataclass(frozen=True)
class SyntheticSession:
    """One generated session: raw bundle plus its ground-truth segments."""

    bundle: SessionBundle
    segments: tuple


@dataclass(frozen=True)
class SessionSpec:
    """Corpus-level generation knobs."""

    layout_seed: int = 0
    behaviors_mean: float = BEHAVIORS_PER_SESSION_MEAN
    min_behaviors: int = _MIN_BEHAVIORS
    transition_lo_ms: float = 2500.0
    transition_hi_ms: float = 6500.0
    condition: Condition = Condition.IN_THE_WILD


def _draw_label(rng: np.random.Generator, grammar: dict, exclude: Optional[BehaviorLabel]) -> BehaviorLabel:
    labels = [lab for lab in _LABEL_ORDER if lab is not exclude]
    weights = np.array([grammar[lab] for lab in labels])
    weights /= weights.sum()
    pick = int(rng.choice(len(labels), p=weights))
    return labels[pick]


def generate_session(
    participant: SyntheticParticipant,
    spec: SessionSpec,
    layout: DocumentLayout,
    session_index: int = 0,
) -> SyntheticSession:
    rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([participant.seed, session_index, 0x5E55]))
    )
    page = layout.pages[0]
    n_behaviors = spec.min_behaviors + int(
        rng.poisson(max(spec.behaviors_mean - spec.min_behaviors, 0.0))
    )
    labels: list = []
    for i in range(n_behaviors):
        if i == 0 and rng.random() < participant.open_with_overview_p:
            labels.append(BehaviorLabel.PREVIEWING_MAPPING)
            continue
        prev = labels[-1] if labels else None
        labels.append(_draw_label(rng, participant.grammar, prev))

    out_xy: list = []
    segments: list = []
    # Session opens with a short tracker warm-up of invalid samples.
    for _ in range(12):
        out_xy.append((0.0, 0.0, False))
    for label in labels:
        med, sigma, floor_s, cap_s = _DURATION[label]
        med = med * participant.duration_factor[label]
        duration_s = max(_lognormal(rng, med, sigma), floor_s)
        duration_s = min(duration_s, cap_s)
        params = _DEFAULTS[label]
        plan = _plan_segment(
            params,
            page,
            duration_s,
            rng,
            fixdur_factor=participant.fixdur_factor[label],
            wpm_factor=participant.wpm_factor[label],
        )
        t0 = len(out_xy) * DT_MS
        _emit_segment_samples(plan, len(out_xy), rng, params.jitter_sigma, out_xy)
        t1 = t0 + plan.duration_ms
        # Pad trailing slack inside the segment with blink samples.
        while len(out_xy) * DT_MS < t1:
            out_xy.append((0.0, 0.0, False))
        fixations = _plan_fixations(plan, t0, page.page_index)
        seg = Segment(
            start_ms=t0,
            end_ms=t1,
            label_r1=label,
            label_r2=label,
            label_final=label,
        )
        rate, covered = measure_wpm(seg, tuple(fixations), layout)
        segments.append(replace(seg, words_covered=covered, wpm=rate))
        n_gap = int(round(rng.uniform(spec.transition_lo_ms, spec.transition_hi_ms) / DT_MS))
        for _ in range(n_gap):
            out_xy.append((0.0, 0.0, False))
    # Viewport: one rect event at t=0 with the page's physical aspect.
    h = 960.0 + float(rng.integers(0, 120))
    w = h * (page.width_cm / page.height_cm)
    rect = PageRect(
        page_index=page.page_index,
        l=380.0 + float(rng.integers(0, 160)),
        t=16.0 + float(rng.integers(0, 40)),
        w=w,
        h=h,
        t_ms=0.0,
    )
    session_id = f"{participant.participant_id}-s{session_index:02d}"
    samples = tuple(
        GazeSample(
            t_ms=k * DT_MS,
            sx=rect.l + x * rect.w,
            sy=rect.t + y * rect.h,
            valid=valid,
            session_id=session_id,
        )
        for k, (x, y, valid) in enumerate(out_xy)
    )
    bundle = SessionBundle(
        session_id=session_id,
        participant_id=participant.participant_id,
        samples=samples,
        rect_events=(rect,),
        layout=layout,
        condition=spec.condition,
    )
    return SyntheticSession(bundle=bundle, segments=tuple(segments))


def generate_corpus(
    n_participants: int = 27,
    session_spec: Optional[SessionSpec] = None,
    seed: int = 0,
) -> list:
    """Generate the default labeled corpus: one session per participant."""
    if n_participants < 2:
        raise ValueError(f"need at least 2 participants, got {n_participants}")
    spec = session_spec or SessionSpec()
    layout = make_layout(seed=spec.layout_seed)
    root = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0xC0])))
    part_seeds = root.integers(0, 2**62, size=n_participants)
    corpus = []
    for i in range(n_participants):
        participant = make_participant(f"p{i:02d}", int(part_seeds[i]))
        corpus.append(generate_session(participant, spec, layout, session_index=0))
    return corpus


# ---------------------------------------------------------------------------
# Corpus serialization (format-identical to ingested sessions)
# ---------------------------------------------------------------------------


def write_corpus(corpus: Sequence[SyntheticSession], out_dir: "str | Path") -> None:
    """Write each session as the raw file triple plus ground-truth segments."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"schema_version": 1, "sessions": []}
    for session in corpus:
        b = session.bundle
        d = out / b.session_id
        d.mkdir(parents=True, exist_ok=True)
        with open(d / "gaze.jsonl", "w", encoding="utf-8") as f:
            for s in b.samples:
                f.write(json.dumps(s.to_dict(), sort_keys=True) + "\n")
        with open(d / "viewport.jsonl", "w", encoding="utf-8") as f:
            for r in b.rect_events:
                f.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")
        with open(d / "layout.json", "w", encoding="utf-8") as f:
            json.dump(b.layout.to_dict(), f, sort_keys=True)
        with open(d / "segments.json", "w", encoding="utf-8") as f:
            json.dump([seg.to_dict() for seg in session.segments], f, sort_keys=True)
        manifest["sessions"].append(
            {
                "session_id": b.session_id,
                "participant_id": b.participant_id,
                "condition": b.condition.value,
            }
        )
    with open(out / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, sort_keys=True, indent=1)


def read_corpus(corpus_dir: "str | Path") -> "list[SyntheticSession]":
    """Read a corpus directory (as written by ``write_corpus``) back in.

    Accepts both the plain segment list and the annotated envelope form
    of ``segments.json``; sessions without a segment file come back with
    an empty segment tuple.
    """
    root = Path(corpus_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise FileNotFoundError(f"no manifest.json under {root}")
    with open(manifest_path, encoding="utf-8") as f:
        manifest = json.load(f)
    sessions: list[SyntheticSession] = []
    for entry in manifest["sessions"]:
        sid = entry["session_id"]
        d = root / sid
        bundle = load_bundle(
            d / "gaze.jsonl",
            d / "viewport.jsonl",
            d / "layout.json",
            session_id=sid,
            participant_id=entry.get("participant_id", sid),
            condition=Condition(entry.get("condition", Condition.INSTRUCTED.value)),
        )
        segments: tuple = ()
        seg_path = d / "segments.json"
        if seg_path.is_file():
            with open(seg_path, encoding="utf-8") as f:
                raw = json.load(f)
            rows = raw["segments"] if isinstance(raw, dict) else raw
            segments = tuple(
                sorted((Segment.from_dict(r) for r in rows), key=lambda s: s.start_ms)
            )
        sessions.append(SyntheticSession(bundle=bundle, segments=segments))
    return sessions
