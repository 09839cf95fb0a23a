"""Leave-one-participant-out evaluation and the model comparison table.

The harness is model-agnostic: a trainer builds a model from training
sessions (with a rotating held-out validation participant for early
stopping) and a predictor turns one test session into (truth, predicted)
label pairs. Fold confusions are pooled by summation; per-class
precision/recall/F1, macro F1, and accuracy are derived from the pooled
matrix. Classifier rows for the comparison table: uniform random,
majority class, softmax on 15-second feature windows, and the 1D/2D
convolutional models on 10-fixation windows.
"""

from __future__ import annotations

import dataclasses
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Callable, Optional, Sequence

import numpy as np

from .baseline import baselines, train_softmax
from .cnn import (
    MODEL_RENDER,
    WINDOW_K,
    TrainConfig,
    predict_stream,
    train,
    train_1d,
    window_examples_from_fixations,
)
from .core import TRAINED_LABELS, BehaviorLabel
from .errors import EmptyMatrix, LeakageError, TooFewParticipants
from .ingest import SessionBundle, project_stream
from .metrics import feature_matrix, fixations_in_window, window_features
from .oculomotor import FilterConfig, detect_fixations, derive_saccades
from .windows import slide_fixation_windows, slide_time_windows

__all__ = [
    "AnalyzedSession",
    "ComparisonReport",
    "EvalReport",
    "Fold",
    "MODEL_ROWS",
    "TRAIN_STRIDES",
    "TimeWindowSet",
    "analyze_corpus",
    "balance_examples",
    "confusion_matrix",
    "fixation_truth",
    "lopocv",
    "make_folds",
    "metrics_from_confusion",
    "model_comparison",
    "session_time_features",
    "training_windows",
]

DEFAULT_TIME_WINDOW_S = 15.0
MODEL_ROWS = ("random", "majority", "softmax_t15", "cnn1d", "cnn2d")


# ---------------------------------------------------------------------------
# Confusion matrices and derived metrics
# ---------------------------------------------------------------------------


def confusion_matrix(
    truth: Sequence[BehaviorLabel],
    predicted: Sequence[BehaviorLabel],
    classes: Sequence[BehaviorLabel] = TRAINED_LABELS,
) -> np.ndarray:
    """Count matrix with one row per true class, one column per prediction."""
    if len(truth) != len(predicted):
        raise ValueError(
            f"truth and predictions differ in length: {len(truth)} vs {len(predicted)}"
        )
    index = {c: i for i, c in enumerate(classes)}
    out = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(truth, predicted):
        if t not in index:
            raise ValueError(f"true label {t!r} is not among classes {list(index)}")
        if p not in index:
            raise ValueError(f"predicted label {p!r} is not among classes {list(index)}")
        out[index[t], index[p]] += 1
    return out


def metrics_from_confusion(
    confusion: np.ndarray,
    classes: Sequence[BehaviorLabel] = TRAINED_LABELS,
) -> dict:
    """Per-class precision/recall/F1 plus macro F1 and accuracy.

    Classes with zero support (empty truth row) are excluded from the
    macro average and reported in ``excluded`` with a warning; their
    per-class entries are still present with zeroed scores.
    """
    cm = np.asarray(confusion)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ValueError(f"confusion matrix must be square, got shape {cm.shape}")
    if cm.size == 0:
        raise EmptyMatrix("confusion matrix has no cells")
    if np.any(cm < 0):
        raise ValueError("confusion matrix counts must be non-negative")
    if not np.issubdtype(cm.dtype, np.integer):
        if not np.all(cm == np.rint(cm)):
            raise ValueError("confusion matrix counts must be integers")
        cm = cm.astype(np.int64)
    if len(classes) != cm.shape[0]:
        raise ValueError(
            f"{len(classes)} class names for a {cm.shape[0]}x{cm.shape[1]} matrix"
        )
    total = int(cm.sum())
    if total == 0:
        raise EmptyMatrix("confusion matrix is all zeros")

    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    diag = np.diag(cm)

    per_class: dict = {}
    f1s: list = []
    excluded: list = []
    for i, cls in enumerate(classes):
        prec = float(diag[i] / predicted[i]) if predicted[i] else 0.0
        rec = float(diag[i] / support[i]) if support[i] else 0.0
        f1 = 2.0 * prec * rec / (prec + rec) if prec + rec else 0.0
        per_class[cls.value] = {
            "precision": prec,
            "recall": rec,
            "f1": f1,
            "support": int(support[i]),
        }
        if support[i]:
            f1s.append(f1)
        else:
            excluded.append(cls.value)
    if excluded:
        warnings.warn(
            f"classes with zero support excluded from macro F1: {excluded}",
            stacklevel=2,
        )
    return {
        "per_class": per_class,
        "macro_f1": float(np.mean(f1s)),
        "accuracy": float(diag.sum() / total),
        "excluded": tuple(excluded),
    }


def _format_confusion(cm: np.ndarray, classes: Sequence[BehaviorLabel]) -> str:
    names = [c.value for c in classes]
    width = max(len(n) for n in names) + 2
    cell = max(6, max(len(str(int(v))) for v in cm.ravel()) + 2)
    head = " " * width + "".join(n[: cell - 1].rjust(cell) for n in names)
    rows = [head]
    for name, row in zip(names, cm):
        rows.append(name.rjust(width) + "".join(str(int(v)).rjust(cell) for v in row))
    return "\n".join(rows)


# ---------------------------------------------------------------------------
# Report types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalReport:
    """Cross-validation outcome: per-fold and pooled confusions + metrics."""

    classes: tuple
    fold_participants: tuple
    fold_confusions: tuple
    fold_runtimes_s: tuple
    pooled: np.ndarray
    per_class: dict
    macro_f1: float
    accuracy: float
    excluded: tuple

    @classmethod
    def from_folds(
        cls,
        classes: Sequence[BehaviorLabel],
        fold_participants: Sequence[str],
        fold_confusions: Sequence[np.ndarray],
        fold_runtimes_s: Sequence[float],
    ) -> "EvalReport":
        if not fold_confusions:
            raise EmptyMatrix("no folds to pool")
        pooled = np.zeros_like(np.asarray(fold_confusions[0]))
        for cm in fold_confusions:
            pooled = pooled + np.asarray(cm)
        m = metrics_from_confusion(pooled, classes)
        return cls(
            classes=tuple(classes),
            fold_participants=tuple(fold_participants),
            fold_confusions=tuple(np.asarray(c) for c in fold_confusions),
            fold_runtimes_s=tuple(float(t) for t in fold_runtimes_s),
            pooled=pooled,
            per_class=m["per_class"],
            macro_f1=m["macro_f1"],
            accuracy=m["accuracy"],
            excluded=m["excluded"],
        )

    def to_dict(self) -> dict:
        return {
            "classes": [c.value for c in self.classes],
            "folds": [
                {
                    "participant_id": pid,
                    "runtime_s": rt,
                    "confusion": cm.tolist(),
                }
                for pid, rt, cm in zip(
                    self.fold_participants, self.fold_runtimes_s, self.fold_confusions
                )
            ],
            "pooled_confusion": self.pooled.tolist(),
            "per_class": self.per_class,
            "macro_f1": self.macro_f1,
            "accuracy": self.accuracy,
            "excluded_classes": list(self.excluded),
        }

    def format_table(self) -> str:
        lines = [
            f"folds: {len(self.fold_participants)}"
            f"  windows: {int(self.pooled.sum())}"
            f"  runtime: {sum(self.fold_runtimes_s):.1f}s",
            "",
            "pooled confusion (rows = truth, columns = predicted):",
            _format_confusion(self.pooled, self.classes),
            "",
            f"{'class':>16}  {'precision':>9}  {'recall':>9}  {'f1':>9}  {'support':>7}",
        ]
        for name, m in self.per_class.items():
            lines.append(
                f"{name:>16}  {m['precision']:>9.3f}  {m['recall']:>9.3f}"
                f"  {m['f1']:>9.3f}  {m['support']:>7d}"
            )
        lines.append("")
        lines.append(f"macro F1 = {self.macro_f1:.4f}   accuracy = {self.accuracy:.4f}")
        if self.excluded:
            lines.append(f"excluded (zero support): {', '.join(self.excluded)}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Session preparation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnalyzedSession:
    """One session run through the fixation pipeline, with ground truth."""

    session_id: str
    participant_id: str
    layout: object
    fixations: tuple
    saccades: tuple
    segments: tuple
    duration_ms: float


def analyze_corpus(
    corpus: Sequence,
    filter_config: Optional[FilterConfig] = None,
) -> list:
    """Project, detect fixations, and derive saccades for every session."""
    cfg = filter_config or FilterConfig()
    out: list = []
    for item in corpus:
        bundle: SessionBundle = item.bundle if hasattr(item, "bundle") else item
        segments = tuple(getattr(item, "segments", ()))
        points = project_stream(bundle)
        fixations = detect_fixations(points, cfg)
        saccades = derive_saccades(fixations, bundle.layout)
        out.append(
            AnalyzedSession(
                session_id=bundle.session_id,
                participant_id=bundle.participant_id,
                layout=bundle.layout,
                fixations=tuple(fixations),
                saccades=tuple(saccades),
                segments=segments,
                duration_ms=bundle.duration_ms,
            )
        )
    return out


def fixation_truth(session: AnalyzedSession) -> tuple:
    """Final segment label at each fixation midpoint (None outside labels)."""
    out = []
    for f in session.fixations:
        label = None
        for seg in session.segments:
            if seg.start_ms <= f.mid_ms < seg.end_ms:
                label = seg.label_final
                break
        out.append(label)
    return tuple(out)


# Per-class thinning of the stride-1 labeled windows: the plentiful
# classes keep every nth window, the rarest keeps all of them, so the
# class histogram stays within oversampling reach at a bounded epoch
# cost.
TRAIN_STRIDES = {
    BehaviorLabel.SEQUENTIAL: 5,
    BehaviorLabel.NON_SEQUENTIAL: 2,
    BehaviorLabel.SKIMMING: 1,
}


def training_windows(
    session: AnalyzedSession,
    k: int = WINDOW_K,
    classes: Sequence[BehaviorLabel] = TRAINED_LABELS,
    strides: Optional[dict] = None,
) -> list:
    """Labeled k-fixation windows for training, thinned per class.

    Windows come from the stride-1 dominance labeling (a window is
    labeled when at least 8 of its k fixations fall in one labeled
    segment), so the set includes near-boundary windows whose texture
    mixes in up to two foreign fixations — the same windows the
    streaming predictor later faces. Per-class strides thin the
    plentiful classes to keep epochs affordable while the rarer ones
    keep every window.
    """
    wanted = set(classes)
    strides = TRAIN_STRIDES if strides is None else strides
    counters: dict = {}
    out: list = []
    for w in slide_fixation_windows(session.fixations, session.segments, k):
        if w.label not in wanted:
            continue
        n = counters.get(w.label, 0)
        counters[w.label] = n + 1
        if n % strides.get(w.label, k):
            continue
        out.extend(
            window_examples_from_fixations(
                session.fixations[w.fix_lo : w.fix_hi + 1],
                w.label,
                session.participant_id,
                k=k,
                stride=k,
            )
        )
    return out


def balance_examples(examples: Sequence) -> list:
    """Upsample each class to the majority count by cycling its windows.

    Duplicated windows are not literal repeats during training because
    coordinate noise is redrawn at every epoch. Order is deterministic:
    classes in label-value order, windows in input order.
    """
    by_label: dict = {}
    for w in examples:
        by_label.setdefault(w.label, []).append(w)
    if not by_label:
        return []
    n = max(len(v) for v in by_label.values())
    out: list = []
    for label in sorted(by_label, key=lambda lab: lab.value):
        bucket = by_label[label]
        out.extend(bucket[i % len(bucket)] for i in range(n))
    return out


@dataclass(frozen=True)
class TimeWindowSet:
    """Every sliding time window of one session, ready for train and eval.

    ``train_labels`` holds the fully-contained segment label (None for
    straddling windows, which are excluded from training but kept for
    inference). ``eval_truth`` holds the segment label of each window's
    last contained fixation — the per-fixation alignment used for
    confusion accounting — and is None when the window holds no fixation
    or its last fixation sits outside any labeled segment.
    """

    features: np.ndarray
    spans: tuple
    train_labels: tuple
    eval_truth: tuple

    def training_rows(self, classes: Sequence[BehaviorLabel] = TRAINED_LABELS):
        wanted = set(classes)
        idx = [i for i, lab in enumerate(self.train_labels) if lab in wanted]
        return self.features[idx], tuple(self.train_labels[i] for i in idx)

    def eval_rows(self, classes: Sequence[BehaviorLabel] = TRAINED_LABELS):
        wanted = set(classes)
        idx = [i for i, lab in enumerate(self.eval_truth) if lab in wanted]
        return self.features[idx], tuple(self.eval_truth[i] for i in idx)


def session_time_features(
    session: AnalyzedSession,
    t_s: float = DEFAULT_TIME_WINDOW_S,
    stride_s: float = 1.0,
) -> TimeWindowSet:
    """Features, containment labels, and last-fixation truth per window."""
    windows = slide_time_windows(session.segments, session.duration_ms, t_s, stride_s)
    truth = fixation_truth(session)
    vectors = []
    spans = []
    train_labels = []
    eval_truth = []
    for w in windows:
        vectors.append(
            window_features(
                session.fixations, session.saccades, session.layout, w.t0_ms, w.t1_ms
            )
        )
        spans.append((w.t0_ms, w.t1_ms))
        train_labels.append(w.label)
        idx = fixations_in_window(session.fixations, w.t0_ms, w.t1_ms)
        eval_truth.append(truth[idx[-1]] if idx else None)
    features = feature_matrix(vectors) if vectors else np.zeros((0, 0))
    return TimeWindowSet(
        features=features,
        spans=tuple(spans),
        train_labels=tuple(train_labels),
        eval_truth=tuple(eval_truth),
    )


# ---------------------------------------------------------------------------
# LOPOCV harness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Fold:
    """One cross-validation split: held-out participant and its sessions."""

    test_participant: str
    val_participant: str
    train_sessions: tuple
    test_sessions: tuple
    seed: int


def make_folds(sessions: Sequence[AnalyzedSession], seed: int = 0) -> list:
    """One fold per participant; validation participant rotates within train."""
    pids = sorted({s.participant_id for s in sessions})
    if len(pids) < 2:
        raise TooFewParticipants(
            f"cross-validation needs at least 2 participants, got {len(pids)}"
        )
    folds: list = []
    for i, pid in enumerate(pids):
        val_pid = pids[(i + 1) % len(pids)]
        fold_seed = int(np.random.SeedSequence([seed, i]).generate_state(1)[0])
        folds.append(
            Fold(
                test_participant=pid,
                val_participant=val_pid,
                train_sessions=tuple(
                    s for s in sessions if s.participant_id != pid
                ),
                test_sessions=tuple(s for s in sessions if s.participant_id == pid),
                seed=fold_seed,
            )
        )
    return folds


def _check_fold(fold: Fold) -> None:
    train_pids = {s.participant_id for s in fold.train_sessions}
    if fold.test_participant in train_pids:
        raise LeakageError(
            f"test participant {fold.test_participant!r} appears in training data"
        )
    for s in fold.test_sessions:
        if s.participant_id != fold.test_participant:
            raise LeakageError(
                f"test set for {fold.test_participant!r} contains a session "
                f"from {s.participant_id!r}"
            )
    if fold.val_participant == fold.test_participant:
        raise LeakageError(
            f"validation participant equals test participant {fold.test_participant!r}"
        )


def _single_threaded_blas() -> None:
    """Pin BLAS to one thread inside fold workers.

    n_jobs fold processes already saturate the cores; letting each one's
    BLAS pool spin up its own threads oversubscribes the machine and
    slows every fold down.
    """
    import threadpoolctl

    threadpoolctl.threadpool_limits(1)


def _run_fold(
    fold: Fold,
    trainer: Callable,
    predictor: Callable,
    classes: Sequence[BehaviorLabel],
) -> "tuple[np.ndarray, float]":
    _check_fold(fold)
    t0 = time.perf_counter()
    model = trainer(fold.train_sessions, fold.val_participant, fold.seed)
    truth: list = []
    preds: list = []
    for session in fold.test_sessions:
        for t, p in predictor(model, session):
            truth.append(t)
            preds.append(p)
    cm = confusion_matrix(truth, preds, classes)
    return cm, time.perf_counter() - t0


def lopocv(
    sessions: Sequence[AnalyzedSession],
    trainer: Callable,
    predictor: Callable,
    classes: Sequence[BehaviorLabel] = TRAINED_LABELS,
    seed: int = 0,
    n_jobs: int = 1,
    folds: Optional[Sequence[Fold]] = None,
) -> EvalReport:
    """Leave-one-participant-out cross-validation.

    ``trainer(train_sessions, val_participant, seed) -> model`` and
    ``predictor(model, session) -> [(truth, predicted), ...]`` define the
    model under test. Every fold is checked for participant leakage
    before its trainer runs. With ``n_jobs > 1`` folds run in separate
    processes, so trainer and predictor must be picklable (module-level
    callables or partials of them).
    """
    if folds is None:
        folds = make_folds(sessions, seed=seed)
    else:
        folds = list(folds)
        if not folds:
            raise TooFewParticipants("cross-validation needs at least one fold")
    for fold in folds:
        _check_fold(fold)

    results: list = []
    if n_jobs > 1 and len(folds) > 1:
        with ProcessPoolExecutor(
            max_workers=n_jobs, initializer=_single_threaded_blas
        ) as pool:
            futures = [
                pool.submit(_run_fold, fold, trainer, predictor, tuple(classes))
                for fold in folds
            ]
            results = [f.result() for f in futures]
    else:
        results = [_run_fold(fold, trainer, predictor, tuple(classes)) for fold in folds]

    return EvalReport.from_folds(
        classes=tuple(classes),
        fold_participants=[f.test_participant for f in folds],
        fold_confusions=[cm for cm, _ in results],
        fold_runtimes_s=[rt for _, rt in results],
    )


# ---------------------------------------------------------------------------
# Model rows: trainers and predictors (module-level for process pools)
# ---------------------------------------------------------------------------


def _session_features(
    sessions: Sequence[AnalyzedSession], t_s: float, stride_s: float
) -> dict:
    """Per-session (features, labels) keyed by session id, computed once."""
    out = {s.session_id: session_time_features(s, t_s, stride_s) for s in sessions}
    if len(out) != len(sessions):
        raise ValueError("session ids must be unique across the corpus")
    return out


def _training_rows(train_sessions, features) -> "tuple[np.ndarray, list]":
    mats: list = []
    labels: list = []
    for s in train_sessions:
        x, y = features[s.session_id].training_rows()
        if len(y):
            mats.append(x)
            labels.extend(y)
    if not labels:
        raise ValueError("no labeled training windows in the training sessions")
    return np.vstack(mats), labels


def _random_trainer(train_sessions, val_participant, seed, features):
    _, labels = _training_rows(train_sessions, features)
    _, random_model = baselines(labels, seed=seed)
    return random_model


def _majority_trainer(train_sessions, val_participant, seed, features):
    _, labels = _training_rows(train_sessions, features)
    majority, _ = baselines(labels, seed=seed)
    return majority


def _softmax_trainer(train_sessions, val_participant, seed, features):
    x, labels = _training_rows(train_sessions, features)
    model, _history = train_softmax(x, labels)
    return model


def _feature_window_predictor(model, session, features):
    x, y = features[session.session_id].eval_rows()
    if not len(y):
        return []
    return list(zip(y, model.predict(x)))


def _cnn2d_trainer(train_sessions, val_participant, seed, config):
    examples = balance_examples(
        [w for s in train_sessions for w in training_windows(s)]
    )
    cfg = dataclasses.replace(config or TrainConfig(), seed=seed)
    params, _history = train(examples, cfg, val_participant)
    return params


def _cnn1d_trainer(train_sessions, val_participant, seed, config):
    examples = balance_examples(
        [w for s in train_sessions for w in training_windows(s)]
    )
    cfg = dataclasses.replace(config or TrainConfig(), seed=seed)
    params, _history = train_1d(examples, cfg, val_participant)
    return params


def _stream_predictor(params, session, classes=TRAINED_LABELS):
    """Window prediction lands on its last fixation; truth from segments."""
    wanted = set(classes)
    truth = fixation_truth(session)
    pairs: list = []
    for pred in predict_stream(params, session.fixations, MODEL_RENDER):
        t = truth[pred.fixation_index]
        if t in wanted:
            pairs.append((t, pred.label))
    return pairs


# ---------------------------------------------------------------------------
# Comparison table
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonReport:
    """Macro F1 / accuracy for every model row under identical folds."""

    rows: dict
    seed: int

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "rows": {name: report.to_dict() for name, report in self.rows.items()},
        }

    def format_table(self) -> str:
        lines = [f"{'model':>12}  {'macro F1':>9}  {'accuracy':>9}  {'windows':>8}"]
        for name, report in self.rows.items():
            lines.append(
                f"{name:>12}  {report.macro_f1:>9.3f}  {report.accuracy:>9.3f}"
                f"  {int(report.pooled.sum()):>8d}"
            )
        return "\n".join(lines)


def model_comparison(
    sessions: Sequence[AnalyzedSession],
    seed: int = 0,
    n_jobs: int = 1,
    t_s: float = DEFAULT_TIME_WINDOW_S,
    stride_s: float = 1.0,
    cnn_config: Optional[TrainConfig] = None,
    models: Sequence[str] = MODEL_ROWS,
) -> ComparisonReport:
    """Evaluate every requested model row under identical folds and seeds.

    Rows: ``random`` and ``majority`` (label-frequency baselines on the
    time-window universe), ``softmax_t15`` (feature windows of ``t_s``
    seconds), ``cnn1d`` (coordinate windows), ``cnn2d`` (rendered
    windows). The same per-fold seeds are used for every row.
    """
    unknown = [m for m in models if m not in MODEL_ROWS]
    if unknown:
        raise ValueError(f"unknown model rows {unknown}; valid rows are {MODEL_ROWS}")

    features = _session_features(sessions, t_s, stride_s)
    feature_pred = partial(_feature_window_predictor, features=features)
    builders = {
        "random": (partial(_random_trainer, features=features), feature_pred, 1),
        "majority": (partial(_majority_trainer, features=features), feature_pred, 1),
        "softmax_t15": (partial(_softmax_trainer, features=features), feature_pred, 1),
        "cnn1d": (partial(_cnn1d_trainer, config=cnn_config), _stream_predictor, 1),
        "cnn2d": (
            partial(_cnn2d_trainer, config=cnn_config),
            _stream_predictor,
            n_jobs,
        ),
    }
    rows: dict = {}
    for name in models:
        trainer, predictor, jobs = builders[name]
        rows[name] = lopocv(
            sessions, trainer, predictor, seed=seed, n_jobs=jobs
        )
    return ComparisonReport(rows=rows, seed=seed)
