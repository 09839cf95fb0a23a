"""Non-neural classifiers over window feature vectors.

Four baselines: a rule classifier over declared regions of the
velocity/density plane (words-per-minute x inverse dispersion, with a
forward-saccade-ratio threshold splitting sequential from
non-sequential reading), a majority-class predictor, a seeded uniform
random predictor, and a from-scratch multinomial logistic (softmax)
learner trained by full-batch gradient descent.

Feature standardization is always fitted on training data only; the
cross-validation harness never lets test-participant windows touch it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import BehaviorLabel, TRAINED_LABELS
from .errors import SingleClass
from .metrics import FEATURE_NAMES, FeatureVector

# Region borders in the velocity/density plane. Thresholds are
# calibrated against the synthetic archetypes (each archetype's
# generated cloud sits at least ~2 sigma inside its own rectangle) and
# then frozen; wpm borders are words/minute, density borders are 1/cm.
WPM_STATIC_MAX = 8.0
WPM_DEEP_MAX = 52.0
WPM_READ_MAX = 124.0
DENSITY_COMPACT_MIN = 0.30
DENSITY_READ_MIN = 0.145
FBSR_SEQUENTIAL_MIN = 0.75

# Fixed tie/priority order: earlier labels claim overlapping corners.
PRIORITY = (
    BehaviorLabel.STATIC,
    BehaviorLabel.DEEP,
    BehaviorLabel.SEQUENTIAL,
    BehaviorLabel.NON_SEQUENTIAL,
    BehaviorLabel.SKIMMING,
    BehaviorLabel.PREVIEWING_MAPPING,
)


@dataclass(frozen=True)
class RegionRules:
    """Axis-aligned label regions over (wpm, inverse_dispersion, fbsr).

    The rectangles tile the whole plane: every feature vector gets a
    label, and the declared priority order resolves shared edges.
    """

    wpm_static_max: float = WPM_STATIC_MAX
    wpm_deep_max: float = WPM_DEEP_MAX
    wpm_read_max: float = WPM_READ_MAX
    density_compact_min: float = DENSITY_COMPACT_MIN
    density_read_min: float = DENSITY_READ_MIN
    fbsr_sequential_min: float = FBSR_SEQUENTIAL_MIN

    def to_dict(self) -> dict:
        return {
            "wpm_static_max": self.wpm_static_max,
            "wpm_deep_max": self.wpm_deep_max,
            "wpm_read_max": self.wpm_read_max,
            "density_compact_min": self.density_compact_min,
            "density_read_min": self.density_read_min,
            "fbsr_sequential_min": self.fbsr_sequential_min,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegionRules":
        return cls(**{k: float(v) for k, v in d.items()})


def classify_rules(fv: FeatureVector, rules: Optional[RegionRules] = None) -> BehaviorLabel:
    """Total, deterministic region lookup for one feature vector."""
    r = rules or RegionRules()
    v = fv.wpm
    d = fv.inverse_dispersion
    if not (math.isfinite(v) and math.isfinite(d) and math.isfinite(fv.fbsr)):
        raise ValueError("feature vector must be finite")
    if v < r.wpm_static_max and d >= r.density_compact_min:
        return BehaviorLabel.STATIC
    if v < r.wpm_deep_max and d >= r.density_compact_min:
        return BehaviorLabel.DEEP
    if v < r.wpm_read_max and d >= r.density_read_min:
        if fv.fbsr >= r.fbsr_sequential_min:
            return BehaviorLabel.SEQUENTIAL
        return BehaviorLabel.NON_SEQUENTIAL
    if d >= r.density_read_min:
        return BehaviorLabel.SKIMMING
    return BehaviorLabel.PREVIEWING_MAPPING


# ---------------------------------------------------------------------------
# Majority and random baselines
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MajorityModel:
    label: BehaviorLabel

    def predict(self, features: np.ndarray) -> list:
        return [self.label] * len(features)


@dataclass(frozen=True)
class RandomModel:
    labels: tuple
    seed: int = 0

    def predict(self, features: np.ndarray) -> list:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed)))
        picks = rng.integers(0, len(self.labels), size=len(features))
        return [self.labels[int(i)] for i in picks]


def baselines(labels: Sequence[BehaviorLabel], seed: int = 0) -> "tuple[MajorityModel, RandomModel]":
    """Majority-class and uniform-random models fitted on training labels."""
    if not labels:
        raise ValueError("labeled windows must be non-empty")
    counts: dict = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    # Deterministic tie-break: highest count, then priority order.
    best = max(counts, key=lambda lab: (counts[lab], -PRIORITY.index(lab)))
    return MajorityModel(label=best), RandomModel(labels=tuple(TRAINED_LABELS), seed=seed)


# ---------------------------------------------------------------------------
# Softmax learner
# ---------------------------------------------------------------------------


@dataclass
class SoftmaxModel:
    """Multinomial logistic regression with per-feature standardization."""

    classes: tuple
    weights: np.ndarray  # (n_classes, n_features)
    bias: np.ndarray  # (n_classes,)
    mean: np.ndarray  # (n_features,)
    std: np.ndarray  # (n_features,)

    def _standardize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self._standardize(x) @ self.weights.T + self.bias

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return _softmax(self.logits(x))

    def predict(self, x: np.ndarray) -> list:
        idx = np.argmax(self.logits(x), axis=1)
        return [self.classes[int(i)] for i in idx]

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "classes": [c.value for c in self.classes],
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "feature_names": list(FEATURE_NAMES),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SoftmaxModel":
        return cls(
            classes=tuple(BehaviorLabel(v) for v in d["classes"]),
            weights=np.asarray(d["weights"], dtype=np.float64),
            bias=np.asarray(d["bias"], dtype=np.float64),
            mean=np.asarray(d["mean"], dtype=np.float64),
            std=np.asarray(d["std"], dtype=np.float64),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, sort_keys=True)

    @classmethod
    def load(cls, path) -> "SoftmaxModel":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class SoftmaxConfig:
    lr: float = 0.5
    epochs: int = 300
    l2: float = 1e-4


def softmax_loss_grad(
    w: np.ndarray,
    b: np.ndarray,
    xs: np.ndarray,
    y: np.ndarray,
    l2: float,
) -> "tuple[float, np.ndarray, np.ndarray]":
    """Regularized cross-entropy and its exact gradient.

    ``xs`` is the already-standardized (n, d) feature matrix, ``y`` the
    (n,) integer class indices. Returns (loss, dloss/dw, dloss/db).
    """
    n = xs.shape[0]
    k = w.shape[0]
    logits = xs @ w.T + b
    p = _softmax(logits)
    ce = -np.mean(np.log(np.clip(p[np.arange(n), y], 1e-300, None)))
    loss = ce + 0.5 * l2 * float((w * w).sum())
    one_hot = np.zeros((n, k))
    one_hot[np.arange(n), y] = 1.0
    delta = (p - one_hot) / n
    gw = delta.T @ xs + l2 * w
    gb = delta.sum(axis=0)
    return loss, gw, gb


def train_softmax(
    features: np.ndarray,
    labels: Sequence[BehaviorLabel],
    config: Optional[SoftmaxConfig] = None,
) -> "tuple[SoftmaxModel, list]":
    """Fit softmax weights by full-batch gradient descent.

    The learning rate is halved (backtracking) whenever a step would
    increase the regularized loss, so the recorded loss history is
    non-increasing. Returns (model, loss_history).
    """
    cfg = config or SoftmaxConfig()
    x = np.asarray(features, dtype=np.float64)
    classes = tuple(sorted(set(labels), key=PRIORITY.index))
    if len(classes) < 2:
        raise SingleClass(f"training needs at least 2 classes, got {len(classes)}")
    class_index = {c: i for i, c in enumerate(classes)}
    y = np.array([class_index[lab] for lab in labels], dtype=np.int64)
    n, d = x.shape
    k = len(classes)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std[std < 1e-12] = 1.0
    xs = (x - mean) / std

    w = np.zeros((k, d))
    b = np.zeros(k)

    def loss_and_grad(wm: np.ndarray, bm: np.ndarray):
        return softmax_loss_grad(wm, bm, xs, y, cfg.l2)

    lr = cfg.lr
    loss, gw, gb = loss_and_grad(w, b)
    history = [loss]
    for _ in range(cfg.epochs):
        while True:
            w_new = w - lr * gw
            b_new = b - lr * gb
            new_loss, new_gw, new_gb = loss_and_grad(w_new, b_new)
            if new_loss <= loss or lr < 1e-12:
                break
            lr *= 0.5
        w, b, loss, gw, gb = w_new, b_new, new_loss, new_gw, new_gb
        history.append(loss)
    model = SoftmaxModel(classes=classes, weights=w, bias=b, mean=mean, std=std)
    return model, history
