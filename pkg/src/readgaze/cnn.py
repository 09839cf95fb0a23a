"""From-scratch convolutional classifiers over gaze windows.

Two small networks classify the three trained behaviors (sequential,
non-sequential, skimming): a 2D network over rendered scanplot windows
and a 1D network over the raw fixation-coordinate subsequence. All layer
math, backpropagation, Adam, and early stopping are implemented here on
plain numpy arrays; matrix products go through BLAS via ``np.dot``.

Training runs in double precision so the central-difference gradient
check is meaningful. Augmentation follows the recognition setup the
package targets: Gaussian noise is added to fixation page coordinates
and the window is re-rasterized fresh each epoch, so the model never
sees the same augmented pixels twice.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from .core import BehaviorLabel, Fixation, TRAINED_LABELS
from .errors import (
    CorruptCheckpoint,
    EmptyValidation,
    ShapeMismatch,
    SingleClass,
)
from .render import RenderConfig, render_points

#: Default raster the 2D model consumes: letter aspect (8.5 : 11) at a
#: resolution small enough for CPU training, large enough to keep the
#: scanpath geometry legible after three rounds of pooling.
MODEL_RENDER = RenderConfig(width_px=51, height_px=66, disc_radius=2)

#: Fixations per sliding window.
WINDOW_K = 10

_CHECKPOINT_MAGIC = b"RGZC"
_CHECKPOINT_VERSION = 1


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class ModelParams:
    """Named weight tensors plus the architecture they belong to."""

    kind: str  # "2d" or "1d"
    in_shape: tuple
    classes: tuple
    tensors: dict

    def copy(self) -> "ModelParams":
        return ModelParams(
            kind=self.kind,
            in_shape=self.in_shape,
            classes=self.classes,
            tensors={k: v.copy() for k, v in self.tensors.items()},
        )

    @property
    def n_parameters(self) -> int:
        return int(sum(v.size for v in self.tensors.values()))


def _he(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def build_2d(
    seed: int = 0,
    in_shape: "tuple[int, int, int]" = (3, MODEL_RENDER.height_px, MODEL_RENDER.width_px),
    classes: tuple = TRAINED_LABELS,
) -> ModelParams:
    """Conv 3->8->16->32 (3x3, stride 1, pad 1, ReLU + 2x2 maxpool each),
    then dense 128 -> 64 -> len(classes)."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x2D])))
    c, h, w = in_shape
    tensors: dict = {}
    chans = (c, 8, 16, 32)
    for i in range(3):
        cin, cout = chans[i], chans[i + 1]
        tensors[f"conv{i + 1}.w"] = _he(rng, (cout, cin, 3, 3), cin * 9)
        tensors[f"conv{i + 1}.b"] = np.zeros(cout)
        h, w = h // 2, w // 2
    flat = 32 * h * w
    dims = (flat, 128, 64, len(classes))
    for i in range(3):
        tensors[f"dense{i + 1}.w"] = _he(rng, (dims[i + 1], dims[i]), dims[i])
        tensors[f"dense{i + 1}.b"] = np.zeros(dims[i + 1])
    return ModelParams(kind="2d", in_shape=tuple(in_shape), classes=tuple(classes), tensors=tensors)


def build_1d(
    seed: int = 0,
    in_shape: "tuple[int, int]" = (2, WINDOW_K),
    classes: tuple = TRAINED_LABELS,
) -> ModelParams:
    """Conv 2->16->32 (kernel 3, pad 1, ReLU), then dense -> len(classes)."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x1D])))
    c, length = in_shape
    tensors = {
        "conv1.w": _he(rng, (16, c, 3), c * 3),
        "conv1.b": np.zeros(16),
        "conv2.w": _he(rng, (32, 16, 3), 16 * 3),
        "conv2.b": np.zeros(32),
        "dense1.w": _he(rng, (len(classes), 32 * length), 32 * length),
        "dense1.b": np.zeros(len(classes)),
    }
    return ModelParams(kind="1d", in_shape=tuple(in_shape), classes=tuple(classes), tensors=tensors)


# ---------------------------------------------------------------------------
# Layer math (forward caches, exact backward)
# ---------------------------------------------------------------------------


def _im2col(x: np.ndarray) -> np.ndarray:
    """(N, C, H, W) -> (N*H*W, C*9) patch matrix for a 3x3/pad-1 conv."""
    n, c, h, w = x.shape
    xp = np.zeros((n, c, h + 2, w + 2))
    xp[:, :, 1 : h + 1, 1 : w + 1] = x
    win = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(2, 3))
    # (N, C, H, W, 3, 3) -> (N, H, W, C, 3, 3) -> (N*H*W, C*9)
    return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(n * h * w, c * 9)


def _col2im(dcols: np.ndarray, shape: tuple) -> np.ndarray:
    """Adjoint of _im2col: scatter-add patch gradients back to (N, C, H, W)."""
    n, c, h, w = shape
    d = dcols.reshape(n, h, w, c, 3, 3).transpose(0, 3, 1, 2, 4, 5)
    dxp = np.zeros((n, c, h + 2, w + 2))
    for ki in range(3):
        for kj in range(3):
            dxp[:, :, ki : ki + h, kj : kj + w] += d[:, :, :, :, ki, kj]
    return dxp[:, :, 1 : h + 1, 1 : w + 1]


def _conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    n, c, h, wd = x.shape
    cout = w.shape[0]
    cols = _im2col(x)
    out = cols @ w.reshape(cout, -1).T + b
    out = out.reshape(n, h, wd, cout).transpose(0, 3, 1, 2)
    return out, (cols, x.shape, w)


def _conv2d_backward(dout: np.ndarray, cache):
    cols, x_shape, w = cache
    n, c, h, wd = x_shape
    cout = w.shape[0]
    flat = dout.transpose(0, 2, 3, 1).reshape(-1, cout)
    dw = (flat.T @ cols).reshape(w.shape)
    db = flat.sum(axis=0)
    dcols = flat @ w.reshape(cout, -1)
    return _col2im(dcols, x_shape), dw, db


def _conv1d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    n, c, length = x.shape
    cout = w.shape[0]
    xp = np.zeros((n, c, length + 2))
    xp[:, :, 1 : length + 1] = x
    win = np.lib.stride_tricks.sliding_window_view(xp, 3, axis=2)
    cols = np.ascontiguousarray(win.transpose(0, 2, 1, 3)).reshape(n * length, c * 3)
    out = cols @ w.reshape(cout, -1).T + b
    out = out.reshape(n, length, cout).transpose(0, 2, 1)
    return out, (cols, x.shape, w)


def _conv1d_backward(dout: np.ndarray, cache):
    cols, x_shape, w = cache
    n, c, length = x_shape
    cout = w.shape[0]
    flat = dout.transpose(0, 2, 1).reshape(-1, cout)
    dw = (flat.T @ cols).reshape(w.shape)
    db = flat.sum(axis=0)
    d = (flat @ w.reshape(cout, -1)).reshape(n, length, c, 3).transpose(0, 2, 1, 3)
    dxp = np.zeros((n, c, length + 2))
    for k in range(3):
        dxp[:, :, k : k + length] += d[:, :, :, k]
    return dxp[:, :, 1 : length + 1], dw, db


def _relu_forward(x: np.ndarray):
    mask = x > 0
    return x * mask, mask


def _maxpool_forward(x: np.ndarray):
    """2x2 max pooling, stride 2, floor semantics (odd edges dropped)."""
    n, c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    xc = x[:, :, : h2 * 2, : w2 * 2]
    xr = xc.reshape(n, c, h2, 2, w2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h2, w2, 4)
    idx = xr.argmax(axis=-1)
    out = np.take_along_axis(xr, idx[..., None], axis=-1)[..., 0]
    return out, (idx, x.shape)


def _maxpool_backward(dout: np.ndarray, cache):
    idx, x_shape = cache
    n, c, h, w = x_shape
    h2, w2 = h // 2, w // 2
    g = np.zeros((n, c, h2, w2, 4))
    np.put_along_axis(g, idx[..., None], dout[..., None], axis=-1)
    dx = np.zeros(x_shape)
    dx[:, :, : h2 * 2, : w2 * 2] = (
        g.reshape(n, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h2 * 2, w2 * 2)
    )
    return dx


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward_cached(params: ModelParams, x: np.ndarray):
    """Logits plus every intermediate cache needed for backward."""
    t = params.tensors
    caches = []
    if params.kind == "2d":
        h = x
        for i in (1, 2, 3):
            h, c_conv = _conv2d_forward(h, t[f"conv{i}.w"], t[f"conv{i}.b"])
            h, c_relu = _relu_forward(h)
            h, c_pool = _maxpool_forward(h)
            caches.append((c_conv, c_relu, c_pool))
        n = x.shape[0]
        shape_before_flat = h.shape
        h = h.reshape(n, -1)
        for i, act in ((1, True), (2, True), (3, False)):
            w, b = t[f"dense{i}.w"], t[f"dense{i}.b"]
            pre = h @ w.T + b
            if act:
                post, mask = _relu_forward(pre)
                caches.append((h, w, mask))
                h = post
            else:
                caches.append((h, w, None))
                h = pre
        return h, (caches, shape_before_flat)
    # 1d
    h = x
    for i in (1, 2):
        h, c_conv = _conv1d_forward(h, t[f"conv{i}.w"], t[f"conv{i}.b"])
        h, c_relu = _relu_forward(h)
        caches.append((c_conv, c_relu))
    n = x.shape[0]
    shape_before_flat = h.shape
    h = h.reshape(n, -1)
    w, b = t["dense1.w"], t["dense1.b"]
    caches.append((h, w, None))
    return h @ w.T + b, (caches, shape_before_flat)


def _backward_from_logits(params: ModelParams, dlogits: np.ndarray, cache) -> dict:
    caches, shape_before_flat = cache
    t = params.tensors
    grads = {k: None for k in t}
    d = dlogits
    if params.kind == "2d":
        for i in (3, 2, 1):
            h_in, w, mask = caches[2 + i]
            if mask is not None:
                d = d * mask
            grads[f"dense{i}.w"] = d.T @ h_in
            grads[f"dense{i}.b"] = d.sum(axis=0)
            d = d @ w
        d = d.reshape(shape_before_flat)
        for i in (3, 2, 1):
            c_conv, c_relu, c_pool = caches[i - 1]
            d = _maxpool_backward(d, c_pool)
            d = d * c_relu
            d, dw, db = _conv2d_backward(d, c_conv)
            grads[f"conv{i}.w"] = dw
            grads[f"conv{i}.b"] = db
        return grads
    h_in, w, _ = caches[2]
    grads["dense1.w"] = d.T @ h_in
    grads["dense1.b"] = d.sum(axis=0)
    d = (d @ w).reshape(shape_before_flat)
    for i in (2, 1):
        c_conv, c_relu = caches[i - 1]
        d = d * c_relu
        d, dw, db = _conv1d_backward(d, c_conv)
        grads[f"conv{i}.w"] = dw
        grads[f"conv{i}.b"] = db
    return grads


def _check_shape(params: ModelParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != len(params.in_shape) + 1 or x.shape[1:] != params.in_shape:
        raise ShapeMismatch(
            f"expected batch of shape (n, {', '.join(map(str, params.in_shape))}), got {x.shape}"
        )
    return x


# ---------------------------------------------------------------------------
# Public forward / backward / loss
# ---------------------------------------------------------------------------


def forward(params: ModelParams, x: np.ndarray) -> np.ndarray:
    """Class probabilities for a batch; rows sum to 1."""
    x = _check_shape(params, x)
    logits, _ = _forward_cached(params, x)
    return _softmax(logits)


def loss_and_grads(params: ModelParams, x: np.ndarray, y: np.ndarray):
    """Mean cross-entropy and its gradient w.r.t. every tensor."""
    x = _check_shape(params, x)
    y = np.asarray(y, dtype=np.int64)
    logits, cache = _forward_cached(params, x)
    p = _softmax(logits)
    n = x.shape[0]
    loss = float(-np.mean(np.log(np.clip(p[np.arange(n), y], 1e-300, None))))
    one_hot = np.zeros_like(p)
    one_hot[np.arange(n), y] = 1.0
    dlogits = (p - one_hot) / n
    return loss, _backward_from_logits(params, dlogits, cache)


def backward(params: ModelParams, x: np.ndarray, labels: Sequence[BehaviorLabel]) -> dict:
    """Gradients of mean cross-entropy for a labeled batch."""
    index = {c: i for i, c in enumerate(params.classes)}
    y = np.array([index[lab] for lab in labels], dtype=np.int64)
    _, grads = loss_and_grads(params, x, y)
    return grads


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0

    @classmethod
    def init(cls, params: ModelParams) -> "AdamState":
        return cls(
            m={k: np.zeros_like(t) for k, t in params.tensors.items()},
            v={k: np.zeros_like(t) for k, t in params.tensors.items()},
        )


def adam_step(
    params: ModelParams,
    grads: dict,
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> None:
    state.step += 1
    t = state.step
    for k, w in params.tensors.items():
        g = grads[k]
        if weight_decay and k.endswith(".w"):
            g = g + weight_decay * w
        state.m[k] = beta1 * state.m[k] + (1 - beta1) * g
        state.v[k] = beta2 * state.v[k] + (1 - beta2) * (g * g)
        mhat = state.m[k] / (1 - beta1**t)
        vhat = state.v[k] / (1 - beta2**t)
        w -= lr * mhat / (np.sqrt(vhat) + eps)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 5
    noise_sigma: float = 0.005
    seed: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.max_epochs <= 50:
            raise ValueError(f"max_epochs must be in [1, 50], got {self.max_epochs}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")


@dataclass(eq=False)
class WindowExample:
    """One k-fixation training window: raw page coordinates plus label."""

    xs: np.ndarray
    ys: np.ndarray
    label: BehaviorLabel
    participant_id: str


def window_examples_from_fixations(
    fixations: Sequence[Fixation],
    label: BehaviorLabel,
    participant_id: str,
    k: int = WINDOW_K,
    stride: Optional[int] = None,
) -> list:
    """Chop a fixation run into k-sized windows (default non-overlapping)."""
    step = stride or k
    xs = np.array([f.centroid.x for f in fixations])
    ys = np.array([f.centroid.y for f in fixations])
    out = []
    for start in range(0, len(fixations) - k + 1, step):
        out.append(
            WindowExample(
                xs=xs[start : start + k].copy(),
                ys=ys[start : start + k].copy(),
                label=label,
                participant_id=participant_id,
            )
        )
    return out


def _classes_present(examples: Sequence[WindowExample]) -> tuple:
    present = {e.label for e in examples}
    classes = tuple(c for c in TRAINED_LABELS if c in present)
    if len(classes) < 2:
        raise SingleClass(f"training needs at least 2 classes, got {len(classes)}")
    return classes


def _split_validation(examples: Sequence[WindowExample], val_participant: Optional[str]):
    if val_participant is None:
        val_participant = max({e.participant_id for e in examples})
    train = [e for e in examples if e.participant_id != val_participant]
    val = [e for e in examples if e.participant_id == val_participant]
    if not val:
        raise EmptyValidation(f"no examples for validation participant {val_participant!r}")
    if not train:
        raise EmptyValidation("validation split consumed every training example")
    return train, val


def _render_batch(examples: Sequence[WindowExample], cfg: RenderConfig) -> np.ndarray:
    return np.stack([render_points(e.xs, e.ys, cfg) for e in examples])


def _coord_batch(examples: Sequence[WindowExample]) -> np.ndarray:
    return np.stack([np.stack([e.xs, e.ys]) for e in examples])


def _epoch_minibatches(n: int, batch_size: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def _eval_loss(params: ModelParams, x: np.ndarray, y: np.ndarray, batch: int = 256) -> float:
    total = 0.0
    n = x.shape[0]
    for start in range(0, n, batch):
        xb = x[start : start + batch]
        logits, _ = _forward_cached(params, xb)
        p = _softmax(logits)
        yb = y[start : start + batch]
        total += float(
            -np.log(np.clip(p[np.arange(xb.shape[0]), yb], 1e-300, None)).sum()
        )
    return total / n


def _train_loop(
    params: ModelParams,
    make_train_inputs,
    x_val: np.ndarray,
    y_train: np.ndarray,
    y_val: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator,
):
    state = AdamState.init(params)
    best = params.copy()
    best_val = float("inf")
    since_best = 0
    history = []
    for epoch in range(cfg.max_epochs):
        x_train = make_train_inputs(rng)
        epoch_loss = 0.0
        seen = 0
        for idx in _epoch_minibatches(x_train.shape[0], cfg.batch_size, rng):
            loss, grads = loss_and_grads(params, x_train[idx], y_train[idx])
            adam_step(
                params,
                grads,
                state,
                lr=cfg.lr,
                beta1=cfg.beta1,
                beta2=cfg.beta2,
                eps=cfg.eps,
                weight_decay=cfg.weight_decay,
            )
            epoch_loss += loss * idx.size
            seen += idx.size
        val_loss = _eval_loss(params, x_val, y_val)
        history.append(
            {"epoch": epoch, "train_loss": epoch_loss / max(seen, 1), "val_loss": val_loss}
        )
        if val_loss < best_val - 1e-12:
            best_val = val_loss
            best = params.copy()
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break
    return best, history


def train(
    examples: Sequence[WindowExample],
    config: Optional[TrainConfig] = None,
    val_participant: Optional[str] = None,
    render_config: RenderConfig = MODEL_RENDER,
):
    """Train the 2D scanplot model; returns (best params, epoch history).

    Validation windows are held out by participant and rendered without
    augmentation; training windows are re-rendered each epoch from
    noise-jittered coordinates when ``noise_sigma > 0``.
    """
    cfg = config or TrainConfig()
    train_ex, val_ex = _split_validation(examples, val_participant)
    classes = _classes_present(train_ex)
    index = {c: i for i, c in enumerate(classes)}
    y_train = np.array([index[e.label] for e in train_ex], dtype=np.int64)
    y_val = np.array([index.get(e.label, -1) for e in val_ex], dtype=np.int64)
    keep = y_val >= 0
    x_val = _render_batch(val_ex, render_config)[keep]
    if x_val.shape[0] == 0:
        raise EmptyValidation("validation split has no examples of any trained class")
    y_val = y_val[keep]
    params = build_2d(
        seed=cfg.seed,
        in_shape=(3, render_config.height_px, render_config.width_px),
        classes=classes,
    )
    base = None

    def make_train_inputs(rng: np.random.Generator) -> np.ndarray:
        nonlocal base
        if cfg.noise_sigma <= 0:
            if base is None:
                base = _render_batch(train_ex, render_config)
            return base
        jittered = [
            WindowExample(
                xs=e.xs + rng.normal(0.0, cfg.noise_sigma, size=e.xs.shape),
                ys=e.ys + rng.normal(0.0, cfg.noise_sigma, size=e.ys.shape),
                label=e.label,
                participant_id=e.participant_id,
            )
            for e in train_ex
        ]
        return _render_batch(jittered, render_config)

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, 0x7E])))
    return _train_loop(params, make_train_inputs, x_val, y_train, y_val, cfg, rng)


def train_1d(
    examples: Sequence[WindowExample],
    config: Optional[TrainConfig] = None,
    val_participant: Optional[str] = None,
):
    """Train the 1D raw-coordinate model; same contract as ``train``."""
    cfg = config or TrainConfig()
    train_ex, val_ex = _split_validation(examples, val_participant)
    classes = _classes_present(train_ex)
    index = {c: i for i, c in enumerate(classes)}
    y_train = np.array([index[e.label] for e in train_ex], dtype=np.int64)
    y_val = np.array([index.get(e.label, -1) for e in val_ex], dtype=np.int64)
    keep = y_val >= 0
    x_val = _coord_batch(val_ex)[keep]
    if x_val.shape[0] == 0:
        raise EmptyValidation("validation split has no examples of any trained class")
    y_val = y_val[keep]
    k = len(examples[0].xs)
    params = build_1d(seed=cfg.seed, in_shape=(2, k), classes=classes)
    base = _coord_batch(train_ex)

    def make_train_inputs(rng: np.random.Generator) -> np.ndarray:
        if cfg.noise_sigma <= 0:
            return base
        return base + rng.normal(0.0, cfg.noise_sigma, size=base.shape)

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, 0x7E])))
    return _train_loop(params, make_train_inputs, x_val, y_train, y_val, cfg, rng)


# ---------------------------------------------------------------------------
# Streaming prediction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StreamPrediction:
    fixation_index: int
    label: BehaviorLabel
    probabilities: tuple


def predict_stream(
    params: ModelParams,
    fixations: Sequence[Fixation],
    render_config: RenderConfig = MODEL_RENDER,
    k: int = WINDOW_K,
) -> Iterator[StreamPrediction]:
    """One prediction per fixation once k are buffered (sliding window).

    Yields nothing for the first k-1 fixations; the stream is silent,
    not in error, before the buffer fills.
    """
    xs = np.empty(len(fixations))
    ys = np.empty(len(fixations))
    for i, f in enumerate(fixations):
        xs[i] = f.centroid.x
        ys[i] = f.centroid.y
        if i < k - 1:
            continue
        if params.kind == "2d":
            x = render_points(xs[i - k + 1 : i + 1], ys[i - k + 1 : i + 1], render_config)[None]
        else:
            x = np.stack([xs[i - k + 1 : i + 1], ys[i - k + 1 : i + 1]])[None]
        probs = forward(params, x)[0]
        yield StreamPrediction(
            fixation_index=i,
            label=params.classes[int(np.argmax(probs))],
            probabilities=tuple(float(p) for p in probs),
        )


# ---------------------------------------------------------------------------
# Checkpoints: versioned little-endian binary
# ---------------------------------------------------------------------------


def history_table(history: Sequence[dict]) -> str:
    """Epoch history as a tab-delimited table (one row per epoch)."""
    lines = ["epoch\ttrain_loss\tval_loss"]
    for row in history:
        lines.append(
            f"{row['epoch']}\t{row['train_loss']:.6f}\t{row['val_loss']:.6f}"
        )
    return "\n".join(lines)


def save_checkpoint(params: ModelParams, path: "str | Path") -> None:
    """Write magic, version, architecture header, then a named tensor table.

    All integers are little-endian u32/u64; tensor data is row-major
    float64, little-endian.
    """
    meta = json.dumps(
        {
            "kind": params.kind,
            "in_shape": list(params.in_shape),
            "classes": [c.value for c in params.classes],
        }
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", _CHECKPOINT_VERSION))
        f.write(struct.pack("<I", len(meta)))
        f.write(meta)
        f.write(struct.pack("<I", len(params.tensors)))
        for name in sorted(params.tensors):
            t = params.tensors[name]
            nb = name.encode("utf-8")
            f.write(struct.pack("<I", len(nb)))
            f.write(nb)
            f.write(struct.pack("<I", t.ndim))
            for dim in t.shape:
                f.write(struct.pack("<I", dim))
            data = np.ascontiguousarray(t, dtype="<f8").tobytes()
            f.write(struct.pack("<Q", len(data)))
            f.write(data)


def load_checkpoint(path: "str | Path") -> ModelParams:
    def read(f, n: int) -> bytes:
        b = f.read(n)
        if len(b) != n:
            raise CorruptCheckpoint(f"truncated checkpoint {path}")
        return b

    with open(path, "rb") as f:
        if read(f, 4) != _CHECKPOINT_MAGIC:
            raise CorruptCheckpoint(f"bad magic in {path}")
        (version,) = struct.unpack("<I", read(f, 4))
        if version != _CHECKPOINT_VERSION:
            raise CorruptCheckpoint(f"unsupported checkpoint version {version}")
        (meta_len,) = struct.unpack("<I", read(f, 4))
        meta = json.loads(read(f, meta_len).decode("utf-8"))
        (n_tensors,) = struct.unpack("<I", read(f, 4))
        tensors = {}
        for _ in range(n_tensors):
            (name_len,) = struct.unpack("<I", read(f, 4))
            name = read(f, name_len).decode("utf-8")
            (ndim,) = struct.unpack("<I", read(f, 4))
            shape = tuple(struct.unpack("<I", read(f, 4))[0] for _ in range(ndim))
            (nbytes,) = struct.unpack("<Q", read(f, 8))
            arr = np.frombuffer(read(f, nbytes), dtype="<f8").astype(np.float64)
            tensors[name] = arr.reshape(shape)
    return ModelParams(
        kind=meta["kind"],
        in_shape=tuple(meta["in_shape"]),
        classes=tuple(BehaviorLabel(v) for v in meta["classes"]),
        tensors=tensors,
    )
