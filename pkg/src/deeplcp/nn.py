"""From-scratch CNN: full-width convolutions of heights 5/6/7 (2 filters
each), max-over-time pooling, dense softmax head, trained by backprop.

The input is the 18x13 reduced semantic matrix. Feature maps have lengths
18-h+1 = 14/13/12; pooling yields a 6-vector; the dense layer maps it to
two logits whose softmax gives (p_affected, p_unaffected). All arithmetic
is double precision so analytic gradients can be checked against central
finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (ConfigError, EmptyMap, FormatVersionError, ShapeError)
from .rules import SLOTS
from .semantic import REDUCED_ROWS, SemanticMatrix

FILTER_HEIGHTS = (5, 6, 7)
FILTERS_PER_HEIGHT = 2
POOLED_SIZE = len(FILTER_HEIGHTS) * FILTERS_PER_HEIGHT  # 6
CLASSES = 2          # index 0 = affected, 1 = unaffected
PROB_FLOOR = 1e-12

MODEL_MAGIC = "deeplcp-model"
MODEL_VERSION = 1


def relu(x):
    return np.maximum(x, 0.0)


def identity(x):
    return x


@dataclass
class ConvFilter:
    height: int
    weights: np.ndarray   # (height, 13)
    bias: float


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    epochs: int = 200
    batch_size: int = 16
    optimizer: str = "adam"   # "adam" | "sgd"
    seed: int = 0
    weight_decay: float = 0.0   # L2 on weight tensors (not biases)
    lr_decay: float = 1.0       # lr multiplier reached at the final epoch
    bias_init: float = 0.0      # initial conv bias

    def validate(self):
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")
        if self.epochs <= 0:
            raise ConfigError("epoch count must be positive")
        if self.batch_size <= 0:
            raise ConfigError("batch size must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.weight_decay < 0:
            raise ConfigError("weight decay must be nonnegative")
        if not 0 < self.lr_decay <= 1:
            raise ConfigError("lr decay must lie in (0, 1]")


def benchmark_config(seed: int = 0) -> TrainConfig:
    """Training recipe used by the paper-scale synthetic benchmark."""
    return TrainConfig(lr=3e-3, epochs=600, batch_size=8, optimizer="adam",
                       seed=seed, weight_decay=3e-3, lr_decay=0.05,
                       bias_init=0.1)


@dataclass
class CnnModel:
    filters: list                 # 6 ConvFilter: heights 5,5,6,6,7,7
    dense_w: np.ndarray           # (2, 6)
    dense_b: np.ndarray           # (2,)
    config: TrainConfig = field(default_factory=TrainConfig)


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    train_accuracy: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_accuracy: list = field(default_factory=list)


@dataclass(frozen=True)
class Prediction:
    p_affected: float
    p_unaffected: float


@dataclass
class Gradients:
    filter_w: list    # 6 arrays matching filter weight shapes
    filter_b: np.ndarray   # (6,)
    dense_w: np.ndarray
    dense_b: np.ndarray


def _glorot(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_model(config: TrainConfig | None = None,
               seed: int | None = None) -> CnnModel:
    config = config or TrainConfig()
    config.validate()
    rng = np.random.default_rng(config.seed if seed is None else seed)
    filters = []
    for h in FILTER_HEIGHTS:
        for _ in range(FILTERS_PER_HEIGHT):
            w = _glorot(rng, (h, SLOTS), fan_in=h * SLOTS, fan_out=1)
            filters.append(ConvFilter(height=h, weights=w,
                                      bias=config.bias_init))
    dense_w = _glorot(rng, (CLASSES, POOLED_SIZE),
                      fan_in=POOLED_SIZE, fan_out=CLASSES)
    dense_b = np.zeros(CLASSES)
    return CnnModel(filters=filters, dense_w=dense_w, dense_b=dense_b,
                    config=config)


# ----------------------------------------------------------- forward pieces

def conv_forward(matrix: np.ndarray, filt: ConvFilter,
                 activation=relu) -> np.ndarray:
    """1-D feature map of a full-width filter slid down the matrix,
    stride 1, no padding; length rows - height + 1."""
    x = np.asarray(matrix, dtype=float)
    if x.ndim != 2 or x.shape[1] != filt.weights.shape[1]:
        raise ShapeError(
            f"input width {x.shape} does not match filter "
            f"{filt.weights.shape}")
    h = filt.height
    if x.shape[0] < h:
        raise ShapeError("input has fewer rows than the filter height")
    positions = x.shape[0] - h + 1
    out = np.empty(positions)
    for t in range(positions):
        out[t] = np.sum(x[t:t + h] * filt.weights) + filt.bias
    return activation(out)


def max_over_time(feature_map) -> float:
    fm = np.asarray(feature_map, dtype=float)
    if fm.size == 0:
        raise EmptyMap("feature map is empty")
    # np.argmax picks the first maximum; gradient routing relies on this
    return float(fm[np.argmax(fm)])


def _softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _as_input_batch(inputs) -> np.ndarray:
    arrays = []
    for x in inputs:
        if isinstance(x, SemanticMatrix):
            x = x.data
        x = np.asarray(x, dtype=float)
        if x.shape != (REDUCED_ROWS, SLOTS):
            raise ShapeError(
                f"expected {REDUCED_ROWS}x{SLOTS} input, got {x.shape}")
        arrays.append(x)
    return np.stack(arrays)


@dataclass
class _Cache:
    x: np.ndarray          # (B, 18, 13)
    windows: list          # per height: (B, P_h, h*13)
    pre: list              # per height: (B, P_h, 2) pre-activation
    argmax: list           # per height: (B, 2) pooled positions
    pooled: np.ndarray     # (B, 6)
    probs: np.ndarray      # (B, 2)


def _height_params(model: CnnModel, hi: int):
    fs = model.filters[2 * hi:2 * hi + 2]
    w = np.stack([f.weights.reshape(-1) for f in fs])      # (2, h*13)
    b = np.array([f.bias for f in fs])
    return w, b


def _forward_batch(model: CnnModel, x: np.ndarray) -> _Cache:
    B = x.shape[0]
    windows_all, pre_all, arg_all = [], [], []
    pooled = np.empty((B, POOLED_SIZE))
    for hi, h in enumerate(FILTER_HEIGHTS):
        view = np.lib.stride_tricks.sliding_window_view(x, (h, SLOTS),
                                                        axis=(1, 2))
        positions = REDUCED_ROWS - h + 1
        windows = view.reshape(B, positions, h * SLOTS)
        w, b = _height_params(model, hi)
        pre = windows @ w.T + b                     # (B, P, 2)
        act = relu(pre)
        arg = np.argmax(act, axis=1)                # (B, 2), first max
        pooled[:, 2 * hi:2 * hi + 2] = np.take_along_axis(
            act, arg[:, None, :], axis=1)[:, 0, :]
        windows_all.append(windows)
        pre_all.append(pre)
        arg_all.append(arg)
    logits = pooled @ model.dense_w.T + model.dense_b
    probs = _softmax(logits)
    return _Cache(x=x, windows=windows_all, pre=pre_all, argmax=arg_all,
                  pooled=pooled, probs=probs)


def forward(model: CnnModel, matrix):
    """Prediction plus the cache backward() needs."""
    cache = _forward_batch(model, _as_input_batch([matrix]))
    p = cache.probs[0]
    return Prediction(p_affected=float(p[0]),
                      p_unaffected=float(p[1])), cache


def predict(model: CnnModel, matrix) -> Prediction:
    pred, _cache = forward(model, matrix)
    return pred


def label_index(label: str) -> int:
    if label == "affected":
        return 0
    if label == "unaffected":
        return 1
    raise ConfigError(f"unknown label {label!r}")


def loss(pred: Prediction, label: str) -> float:
    p = (pred.p_affected, pred.p_unaffected)[label_index(label)]
    return -np.log(max(p, PROB_FLOOR))


def _batch_loss(probs: np.ndarray, label_idx: np.ndarray) -> float:
    p_true = probs[np.arange(len(label_idx)), label_idx]
    return float(np.mean(-np.log(np.maximum(p_true, PROB_FLOOR))))


def _backward_batch(model: CnnModel, cache: _Cache,
                    label_idx: np.ndarray) -> Gradients:
    """Gradients of the mean cross-entropy over the batch."""
    B = cache.x.shape[0]
    onehot = np.zeros((B, CLASSES))
    onehot[np.arange(B), label_idx] = 1.0
    dlogits = (cache.probs - onehot) / B

    dense_w_grad = dlogits.T @ cache.pooled
    dense_b_grad = dlogits.sum(axis=0)
    dpooled = dlogits @ model.dense_w                  # (B, 6)

    filter_w = []
    filter_b = np.zeros(POOLED_SIZE)
    for hi, h in enumerate(FILTER_HEIGHTS):
        windows = cache.windows[hi]
        pre = cache.pre[hi]
        arg = cache.argmax[hi]
        for j in range(FILTERS_PER_HEIGHT):
            f_index = 2 * hi + j
            rows = np.arange(B)
            pre_star = pre[rows, arg[:, j], j]
            # gradient flows only through the pooled (first-argmax) window
            dpre = dpooled[:, f_index] * (pre_star > 0)
            win_star = windows[rows, arg[:, j], :]     # (B, h*13)
            filter_w.append((dpre @ win_star).reshape(h, SLOTS))
            filter_b[f_index] = dpre.sum()
    return Gradients(filter_w=filter_w, filter_b=filter_b,
                     dense_w=dense_w_grad, dense_b=dense_b_grad)


def backward(model: CnnModel, cache: _Cache, label: str) -> Gradients:
    return _backward_batch(model, cache, np.array([label_index(label)]))


# ------------------------------------------------------------- optimizers

class AdamState:
    def __init__(self, shapes, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]

    def step(self, params, grads):
        """Update params (list of arrays) in place."""
        self.t += 1
        b1t = 1 - self.beta1 ** self.t
        b2t = 1 - self.beta2 ** self.t
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g * g
            p -= self.lr * (self.m[i] / b1t) / (np.sqrt(self.v[i] / b2t)
                                                + self.eps)


class SgdState:
    def __init__(self, shapes, lr):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


def _param_list(model: CnnModel):
    params = [f.weights for f in model.filters]
    params.append(np.array([f.bias for f in model.filters]))
    params.append(model.dense_w)
    params.append(model.dense_b)
    return params


def _grad_list(g: Gradients):
    return list(g.filter_w) + [g.filter_b, g.dense_w, g.dense_b]


def _write_back_biases(model: CnnModel, bias_vec: np.ndarray):
    for f, b in zip(model.filters, bias_vec):
        f.bias = float(b)


def train(train_set, val_set=None, config: TrainConfig | None = None,
          model: CnnModel | None = None):
    """Mini-batch training; deterministic given the config seed.

    train_set / val_set: sequences of (18x13 matrix or SemanticMatrix,
    label string). Returns (model, TrainHistory).
    """
    config = config or TrainConfig()
    config.validate()
    if not train_set:
        raise ConfigError("empty training set")
    if model is None:
        model = init_model(config)
    else:
        model.config = config

    x_train = _as_input_batch([m for m, _ in train_set])
    y_train = np.array([label_index(lab) for _, lab in train_set])
    if val_set:
        x_val = _as_input_batch([m for m, _ in val_set])
        y_val = np.array([label_index(lab) for _, lab in val_set])

    params = _param_list(model)
    if config.optimizer == "adam":
        opt = AdamState([p.shape for p in params], lr=config.lr)
    else:
        opt = SgdState([p.shape for p in params], lr=config.lr)
    bias_vec = params[len(model.filters)]

    history = TrainHistory()
    rng = np.random.default_rng(config.seed)
    n = len(train_set)
    for epoch in range(config.epochs):
        opt.lr = config.lr * config.lr_decay ** (epoch / config.epochs)
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            cache = _forward_batch(model, x_train[idx])
            grads = _backward_batch(model, cache, y_train[idx])
            if config.weight_decay > 0:
                for i, f in enumerate(model.filters):
                    grads.filter_w[i] = (grads.filter_w[i]
                                         + config.weight_decay * f.weights)
                grads.dense_w = (grads.dense_w
                                 + config.weight_decay * model.dense_w)
            opt.step(params, _grad_list(grads))
            _write_back_biases(model, bias_vec)

        cache = _forward_batch(model, x_train)
        history.train_loss.append(_batch_loss(cache.probs, y_train))
        history.train_accuracy.append(
            float(np.mean(np.argmax(cache.probs, axis=1) == y_train)))
        if val_set:
            vcache = _forward_batch(model, x_val)
            history.val_loss.append(_batch_loss(vcache.probs, y_val))
            history.val_accuracy.append(
                float(np.mean(np.argmax(vcache.probs, axis=1) == y_val)))
    return model, history


def predict_batch(model: CnnModel, matrices) -> np.ndarray:
    """p_affected for each input."""
    cache = _forward_batch(model, _as_input_batch(matrices))
    return cache.probs[:, 0]


# --------------------------------------------------------------- model IO

def _fmt(x: float) -> str:
    return f"{x:.17g}"


def save_model(model: CnnModel, path):
    lines = [MODEL_MAGIC, f"version {MODEL_VERSION}"]
    c = model.config
    lines.append(f"config {c.optimizer} {_fmt(c.lr)} {c.epochs} "
                 f"{c.batch_size} {c.seed} {_fmt(c.weight_decay)} "
                 f"{_fmt(c.lr_decay)} {_fmt(c.bias_init)}")
    for i, f in enumerate(model.filters):
        lines.append(f"filter {i} {f.height} {_fmt(f.bias)}")
        for row in f.weights:
            lines.append(" ".join(_fmt(x) for x in row))
    lines.append("dense_w")
    for row in model.dense_w:
        lines.append(" ".join(_fmt(x) for x in row))
    lines.append("dense_b")
    lines.append(" ".join(_fmt(x) for x in model.dense_b))
    lines.append("end")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> CnnModel:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != MODEL_MAGIC:
        raise FormatVersionError("not a model file (bad magic header)")
    if len(lines) < 2 or lines[1] != f"version {MODEL_VERSION}":
        raise FormatVersionError(f"unsupported model format version: "
                                 f"{lines[1] if len(lines) > 1 else '?'}")
    parts = lines[2].split()
    if parts[0] != "config":
        raise FormatVersionError("missing config line")
    config = TrainConfig(optimizer=parts[1], lr=float(parts[2]),
                         epochs=int(parts[3]), batch_size=int(parts[4]),
                         seed=int(parts[5]), weight_decay=float(parts[6]),
                         lr_decay=float(parts[7]), bias_init=float(parts[8]))
    i = 3
    filters = []
    for _ in range(POOLED_SIZE):
        head = lines[i].split()
        if head[0] != "filter":
            raise FormatVersionError(f"expected filter header at line {i+1}")
        height, bias = int(head[2]), float(head[3])
        i += 1
        rows = []
        for _ in range(height):
            rows.append([float(x) for x in lines[i].split()])
            i += 1
        filters.append(ConvFilter(height=height, weights=np.array(rows),
                                  bias=bias))
    if lines[i] != "dense_w":
        raise FormatVersionError("missing dense_w section")
    i += 1
    dense_w = []
    for _ in range(CLASSES):
        dense_w.append([float(x) for x in lines[i].split()])
        i += 1
    if lines[i] != "dense_b":
        raise FormatVersionError("missing dense_b section")
    i += 1
    dense_b = np.array([float(x) for x in lines[i].split()])
    return CnnModel(filters=filters, dense_w=np.array(dense_w),
                    dense_b=dense_b, config=config)
