"""Classical comparison classifiers over 18-dimensional row-sum features:
KNN (k=5), CART decision tree, random forest, and a small dense ANN
(18 -> 10 relu with dropout -> 2 softmax)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (ConfigError, EmptyData, EmptyIndex, KTooLarge,
                     ShapeError)
from .nn import (PROB_FLOOR, AdamState, Prediction, _softmax, label_index,
                 relu)
from .semantic import REDUCED_ROWS, SemanticMatrix

N_FEATURES = REDUCED_ROWS  # 18


def featurize(reduced) -> np.ndarray:
    """One feature per reduced-matrix row: the row sum."""
    data = reduced.data if isinstance(reduced, SemanticMatrix) else \
        np.asarray(reduced, dtype=float)
    if data.ndim != 2 or data.shape[0] != N_FEATURES:
        raise ShapeError(f"expected {N_FEATURES} rows, got {data.shape}")
    return data.sum(axis=1)


# --------------------------------------------------------------------- KNN

@dataclass
class KnnIndex:
    points: np.ndarray    # (n, 18)
    labels: list

    @classmethod
    def fit(cls, data):
        if not data:
            raise EmptyData("empty training set")
        return cls(points=np.stack([np.asarray(x, dtype=float)
                                    for x, _ in data]),
                   labels=[lab for _, lab in data])


def knn_predict(index: KnnIndex, query, k: int):
    """Majority label among the k nearest by Euclidean distance; distance
    ties break toward the lower training index. Returns (label, fraction
    of the k votes that are 'affected')."""
    if len(index.labels) == 0:
        raise EmptyIndex("empty index")
    if k > len(index.labels):
        raise KTooLarge(f"k={k} exceeds index size {len(index.labels)}")
    if k < 1 or k % 2 == 0:
        raise ConfigError("k must be a positive odd number")
    q = np.asarray(query, dtype=float)
    dist = np.sqrt(((index.points - q) ** 2).sum(axis=1))
    # stable sort on distance keeps lower training indices first on ties
    nearest = np.argsort(dist, kind="stable")[:k]
    votes = sum(1 for i in nearest if index.labels[i] == "affected")
    score = votes / k
    return ("affected" if votes * 2 > k else "unaffected"), score


# ------------------------------------------------------------------- trees

@dataclass
class TreeNode:
    # leaf: counts set, feature is None; internal: feature/threshold/children
    n_affected: int
    n_total: int
    feature: int | None = None
    threshold: float = 0.0
    left: "TreeNode | None" = None    # feature value < threshold
    right: "TreeNode | None" = None


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 12
    min_leaf: int = 2


def _gini(n_affected: int, n_total: int) -> float:
    if n_total == 0:
        return 0.0
    p = n_affected / n_total
    return 2.0 * p * (1.0 - p)


def _best_split(x: np.ndarray, y: np.ndarray, features):
    """Lowest weighted Gini over candidate splits; candidates are midpoints
    between consecutive distinct values. Ties break by (feature,
    threshold)."""
    best = None   # (gini, feature, threshold)
    n = len(y)
    for f in features:
        values = x[:, f]
        order = np.argsort(values, kind="stable")
        sv, sy = values[order], y[order]
        left_aff = 0
        total_aff = int(y.sum())
        for i in range(1, n):
            left_aff += int(sy[i - 1])
            if sv[i] == sv[i - 1]:
                continue
            threshold = (sv[i - 1] + sv[i]) / 2.0
            g = (i * _gini(left_aff, i)
                 + (n - i) * _gini(total_aff - left_aff, n - i)) / n
            key = (g, f, threshold)
            if best is None or key < best:
                best = key
    return best


def tree_fit(data, params: TreeParams = TreeParams(),
             rng=None, feature_frac: float = 1.0) -> TreeNode:
    """CART with Gini impurity. rng/feature_frac enable the forest's
    per-split feature subsampling; defaults use every feature."""
    if not data:
        raise EmptyData("empty training set")
    x = np.stack([np.asarray(v, dtype=float) for v, _ in data])
    y = np.array([1 if lab == "affected" else 0 for _, lab in data])
    n_features = x.shape[1]
    n_sub = max(1, int(round(feature_frac * n_features)))

    def grow(idx, depth):
        node_y = y[idx]
        node = TreeNode(n_affected=int(node_y.sum()), n_total=len(idx))
        if (depth >= params.max_depth
                or node.n_affected in (0, node.n_total)
                or len(idx) < 2 * params.min_leaf):
            return node
        if rng is not None and n_sub < n_features:
            features = sorted(rng.choice(n_features, size=n_sub,
                                         replace=False).tolist())
        else:
            features = range(n_features)
        best = _best_split(x[idx], node_y, features)
        if best is None:
            return node
        g, f, threshold = best
        if g >= _gini(node.n_affected, node.n_total):
            return node   # no split improves impurity
        mask = x[idx, f] < threshold
        left_idx, right_idx = idx[mask], idx[~mask]
        if len(left_idx) < params.min_leaf or len(right_idx) < params.min_leaf:
            return node
        node.feature = int(f)
        node.threshold = float(threshold)
        node.left = grow(left_idx, depth + 1)
        node.right = grow(right_idx, depth + 1)
        return node

    return grow(np.arange(len(data)), 0)


def tree_predict(tree: TreeNode, query):
    """(label, leaf probability of 'affected')."""
    q = np.asarray(query, dtype=float)
    node = tree
    while node.feature is not None:
        node = node.left if q[node.feature] < node.threshold else node.right
    p = node.n_affected / node.n_total if node.n_total else 0.0
    return ("affected" if p >= 0.5 else "unaffected"), p


# ------------------------------------------------------------------ forest

@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 50
    max_depth: int = 12
    min_leaf: int = 2
    feature_frac: float = 0.7
    seed: int = 0
    bootstrap: bool = True


@dataclass
class Forest:
    trees: list
    params: ForestParams


def forest_fit(data, params: ForestParams = ForestParams()) -> Forest:
    if not data:
        raise EmptyData("empty training set")
    trees = []
    tree_params = TreeParams(max_depth=params.max_depth,
                             min_leaf=params.min_leaf)
    for t in range(params.n_trees):
        rng = np.random.default_rng(params.seed + t)
        if params.bootstrap:
            idx = rng.integers(0, len(data), size=len(data))
            sample = [data[i] for i in idx]
        else:
            sample = list(data)
        trees.append(tree_fit(sample, tree_params, rng=rng,
                              feature_frac=params.feature_frac))
    return Forest(trees=trees, params=params)


def forest_predict(forest: Forest, query):
    """Majority vote; an exact tie goes to 'unaffected'. Returns (label,
    fraction of trees voting affected)."""
    votes = sum(1 for tree in forest.trees
                if tree_predict(tree, query)[0] == "affected")
    frac = votes / len(forest.trees)
    return ("affected" if votes * 2 > len(forest.trees) else "unaffected",
            frac)


# --------------------------------------------------------------------- ANN

HIDDEN = 10


@dataclass(frozen=True)
class AnnConfig:
    epochs: int = 200
    dropout: float = 0.75    # drop probability at the hidden layer
    lr: float = 1e-2
    batch_size: int = 32
    seed: int = 0

    def validate(self):
        if self.epochs <= 0 or self.lr <= 0 or self.batch_size <= 0:
            raise ConfigError("epochs, lr, and batch size must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")


@dataclass
class AnnModel:
    w1: np.ndarray    # (10, 18)
    b1: np.ndarray
    w2: np.ndarray    # (2, 10)
    b2: np.ndarray
    config: AnnConfig = field(default_factory=AnnConfig)


def ann_init(config: AnnConfig) -> AnnModel:
    rng = np.random.default_rng(config.seed)

    def glorot(shape, fan_in, fan_out):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=shape)

    return AnnModel(w1=glorot((HIDDEN, N_FEATURES), N_FEATURES, HIDDEN),
                    b1=np.zeros(HIDDEN),
                    w2=glorot((2, HIDDEN), HIDDEN, 2),
                    b2=np.zeros(2),
                    config=config)


def ann_forward(model: AnnModel, x: np.ndarray, mask: np.ndarray | None = None):
    """x: (B, 18). mask: inverted-dropout keep mask already scaled by
    1/keep_prob, or None for inference. Returns (probs, cache)."""
    pre = x @ model.w1.T + model.b1
    hidden = relu(pre)
    if mask is not None:
        hidden = hidden * mask
    logits = hidden @ model.w2.T + model.b2
    probs = _softmax(logits)
    return probs, (x, pre, hidden, probs)


def ann_backward(model: AnnModel, cache, label_idx: np.ndarray,
                 mask: np.ndarray | None = None):
    x, pre, hidden, probs = cache
    B = len(label_idx)
    onehot = np.zeros((B, 2))
    onehot[np.arange(B), label_idx] = 1.0
    dlogits = (probs - onehot) / B
    dw2 = dlogits.T @ hidden
    db2 = dlogits.sum(axis=0)
    dhidden = dlogits @ model.w2
    if mask is not None:
        dhidden = dhidden * mask
    dpre = dhidden * (pre > 0)
    dw1 = dpre.T @ x
    db1 = dpre.sum(axis=0)
    return dw1, db1, dw2, db2


def ann_fit(data, config: AnnConfig = AnnConfig()) -> AnnModel:
    config.validate()
    if not data:
        raise EmptyData("empty training set")
    model = ann_init(config)
    x = np.stack([np.asarray(v, dtype=float) for v, _ in data])
    y = np.array([label_index(lab) for _, lab in data])
    params = [model.w1, model.b1, model.w2, model.b2]
    opt = AdamState([p.shape for p in params], lr=config.lr)
    rng = np.random.default_rng(config.seed)
    keep = 1.0 - config.dropout
    n = len(data)
    for _epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            if config.dropout > 0:
                mask = (rng.random((len(idx), HIDDEN)) < keep) / keep
            else:
                mask = None
            _probs, cache = ann_forward(model, x[idx], mask)
            grads = ann_backward(model, cache, y[idx], mask)
            opt.step(params, grads)
    return model


def ann_predict(model: AnnModel, query) -> Prediction:
    probs, _ = ann_forward(model, np.asarray(query, dtype=float)[None, :])
    return Prediction(p_affected=float(probs[0, 0]),
                      p_unaffected=float(probs[0, 1]))


def ann_loss(model: AnnModel, x: np.ndarray, label_idx: np.ndarray,
             mask: np.ndarray | None = None) -> float:
    probs, _ = ann_forward(model, x, mask)
    p_true = probs[np.arange(len(label_idx)), label_idx]
    return float(np.mean(-np.log(np.maximum(p_true, PROB_FLOOR))))
