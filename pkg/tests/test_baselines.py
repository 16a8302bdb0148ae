"""Classical baselines: KNN, decision tree, random forest, small ANN."""

import numpy as np
import pytest

from deeplcp.baselines import (AnnConfig, ForestParams, KnnIndex, TreeParams,
                               ann_backward, ann_fit, ann_forward, ann_init,
                               ann_loss, ann_predict, featurize, forest_fit,
                               forest_predict, knn_predict, tree_fit,
                               tree_predict)
from deeplcp.errors import (ConfigError, EmptyData, EmptyIndex, KTooLarge,
                            ShapeError)
from deeplcp.semantic import REDUCED_ROWS


# --------------------------------------------------------------- featurize

def test_featurize_row_sums():
    m = np.zeros((REDUCED_ROWS, 13))
    m[0, :3] = (0.1, 0.2, 0.3)
    m[17, 12] = 0.9
    f = featurize(m)
    assert f.shape == (REDUCED_ROWS,)
    assert f[0] == pytest.approx(0.6)
    assert f[17] == pytest.approx(0.9)
    assert not f[1:17].any()


def test_featurize_shape_error():
    with pytest.raises(ShapeError):
        featurize(np.zeros((17, 13)))


# --------------------------------------------------------------------- KNN

def _random_points(rng, n):
    return [(rng.random(REDUCED_ROWS),
             "affected" if rng.random() < 0.5 else "unaffected")
            for _ in range(n)]


def knn_oracle(data, query, k):
    """Independent exhaustive-sort reference: compute every distance,
    sort by (distance, index), take k, majority-vote."""
    dists = sorted((float(np.linalg.norm(np.asarray(x) - query)), i)
                   for i, (x, _lab) in enumerate(data))
    votes = sum(1 for _d, i in dists[:k] if data[i][1] == "affected")
    return ("affected" if votes * 2 > k else "unaffected"), votes / k


def test_knn_matches_oracle():
    rng = np.random.default_rng(0)
    data = _random_points(rng, 40)
    index = KnnIndex.fit(data)
    for _ in range(100):
        q = rng.random(REDUCED_ROWS)
        assert knn_predict(index, q, 5) == knn_oracle(data, q, 5)


def test_knn_distance_tie_prefers_lower_index():
    data = [(np.array([1.0] + [0.0] * 17), "affected"),
            (np.array([-1.0] + [0.0] * 17), "unaffected"),
            (np.array([0.0] * 18), "unaffected")]
    label, score = knn_predict(KnnIndex.fit(data), np.zeros(18), 1)
    # the two unit points tie at distance 1; index 0 wins after the origin
    label1, _ = knn_predict(KnnIndex.fit(data[:2]), np.zeros(18), 1)
    assert label1 == "affected"
    assert (label, score) == ("unaffected", 0.0)


def test_knn_validation():
    data = _random_points(np.random.default_rng(1), 5)
    index = KnnIndex.fit(data)
    with pytest.raises(KTooLarge):
        knn_predict(index, np.zeros(REDUCED_ROWS), 7)
    with pytest.raises(ConfigError):
        knn_predict(index, np.zeros(REDUCED_ROWS), 2)
    with pytest.raises(EmptyIndex):
        knn_predict(KnnIndex(points=np.zeros((0, 18)), labels=[]),
                    np.zeros(18), 1)
    with pytest.raises(EmptyData):
        KnnIndex.fit([])


# ------------------------------------------------------------------- trees

def _gini_oracle(y):
    if len(y) == 0:
        return 0.0
    p = sum(y) / len(y)
    return 1.0 - p * p - (1 - p) * (1 - p)


def _split_oracle(x, y):
    """Brute-force best (gini, feature, threshold) over every midpoint."""
    best = None
    n = len(y)
    for f in range(x.shape[1]):
        for v in sorted(set(x[:, f])):
            later = [w for w in sorted(set(x[:, f])) if w > v]
            if not later:
                continue
            threshold = (v + later[0]) / 2
            left = [y[i] for i in range(n) if x[i, f] < threshold]
            right = [y[i] for i in range(n) if x[i, f] >= threshold]
            g = (len(left) * _gini_oracle(left)
                 + len(right) * _gini_oracle(right)) / n
            key = (g, f, threshold)
            if best is None or key < best:
                best = key
    return best


SIX_POINTS = [
    (np.array([1.0, 5.0]), "affected"),
    (np.array([2.0, 4.0]), "affected"),
    (np.array([3.0, 3.0]), "unaffected"),
    (np.array([4.0, 2.0]), "unaffected"),
    (np.array([5.0, 1.0]), "affected"),
    (np.array([6.0, 0.0]), "unaffected"),
]


def test_depth2_tree_matches_hand_enumerated_gini():
    tree = tree_fit(SIX_POINTS, TreeParams(max_depth=2, min_leaf=1))
    x = np.stack([v for v, _ in SIX_POINTS])
    y = [1 if lab == "affected" else 0 for _, lab in SIX_POINTS]

    def check(node, idx, depth):
        sub_x = x[idx]
        sub_y = [y[i] for i in idx]
        if node.feature is None:
            return
        assert depth < 2
        _g, f, threshold = _split_oracle(sub_x, sub_y)
        assert node.feature == f
        assert node.threshold == pytest.approx(threshold)
        left = [i for i in idx if x[i, f] < threshold]
        right = [i for i in idx if x[i, f] >= threshold]
        check(node.left, left, depth + 1)
        check(node.right, right, depth + 1)

    check(tree, list(range(6)), 0)


def test_pure_node_is_leaf():
    data = [(np.array([float(i), 0.0]), "affected") for i in range(4)]
    tree = tree_fit(data, TreeParams())
    assert tree.feature is None
    assert tree_predict(tree, np.array([9.0, 9.0])) == ("affected", 1.0)


def test_min_leaf_respected():
    tree = tree_fit(SIX_POINTS, TreeParams(max_depth=5, min_leaf=3))

    def leaves(node):
        if node.feature is None:
            return [node]
        return leaves(node.left) + leaves(node.right)

    for leaf in leaves(tree):
        assert leaf.n_total >= 3


def test_tree_empty_data():
    with pytest.raises(EmptyData):
        tree_fit([], TreeParams())


def test_tree_prediction_probability():
    tree = tree_fit(SIX_POINTS, TreeParams(max_depth=1, min_leaf=1))
    for v, _lab in SIX_POINTS:
        label, p = tree_predict(tree, v)
        assert 0.0 <= p <= 1.0
        assert label == ("affected" if p >= 0.5 else "unaffected")


# ------------------------------------------------------------------ forest

def test_forest_degenerate_equals_single_tree():
    rng = np.random.default_rng(2)
    data = _random_points(rng, 30)
    params = ForestParams(n_trees=1, feature_frac=1.0, bootstrap=False,
                          max_depth=4, min_leaf=2, seed=3)
    forest = forest_fit(data, params)
    single = tree_fit(data, TreeParams(max_depth=4, min_leaf=2))
    for q, _ in data:
        assert forest_predict(forest, q)[0] == tree_predict(single, q)[0]


def test_forest_deterministic():
    data = _random_points(np.random.default_rng(4), 30)
    f1 = forest_fit(data, ForestParams(n_trees=5, seed=9))
    f2 = forest_fit(data, ForestParams(n_trees=5, seed=9))
    rng = np.random.default_rng(5)
    for _ in range(10):
        q = rng.random(REDUCED_ROWS)
        assert forest_predict(f1, q) == forest_predict(f2, q)


def test_forest_tie_goes_unaffected():
    # two stumps voting opposite ways: an exact tie
    data_a = [(np.array([0.0] * 18), "affected")] * 3
    data_b = [(np.array([0.0] * 18), "unaffected")] * 3
    fa = forest_fit(data_a, ForestParams(n_trees=1, bootstrap=False))
    fb = forest_fit(data_b, ForestParams(n_trees=1, bootstrap=False))
    from deeplcp.baselines import Forest
    mixed = Forest(trees=fa.trees + fb.trees, params=fa.params)
    label, frac = forest_predict(mixed, np.zeros(18))
    assert (label, frac) == ("unaffected", 0.5)


# --------------------------------------------------------------------- ANN

def test_ann_config_validation():
    with pytest.raises(ConfigError):
        AnnConfig(dropout=1.0).validate()
    with pytest.raises(ConfigError):
        AnnConfig(lr=0.0).validate()


def test_ann_fixed_mask_is_masked_dense_network():
    model = ann_init(AnnConfig(seed=6))
    rng = np.random.default_rng(6)
    x = rng.random((1, 18))
    mask = (rng.random((1, 10)) < 0.25) / 0.25
    probs, _ = ann_forward(model, x, mask)
    # equivalent dense network: fold the mask into the second layer
    hidden = np.maximum(x @ model.w1.T + model.b1, 0.0)
    logits = (hidden * mask) @ model.w2.T + model.b2
    e = np.exp(logits - logits.max())
    np.testing.assert_allclose(probs, e / e.sum(), atol=1e-12)


def test_ann_gradient_check_with_fixed_mask():
    config = AnnConfig(seed=7)
    model = ann_init(config)
    rng = np.random.default_rng(7)
    x = rng.random((3, 18))
    y = np.array([0, 1, 0])
    mask = (rng.random((3, 10)) < 0.25) / 0.25
    _probs, cache = ann_forward(model, x, mask)
    grads = ann_backward(model, cache, y, mask)
    params = [model.w1, model.b1, model.w2, model.b2]
    step = 1e-6
    for p, g in zip(params, grads):
        flat, gflat = p.reshape(-1), np.asarray(g).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = ann_loss(model, x, y, mask)
            flat[i] = orig - step
            lo = ann_loss(model, x, y, mask)
            flat[i] = orig
            numeric = (hi - lo) / (2 * step)
            denom = max(abs(numeric) + abs(gflat[i]), 1e-8)
            assert abs(numeric - gflat[i]) / denom < 1e-4


def test_ann_memorizes_separable_data():
    rng = np.random.default_rng(8)
    data = []
    for i in range(20):
        v = rng.random(18) * 0.2
        if i % 2 == 0:
            v[0] += 2.0
        data.append((v, "affected" if i % 2 == 0 else "unaffected"))
    model = ann_fit(data, AnnConfig(epochs=300, dropout=0.5, seed=8))
    correct = sum(1 for v, lab in data
                  if (ann_predict(model, v).p_affected >= 0.5)
                  == (lab == "affected"))
    assert correct >= 18


def test_ann_deterministic():
    data = _random_points(np.random.default_rng(9), 20)
    m1 = ann_fit(data, AnnConfig(epochs=5, seed=10))
    m2 = ann_fit(data, AnnConfig(epochs=5, seed=10))
    assert np.array_equal(m1.w1, m2.w1)
    assert np.array_equal(m1.w2, m2.w2)
