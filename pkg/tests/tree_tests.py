"""Tests for C4.5 / CART induction, pruning and tree encoding"""

import math

import numpy as np
import pytest

from newscloud import tree
from newscloud.errors import ModelFormatError
from newscloud.tree import Algorithm, Leaf, MultiwaySplit, NumericSplit, SubsetSplit, TreeParams

ALGORITHMS = [Algorithm.C45, Algorithm.CART]


def xor_data():
    """XOR with quadrant sizes 10/10/10/20"""
    rows, labels = [], []
    for (a, b), count in {(0, 0): 10, (0, 1): 10, (1, 0): 10, (1, 1): 20}.items():
        rows += [(a, b)] * count
        labels += [a != b] * count
    return np.array(rows, dtype=float), np.array(labels)


def noisy_data(seed, n=400):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, size=(n, 3))
    y = (X[:, 0] > 0.5) ^ (rng.uniform(size=n) < 0.15)
    return X, y


def test_impurities():
    assert tree.gini(5, 10) == pytest.approx(0.5)
    assert tree.gini(0, 10) == 0
    assert tree.entropy(5, 10) == pytest.approx(1.0)
    assert tree.entropy(10, 10) == 0
    assert tree.entropy(1, 4) == pytest.approx(-(0.25 * math.log2(0.25) + 0.75 * math.log2(0.75)))
    assert list(tree.gini(np.array([0, 2]), np.array([4, 4]))) == pytest.approx([0.0, 0.5])


def test_laplace():
    assert tree.laplace(0, 0) == 0.5
    assert tree.laplace(3, 3) == 0.8
    assert tree.laplace(0, 8) == 0.1


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_pure_node_is_leaf(algorithm):
    X = np.arange(20, dtype=float).reshape(10, 2)
    model = tree.train_tree(X, [True] * 10, algorithm)
    assert model.root == Leaf(10, 10)
    assert model.predict_proba([0, 0]) == pytest.approx(11 / 12)


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_xor(algorithm):
    X, y = xor_data()
    model = tree.train_tree(X, y, algorithm)
    assert model.depth == 2
    assert isinstance(model.root, NumericSplit)
    assert model.root.feature == 0  # both features gain the same; lower index wins
    assert model.root.threshold == 0.5
    assert model.predict_proba([0, 0]) == pytest.approx(1 / 12)
    assert model.predict_proba([0, 1]) == pytest.approx(11 / 12)
    assert model.predict_proba([1, 0]) == pytest.approx(11 / 12)
    assert model.predict_proba([1, 1]) == pytest.approx(1 / 22)


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_balanced_xor(algorithm):
    X = np.array([(0, 0), (0, 1), (1, 0), (1, 1)] * 10, dtype=float)
    y = X[:, 0] != X[:, 1]
    split = tree.best_split(X, y, algorithm)
    assert (split.feature, split.threshold) == (0, 0.5)
    assert split.gain == pytest.approx(0.0, abs=1e-12)
    model = tree.train_tree(X, y, algorithm, TreeParams(prune=False))
    assert model.depth == 2
    for a, b in [(0, 0), (1, 1)]:
        assert model.predict_proba([a, b]) == pytest.approx(1 / 12)
    for a, b in [(0, 1), (1, 0)]:
        assert model.predict_proba([a, b]) == pytest.approx(11 / 12)


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_pure_data_has_no_split(algorithm):
    X = np.array([(0, 0), (0, 1), (1, 0), (1, 1)] * 5, dtype=float)
    assert tree.best_split(X, np.zeros(20, dtype=bool), algorithm) is None


def test_threshold_is_midpoint():
    X = np.array([[1.0], [2.0], [4.0], [8.0]])
    split = tree.best_split(X, [0, 0, 1, 1], Algorithm.CART, min_leaf=1)
    assert split.threshold == 3.0
    assert split.gain == pytest.approx(0.5)


# Brute-force oracle for the root split ####################################################


def _impurity(algorithm, pos, total):
    p = pos / total
    if algorithm is Algorithm.CART:
        return 1 - p * p - (1 - p) * (1 - p)
    return -sum(q * math.log2(q) for q in (p, 1 - p) if q > 0)


def oracle_candidates(X, y, algorithm, min_leaf):
    """Best (gain, ratio, feature, threshold) of each feature, by exhaustive search"""
    n = len(y)
    total_pos = int(sum(y))
    parent = _impurity(algorithm, total_pos, n)
    out = []
    for f in range(X.shape[1]):
        values = sorted(set(X[:, f]))
        best = None
        for lo, hi in zip(values, values[1:]):
            left = X[:, f] <= lo
            n_left = int(left.sum())
            if n_left < min_leaf or n - n_left < min_leaf:
                continue
            pos_left = int(y[left].sum())
            gain = (
                parent
                - n_left / n * _impurity(algorithm, pos_left, n_left)
                - (n - n_left) / n * _impurity(algorithm, total_pos - pos_left, n - n_left)
            )
            if best is None or gain > best[0] + 1e-12:
                split_info = _impurity(Algorithm.C45, n_left, n)
                ratio = gain / split_info if algorithm is Algorithm.C45 else gain
                best = (gain, ratio, f, lo + (hi - lo) / 2)
        if best is not None and best[0] > 0:
            out.append(best)
    return out


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_root_split_matches_oracle(algorithm):
    rng = np.random.default_rng(17)
    for _ in range(50):
        n = int(rng.integers(20, 201))
        X = rng.uniform(0, 1, size=(n, 12))
        X[:, :4] = np.round(X[:, :4] * 4)  # a few low-cardinality columns
        y = rng.uniform(size=n) < X[:, 5] * 0.8
        split = tree.best_split(X, y, algorithm, min_leaf=2)
        cands = oracle_candidates(X, y, algorithm, min_leaf=2)
        if not cands:
            assert split is None or abs(split.gain) < 1e-9
            continue
        if algorithm is Algorithm.CART:
            assert split.gain == pytest.approx(max(c[0] for c in cands), abs=1e-9)
        else:
            mean = sum(c[0] for c in cands) / len(cands)
            best_ratio = max(c[1] for c in cands if c[0] >= mean - 1e-9)
            assert split.gain_ratio == pytest.approx(best_ratio, abs=1e-9)
        (chosen,) = [c for c in cands if c[2] == split.feature]
        assert split.threshold == pytest.approx(chosen[3])


# Stopping and pruning #####################################################################


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_min_leaf(algorithm):
    X, y = noisy_data(1)
    model = tree.train_tree(X, y, algorithm, TreeParams(min_leaf=15, prune=False))
    leaves = [node for node in tree.iter_nodes(model.root) if isinstance(node, Leaf)]
    assert min(leaf.total for leaf in leaves) >= 15
    assert sum(leaf.total for leaf in leaves) == len(y)


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_max_depth(algorithm):
    X, y = noisy_data(2)
    assert tree.train_tree(X, y, algorithm, TreeParams(max_depth=0)).depth == 0
    assert tree.train_tree(X, y, algorithm, TreeParams(max_depth=3, prune=False)).depth <= 3


def test_pessimistic_pruning_shrinks():
    X, y = noisy_data(3)
    full = tree.train_tree(X, y, Algorithm.C45, TreeParams(prune=False))
    pruned = tree.train_tree(X, y, Algorithm.C45, TreeParams(confidence=0.25))
    assert pruned.n_nodes < full.n_nodes
    # the real signal survives
    assert pruned.predict_proba([0.9, 0.5, 0.5]) > 0.5 > pruned.predict_proba([0.1, 0.5, 0.5])


def test_lower_confidence_prunes_more():
    X, y = noisy_data(4)
    mild = tree.train_tree(X, y, Algorithm.C45, TreeParams(confidence=0.5))
    harsh = tree.train_tree(X, y, Algorithm.C45, TreeParams(confidence=0.01))
    assert harsh.n_nodes <= mild.n_nodes


def test_cost_complexity_pruning():
    X, y = noisy_data(5)
    full = tree.train_tree(X, y, Algorithm.CART)
    pruned = tree.train_tree(X, y, Algorithm.CART, TreeParams(alpha=0.005))
    stump = tree.train_tree(X, y, Algorithm.CART, TreeParams(alpha=10.0))
    assert pruned.n_nodes < full.n_nodes
    assert isinstance(stump.root, Leaf)


def test_added_errors():
    assert tree.added_errors(10, 0, 0.25) == pytest.approx(10 * (1 - 0.25 ** (1 / 10)))
    assert tree.added_errors(20, 5, 0.25) > tree.added_errors(20, 2, 0.25) > 0
    assert tree.added_errors(20, 5, 0.1) > tree.added_errors(20, 5, 0.25)


def test_params_validation():
    with pytest.raises(ValueError):
        TreeParams(min_leaf=0)
    with pytest.raises(ValueError):
        TreeParams(confidence=1.0)
    with pytest.raises(ValueError):
        TreeParams(alpha=-1)
    with pytest.raises(ValueError):
        TreeParams(max_depth=-1)


def test_bad_data():
    with pytest.raises(ValueError):
        tree.train_tree(np.zeros((0, 3)), [])
    with pytest.raises(ValueError):
        tree.train_tree(np.zeros((4, 3)), [True, False])
    with pytest.raises(ValueError):
        tree.train_tree(np.zeros((4, 3)), [True] * 4, "id3")


# Categorical features #####################################################################


def categorical_data():
    """Column 0 is a category 0..3; categories 0 and 2 are mostly positive"""
    rng = np.random.default_rng(9)
    cats = rng.integers(0, 4, size=200)
    y = np.isin(cats, [0, 2]) ^ (rng.uniform(size=200) < 0.05)
    X = np.column_stack([cats, rng.uniform(size=200)]).astype(float)
    return X, y


def test_cart_subset_split():
    X, y = categorical_data()
    model = tree.train_tree(X, y, Algorithm.CART, TreeParams(max_depth=1), frozenset({0}))
    root = model.root
    assert isinstance(root, SubsetSplit)
    assert {root.left_values, root.right_values} == {(0.0, 2.0), (1.0, 3.0)}
    assert model.predict_proba([2, 0.5]) > 0.8
    assert model.predict_proba([3, 0.5]) < 0.2


def test_c45_multiway_split():
    X, y = categorical_data()
    model = tree.train_tree(X, y, Algorithm.C45, TreeParams(max_depth=1), frozenset({0}))
    root = model.root
    assert isinstance(root, MultiwaySplit)
    assert root.values == (0.0, 1.0, 2.0, 3.0)
    assert len(root.children) == 4
    # unseen category stops at the split node
    assert model.predict_proba([7, 0.5]) == pytest.approx(root.proba)


# Determinism and encoding #################################################################


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_deterministic(algorithm):
    X, y = noisy_data(6)
    assert tree.train_tree(X, y, algorithm) == tree.train_tree(X, y, algorithm)


def test_encoding_round_trip():
    X, y = categorical_data()
    for algorithm in ALGORITHMS:
        model = tree.train_tree(X, y, algorithm, categorical=frozenset({0}))
        out = bytearray()
        tree.encode_node(model.root, out)
        root, end = tree.decode_node(bytes(out))
        assert end == len(out)
        assert root == model.root


def test_decode_errors():
    X, y = xor_data()
    out = bytearray()
    tree.encode_node(tree.train_tree(X, y).root, out)
    with pytest.raises(ModelFormatError):
        tree.decode_node(bytes(out[:-3]))
    with pytest.raises(ModelFormatError, match="tag"):
        tree.decode_node(b"Q" + bytes(out[1:]))
    with pytest.raises(ModelFormatError):
        tree.decode_node(b"")


def test_predict_many():
    X, y = noisy_data(7)
    model = tree.train_tree(X, y, Algorithm.CART, TreeParams(max_depth=4))
    expected = [model.predict_proba(row) for row in X[:20]]
    assert model.predict_many(X[:20]).tolist() == expected
