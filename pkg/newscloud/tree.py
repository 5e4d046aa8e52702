"""Decision tree induction in the style of C4.5 and of CART, for a binary label.

C4.5 mode: information gain picks each numeric feature's threshold, gain ratio picks the
feature (among those with at least average gain), categorical features split multiway, and the
grown tree is pruned by pessimistic error estimates.

CART mode: Gini decrease picks threshold and feature, categorical features split into two
subsets, and cost-complexity pruning runs when alpha > 0.

Numeric splits send x <= threshold to the left child. Thresholds are midpoints between
consecutive distinct values. Ties go to the lower feature index, then the lower threshold.
"""

from __future__ import annotations

import dataclasses
import math
import struct
from enum import Enum
from statistics import NormalDist
from typing import Iterable, NamedTuple, Optional, Sequence, Union

import numpy as np

from .errors import ModelFormatError

# Quinlan's pruning test collapses a subtree unless it is clearly better than a leaf
PRUNE_SLACK = 0.1
# gain comparison tolerance when filtering C4.5 candidates by average gain
GAIN_EPSILON = 1e-9


class Algorithm(Enum):
    C45 = "c45"
    CART = "cart"


@dataclasses.dataclass(frozen=True)
class TreeParams:
    """Induction parameters

    max_depth:  None for unlimited
    min_leaf:   minimum instances on each side of a split
    alpha:      CART cost-complexity parameter (0 disables pruning)
    confidence: C4.5 pruning confidence factor
    prune:      run C4.5 pessimistic pruning
    """

    max_depth: Optional[int] = None
    min_leaf: int = 2
    alpha: float = 0.0
    confidence: float = 0.25
    prune: bool = True

    def __post_init__(self):
        if self.min_leaf < 1:
            raise ValueError(f"min_leaf must be >= 1, got {self.min_leaf}")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError(f"max_depth must be >= 0, got {self.max_depth}")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError(f"confidence must be in (0, 1), got {self.confidence}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")


def laplace(pos: int, total: int) -> float:
    return (pos + 1) / (total + 2)


@dataclasses.dataclass(frozen=True)
class Leaf:
    pos: int
    total: int

    @property
    def proba(self) -> float:
        return laplace(self.pos, self.total)


@dataclasses.dataclass(frozen=True)
class NumericSplit:
    feature: int
    threshold: float
    left: "Node"
    right: "Node"
    pos: int
    total: int

    @property
    def proba(self) -> float:
        return laplace(self.pos, self.total)


@dataclasses.dataclass(frozen=True)
class MultiwaySplit:
    feature: int
    values: tuple[float, ...]  # sorted
    children: tuple["Node", ...]  # children[i] takes values[i]
    pos: int
    total: int

    @property
    def proba(self) -> float:
        return laplace(self.pos, self.total)


@dataclasses.dataclass(frozen=True)
class SubsetSplit:
    feature: int
    left_values: tuple[float, ...]  # sorted
    right_values: tuple[float, ...]
    left: "Node"
    right: "Node"
    pos: int
    total: int

    @property
    def proba(self) -> float:
        return laplace(self.pos, self.total)


Node = Union[Leaf, NumericSplit, MultiwaySplit, SubsetSplit]


def _route(node: Node, x: Sequence[float]) -> Optional[Node]:
    """Child that x goes to, or None if x stops here (a leaf, or an unseen category)"""
    if isinstance(node, NumericSplit):
        return node.left if x[node.feature] <= node.threshold else node.right
    if isinstance(node, MultiwaySplit):
        value = x[node.feature]
        for v, child in zip(node.values, node.children):
            if v == value:
                return child
        return None
    if isinstance(node, SubsetSplit):
        value = x[node.feature]
        if value in node.left_values:
            return node.left
        if value in node.right_values:
            return node.right
    return None


def predict_node(root: Node, x: Sequence[float]) -> float:
    node = root
    while True:
        child = _route(node, x)
        if child is None:
            return node.proba
        node = child


def iter_nodes(root: Node) -> Iterable[Node]:
    """Preorder traversal"""
    stack = [root]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children_of(node)))


def children_of(node: Node) -> tuple[Node, ...]:
    if isinstance(node, (NumericSplit, SubsetSplit)):
        return (node.left, node.right)
    if isinstance(node, MultiwaySplit):
        return node.children
    return ()


def depth_of(node: Node) -> int:
    kids = children_of(node)
    return 0 if not kids else 1 + max(depth_of(k) for k in kids)


# Impurity measures, vectorized over arrays of (positive count, total count)


def _xlog2x(p):
    p = np.asarray(p, dtype=np.float64)
    safe = np.where(p > 0, p, 1.0)
    return np.where(p > 0, p * np.log2(safe), 0.0)


def entropy(pos, total):
    """Binary entropy, in bits, of a node with 'pos' positives out of 'total'"""
    p = np.asarray(pos, dtype=np.float64) / np.asarray(total, dtype=np.float64)
    return -(_xlog2x(p) + _xlog2x(1.0 - p))


def gini(pos, total):
    """Gini impurity of a node with 'pos' positives out of 'total'"""
    p = np.asarray(pos, dtype=np.float64) / np.asarray(total, dtype=np.float64)
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


class SplitChoice(NamedTuple):
    """A candidate split of one node"""

    feature: int
    gain: float  # information gain (C4.5) or Gini decrease (CART)
    gain_ratio: float  # C4.5 only; equals gain for CART
    threshold: Optional[float] = None  # numeric splits
    left_values: tuple[float, ...] = ()  # CART subset splits
    right_values: tuple[float, ...] = ()
    multiway: bool = False  # C4.5 categorical splits


def _midpoint(lo: float, hi: float) -> float:
    mid = lo + (hi - lo) / 2
    # adjacent floats: the midpoint can round up to 'hi'
    return mid if lo <= mid < hi else lo


def _numeric_split(
    xs: np.ndarray, ys: np.ndarray, feature: int, algorithm: Algorithm, min_leaf: int
) -> Optional[SplitChoice]:
    """Best threshold of one numeric feature, given values and labels sorted by value"""
    n = len(xs)
    boundaries = np.flatnonzero(xs[:-1] < xs[1:])
    n_left = boundaries + 1
    allowed = (n_left >= min_leaf) & (n - n_left >= min_leaf)
    boundaries, n_left = boundaries[allowed], n_left[allowed]
    if len(boundaries) == 0:
        return None
    cum_pos = np.cumsum(ys, dtype=np.int64)
    total_pos = int(cum_pos[-1])
    pos_left = cum_pos[boundaries]
    n_right = n - n_left
    pos_right = total_pos - pos_left

    impurity = entropy if algorithm is Algorithm.C45 else gini
    gains = (
        impurity(total_pos, n)
        - (n_left / n) * impurity(pos_left, n_left)
        - (n_right / n) * impurity(pos_right, n_right)
    )
    best = int(np.argmax(gains))  # first maximum: lowest threshold
    gain = float(gains[best])
    if algorithm is Algorithm.C45:
        split_info = float(entropy(n_left[best], n))
        ratio = gain / split_info if split_info > 0 else 0.0
    else:
        ratio = gain
    threshold = _midpoint(float(xs[boundaries[best]]), float(xs[boundaries[best] + 1]))
    return SplitChoice(feature, gain, ratio, threshold=threshold)


def _category_counts(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    values, inverse = np.unique(x, return_inverse=True)
    totals = np.bincount(inverse, minlength=len(values))
    positives = np.bincount(inverse, weights=y, minlength=len(values)).astype(np.int64)
    return values, positives, totals


def _multiway_split(
    x: np.ndarray, y: np.ndarray, feature: int, min_leaf: int
) -> Optional[SplitChoice]:
    values, positives, totals = _category_counts(x, y)
    if len(values) < 2 or np.count_nonzero(totals >= min_leaf) < 2:
        return None
    n = len(x)
    gain = float(
        entropy(positives.sum(), n) - np.sum((totals / n) * entropy(positives, totals))
    )
    split_info = float(-np.sum(_xlog2x(totals / n)))
    ratio = gain / split_info if split_info > 0 else 0.0
    return SplitChoice(feature, gain, ratio, multiway=True)


def _subset_split(
    x: np.ndarray, y: np.ndarray, feature: int, min_leaf: int
) -> Optional[SplitChoice]:
    """Best two-way grouping of categories by Gini: order categories by positive rate and
    scan the prefixes of that order."""
    values, positives, totals = _category_counts(x, y)
    if len(values) < 2:
        return None
    order = np.lexsort((values, positives / totals))
    positives, totals, values = positives[order], totals[order], values[order]
    n = len(x)
    n_left = np.cumsum(totals)[:-1]
    pos_left = np.cumsum(positives)[:-1]
    allowed = (n_left >= min_leaf) & (n - n_left >= min_leaf)
    if not allowed.any():
        return None
    total_pos = int(positives.sum())
    gains = (
        gini(total_pos, n)
        - (n_left / n) * gini(pos_left, n_left)
        - ((n - n_left) / n) * gini(total_pos - pos_left, n - n_left)
    )
    gains = np.where(allowed, gains, -np.inf)
    best = int(np.argmax(gains))
    left = tuple(sorted(float(v) for v in values[: best + 1]))
    right = tuple(sorted(float(v) for v in values[best + 1 :]))
    gain = float(gains[best])
    return SplitChoice(feature, gain, gain, left_values=left, right_values=right)


def _choose(candidates: list[SplitChoice], algorithm: Algorithm) -> Optional[SplitChoice]:
    """Pick among per-feature best splits (given in feature order).

    Positive gains win. If there are none (balanced XOR), the first zero-gain split is taken.
    """
    useful = [c for c in candidates if c.gain > 0]
    if not useful:
        flat = [c for c in candidates if c.gain > -GAIN_EPSILON]
        return flat[0] if flat else None
    if algorithm is Algorithm.CART:
        best = useful[0]
        for cand in useful[1:]:
            if cand.gain > best.gain:
                best = cand
        return best

    mean_gain = sum(c.gain for c in useful) / len(useful)
    eligible = [c for c in useful if c.gain >= mean_gain - GAIN_EPSILON]
    best = eligible[0]
    for cand in eligible[1:]:
        if cand.gain_ratio > best.gain_ratio:
            best = cand
    return best


def _node_split(
    X: np.ndarray,
    y: np.ndarray,
    idx: np.ndarray,
    sorted_idx: dict[int, np.ndarray],
    categorical: frozenset[int],
    algorithm: Algorithm,
    min_leaf: int,
) -> Optional[SplitChoice]:
    pos = int(y[idx].sum())
    if pos in (0, len(idx)):
        return None  # pure
    candidates = []
    for feature in range(X.shape[1]):
        if feature in categorical:
            x, labels = X[idx, feature], y[idx]
            if algorithm is Algorithm.C45:
                cand = _multiway_split(x, labels, feature, min_leaf)
            else:
                cand = _subset_split(x, labels, feature, min_leaf)
        else:
            order = sorted_idx[feature]
            cand = _numeric_split(X[order, feature], y[order], feature, algorithm, min_leaf)
        if cand is not None:
            candidates.append(cand)
    return _choose(candidates, algorithm)


def _presort(X: np.ndarray, categorical: frozenset[int]) -> dict[int, np.ndarray]:
    return {
        f: np.argsort(X[:, f], kind="stable")
        for f in range(X.shape[1])
        if f not in categorical
    }


def _check_data(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("training data is empty")
    if len(y) != X.shape[0]:
        raise ValueError(f"{X.shape[0]} feature rows but {len(y)} labels")
    return X, y


def best_split(
    X: np.ndarray,
    y: np.ndarray,
    algorithm: Algorithm | str,
    categorical: frozenset[int] = frozenset(),
    min_leaf: int = 2,
) -> Optional[SplitChoice]:
    """The split the trainer would choose at the root of (X, y), or None"""
    X, y = _check_data(X, y)
    idx = np.arange(X.shape[0])
    sorted_idx = _presort(X, categorical)
    return _node_split(X, y, idx, sorted_idx, categorical, Algorithm(algorithm), min_leaf)


class _Grower:
    """Recursive partitioning with index lists kept sorted per numeric feature"""

    # pylint: disable=too-few-public-methods,invalid-name
    def __init__(self, X, y, categorical, algorithm, params):
        self.X, self.y = X, y
        self.categorical = categorical
        self.algorithm = algorithm
        self.params = params

    def grow(self, idx: np.ndarray, sorted_idx: dict[int, np.ndarray], depth: int) -> Node:
        pos = int(self.y[idx].sum())
        total = len(idx)
        p = self.params
        if (
            pos in (0, total)
            or (p.max_depth is not None and depth >= p.max_depth)
            or total < 2 * p.min_leaf
        ):
            return Leaf(pos, total)

        split = _node_split(
            self.X, self.y, idx, sorted_idx, self.categorical, self.algorithm, p.min_leaf
        )
        if split is None:
            return Leaf(pos, total)

        column = self.X[:, split.feature]
        if split.multiway:
            values = sorted(set(float(v) for v in column[idx]))
            children = []
            for value in values:
                mask = column == value
                children.append(self._grow_subset(mask, idx, sorted_idx, depth))
            return MultiwaySplit(split.feature, tuple(values), tuple(children), pos, total)

        if split.threshold is not None:
            mask = column <= split.threshold
        else:
            mask = np.isin(column, split.left_values)
        left = self._grow_subset(mask, idx, sorted_idx, depth)
        right = self._grow_subset(~mask, idx, sorted_idx, depth)
        if split.threshold is not None:
            return NumericSplit(split.feature, split.threshold, left, right, pos, total)
        return SubsetSplit(
            split.feature, split.left_values, split.right_values, left, right, pos, total
        )

    def _grow_subset(self, mask, idx, sorted_idx, depth) -> Node:
        """Grow the child holding the instances of idx for which mask (over all rows) is set"""
        member = np.zeros(len(mask), dtype=bool)
        member[idx] = mask[idx]
        child_idx = idx[member[idx]]
        child_sorted = {f: order[member[order]] for f, order in sorted_idx.items()}
        return self.grow(child_idx, child_sorted, depth + 1)


# Pruning


def _z_squared(confidence: float) -> float:
    z = NormalDist().inv_cdf(1.0 - confidence)
    return z * z


def added_errors(n: float, e: float, confidence: float) -> float:
    """Extra errors expected on unseen data for a leaf with e errors out of n, at the upper
    confidence limit of the binomial (Quinlan's AddErrs)."""
    if e < 1e-6:
        return n * (1.0 - math.exp(math.log(confidence) / n))
    if e < 0.9999:
        base = n * (1.0 - math.exp(math.log(confidence) / n))
        return base + e * (added_errors(n, 1.0, confidence) - base)
    if e + 0.5 >= n:
        return 0.67 * (n - e)
    coeff = _z_squared(confidence)
    upper = (
        e
        + 0.5
        + coeff / 2
        + math.sqrt(coeff * ((e + 0.5) * (1 - (e + 0.5) / n) + coeff / 4))
    ) / (n + coeff)
    return n * upper - e


def _leaf_errors(node: Node) -> int:
    return min(node.pos, node.total - node.pos)


def _with_children(node: Node, kids: list[Node]) -> Node:
    if isinstance(node, MultiwaySplit):
        return dataclasses.replace(node, children=tuple(kids))
    return dataclasses.replace(node, left=kids[0], right=kids[1])


def prune_pessimistic(node: Node, confidence: float) -> tuple[Node, float]:
    """C4.5 subtree replacement. Returns the pruned node and its estimated error count."""
    errors = _leaf_errors(node)
    as_leaf = errors + added_errors(node.total, errors, confidence)
    if isinstance(node, Leaf):
        return node, as_leaf
    pruned = [prune_pessimistic(child, confidence) for child in children_of(node)]
    subtree = sum(est for _, est in pruned)
    if as_leaf <= subtree + PRUNE_SLACK:
        return Leaf(node.pos, node.total), as_leaf
    return _with_children(node, [child for child, _ in pruned]), subtree


def prune_cost_complexity(node: Node, alpha: float, n_root: int) -> tuple[Node, float]:
    """Minimize misclassification rate + alpha * leaves, bottom up. Returns (node, cost)."""
    as_leaf = _leaf_errors(node) / n_root + alpha
    if isinstance(node, Leaf):
        return node, as_leaf
    pruned = [prune_cost_complexity(child, alpha, n_root) for child in children_of(node)]
    subtree = sum(cost for _, cost in pruned)
    if as_leaf <= subtree:
        return Leaf(node.pos, node.total), as_leaf
    return _with_children(node, [child for child, _ in pruned]), subtree


@dataclasses.dataclass(frozen=True)
class DecisionTree:
    root: Node
    algorithm: Algorithm

    def predict_proba(self, x: Sequence[float]) -> float:
        """Laplace probability of the leaf (or stopping node) that x reaches"""
        return predict_node(self.root, x)

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        return np.array([predict_node(self.root, row) for row in np.asarray(X)], dtype=np.float64)

    @property
    def n_nodes(self) -> int:
        return sum(1 for _ in iter_nodes(self.root))

    @property
    def depth(self) -> int:
        return depth_of(self.root)


def train_tree(
    X: np.ndarray,
    y: Sequence[bool] | np.ndarray,
    algorithm: Algorithm | str = Algorithm.CART,
    params: Optional[TreeParams] = None,
    categorical: frozenset[int] = frozenset(),
) -> DecisionTree:
    """Grow (and prune, per params) one tree on feature matrix X and boolean labels y.

    Induction is deterministic. Data with no usable split yields a single leaf.
    """
    # pylint: disable=invalid-name
    X, y = _check_data(X, y)
    algorithm = Algorithm(algorithm)
    params = params or TreeParams()
    grower = _Grower(X, y, categorical, algorithm, params)
    root = grower.grow(np.arange(X.shape[0]), _presort(X, categorical), 0)
    if algorithm is Algorithm.C45 and params.prune:
        root, _ = prune_pessimistic(root, params.confidence)
    elif algorithm is Algorithm.CART and params.alpha > 0:
        root, _ = prune_cost_complexity(root, params.alpha, X.shape[0])
    return DecisionTree(root, algorithm)


# Binary encoding, preorder. Tags: L leaf, N numeric, M multiway, S subset.

_COUNTS = struct.Struct("<II")
_FEATURE = struct.Struct("<H")
_FLOAT = struct.Struct("<d")


def _pack_values(values: Sequence[float]) -> bytes:
    return _FEATURE.pack(len(values)) + b"".join(_FLOAT.pack(v) for v in values)


def encode_node(node: Node, out: bytearray) -> None:
    if isinstance(node, Leaf):
        out += b"L" + _COUNTS.pack(node.pos, node.total)
    elif isinstance(node, NumericSplit):
        out += b"N" + _COUNTS.pack(node.pos, node.total) + _FEATURE.pack(node.feature)
        out += _FLOAT.pack(node.threshold)
    elif isinstance(node, MultiwaySplit):
        out += b"M" + _COUNTS.pack(node.pos, node.total) + _FEATURE.pack(node.feature)
        out += _pack_values(node.values)
    elif isinstance(node, SubsetSplit):
        out += b"S" + _COUNTS.pack(node.pos, node.total) + _FEATURE.pack(node.feature)
        out += _pack_values(node.left_values) + _pack_values(node.right_values)
    else:
        raise TypeError(f"not a tree node: {node!r}")
    for child in children_of(node):
        encode_node(child, out)


class _Reader:
    # pylint: disable=too-few-public-methods
    def __init__(self, data: bytes, offset: int):
        self.data = data
        self.offset = offset

    def take(self, fmt: struct.Struct) -> tuple:
        try:
            out = fmt.unpack_from(self.data, self.offset)
        except struct.error as e:
            raise ModelFormatError(f"truncated tree at byte {self.offset}") from e
        self.offset += fmt.size
        return out

    def values(self) -> tuple[float, ...]:
        (count,) = self.take(_FEATURE)
        return tuple(self.take(_FLOAT)[0] for _ in range(count))


def decode_node(data: bytes, offset: int = 0) -> tuple[Node, int]:
    """Inverse of encode_node. Returns the node and the offset just past it."""
    reader = _Reader(data, offset)
    node = _decode(reader)
    return node, reader.offset


def _decode(reader: _Reader) -> Node:
    if reader.offset >= len(reader.data):
        raise ModelFormatError(f"truncated tree at byte {reader.offset}")
    tag = reader.data[reader.offset : reader.offset + 1]
    reader.offset += 1
    pos, total = reader.take(_COUNTS)
    if tag == b"L":
        return Leaf(pos, total)
    (feature,) = reader.take(_FEATURE)
    if tag == b"N":
        (threshold,) = reader.take(_FLOAT)
        left = _decode(reader)
        return NumericSplit(feature, threshold, left, _decode(reader), pos, total)
    if tag == b"M":
        values = reader.values()
        children = tuple(_decode(reader) for _ in values)
        return MultiwaySplit(feature, values, children, pos, total)
    if tag == b"S":
        left_values, right_values = reader.values(), reader.values()
        left = _decode(reader)
        return SubsetSplit(feature, left_values, right_values, left, _decode(reader), pos, total)
    raise ModelFormatError(f"unknown tree node tag {tag!r} at byte {reader.offset - 1}")
