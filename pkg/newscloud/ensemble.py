"""Bootstrap aggregating over decision trees, and the binary model container."""

from __future__ import annotations

import dataclasses
import hashlib
import logging
import os
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from types import MappingProxyType
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ModelFormatError, ModelVersionError, ResourceError, SchemaMismatchError
from .features import (
    FEATURE_NAMES,
    FEATURE_SCHEMA_VERSION,
    FeatureVector,
    IdfTable,
    categorical_columns,
    feature_matrix,
    schema_hash,
)
from .tree import Algorithm, DecisionTree, TreeParams, decode_node, encode_node, train_tree

logger = logging.getLogger(__name__)

DEFAULT_N_BAGS = 10

# rng, n -> row indexes of one bag
Sampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclasses.dataclass(frozen=True)
class TrainingInstance:
    """One candidate with its label: does it match a gold keyphrase of its document?"""

    features: FeatureVector
    label: bool
    doc_id: str


def bootstrap_sample(rng: np.random.Generator, n: int) -> np.ndarray:
    """n row indexes drawn uniformly with replacement"""
    return rng.integers(0, n, size=n)


def identity_sample(_rng: np.random.Generator, n: int) -> np.ndarray:
    """Every row once, in order. Turns bagging into plain tree training."""
    return np.arange(n)


def instances_to_arrays(
    data: Sequence[TrainingInstance], feature_names: Sequence[str] = FEATURE_NAMES
) -> tuple[np.ndarray, np.ndarray]:
    X = feature_matrix([inst.features for inst in data], feature_names)
    y = np.array([inst.label for inst in data], dtype=bool)
    return X, y


def _subsample_negatives(
    rows: np.ndarray, y: np.ndarray, ratio: float, rng: np.random.Generator
) -> np.ndarray:
    """Keep every positive row and at most ratio * positives negative rows, in sample order"""
    labels = y[rows]
    negatives = np.flatnonzero(~labels)
    keep_neg = max(1, int(round(ratio * int(labels.sum()))))
    if keep_neg >= len(negatives):
        return rows
    dropped = rng.permutation(negatives)[keep_neg:]
    keep = np.ones(len(rows), dtype=bool)
    keep[dropped] = False
    return rows[keep]


@dataclasses.dataclass(frozen=True)
class BaggedTreeModel:
    """Trees trained on bootstrap samples; prediction is the mean of their probabilities."""

    trees: tuple[DecisionTree, ...]
    seed: int
    algorithm: Algorithm
    feature_names: tuple[str, ...] = FEATURE_NAMES
    # document frequencies of the training corpus, needed to compute idf at extraction time
    idf: Optional[IdfTable] = None

    def __post_init__(self):
        if not self.trees:
            raise ValueError("a bagged model needs at least one tree")
        if any(t.algorithm is not self.algorithm for t in self.trees):
            raise ValueError("all trees of a bagged model must use the same algorithm")

    @property
    def n_bags(self) -> int:
        return len(self.trees)

    @property
    def schema_hash(self) -> bytes:
        return schema_hash(self.feature_names)

    def check_schema(self, feature_names: Sequence[str]) -> None:
        """Raise SchemaMismatchError unless features are laid out as at training time"""
        if schema_hash(feature_names) != self.schema_hash:
            raise SchemaMismatchError(
                f"model was trained on features {list(self.feature_names)}, "
                f"got {list(feature_names)}"
            )

    def predict_proba(self, fv: FeatureVector | Sequence[float]) -> float:
        """Mean Laplace probability over the trees.

        A FeatureVector is projected onto the model's feature columns; a plain row must
        already have exactly those columns.
        """
        if isinstance(fv, FeatureVector):
            row = fv.to_array(self.feature_names)
        else:
            row = np.asarray(fv, dtype=np.float64)
            if row.shape != (len(self.feature_names),):
                raise SchemaMismatchError(
                    f"model expects {len(self.feature_names)} feature values, got {row.shape}"
                )
        return float(np.mean([tree.predict_proba(row) for tree in self.trees]))

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        # pylint: disable=invalid-name
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise SchemaMismatchError(
                f"model expects {len(self.feature_names)} feature columns, got shape {X.shape}"
            )
        return np.mean([tree.predict_many(X) for tree in self.trees], axis=0)


def train_bagging(
    data: Sequence[TrainingInstance],
    algorithm: Algorithm | str = Algorithm.CART,
    n_bags: int = DEFAULT_N_BAGS,
    seed: int = 0,
    params: Optional[TreeParams] = None,
    feature_names: Sequence[str] = FEATURE_NAMES,
    threads: int = 1,
    negative_ratio: Optional[float] = None,
    sampler: Sampler = bootstrap_sample,
    idf: Optional[IdfTable] = None,
) -> BaggedTreeModel:
    """Train n_bags trees, each on its own resample of data.

    Parameters
    ----------
    data:           labelled candidates
    algorithm:      "c45" or "cart"
    n_bags:         number of trees
    seed:           bag i draws from numpy's default_rng([seed, i]), so the model depends only
                    on (data, params, seed), not on thread count
    threads:        trees trained concurrently
    negative_ratio: if set, each bag keeps at most this many negatives per positive
    sampler:        draws the row indexes of one bag; identity_sample disables resampling
    idf:            document frequencies stored with the model for extraction time
    """
    # pylint: disable=too-many-arguments,too-many-locals
    if n_bags < 1:
        raise ValueError(f"n_bags must be >= 1, got {n_bags}")
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be in 0..2**64-1, got {seed}")
    if negative_ratio is not None and negative_ratio <= 0:
        raise ValueError(f"negative_ratio must be > 0, got {negative_ratio}")
    if not data:
        raise ValueError("training data is empty")
    algorithm = Algorithm(algorithm)
    params = params or TreeParams()
    feature_names = tuple(feature_names)
    categorical = categorical_columns(feature_names)
    X, y = instances_to_arrays(data, feature_names)  # pylint: disable=invalid-name
    n_pos = int(y.sum())
    logger.info(
        "training %d %s trees on %d instances (%d positive, %.1f%%)",
        n_bags,
        algorithm.value,
        len(y),
        n_pos,
        100.0 * n_pos / len(y),
    )

    def train_bag(bag: int) -> DecisionTree:
        start = time.perf_counter()
        rng = np.random.default_rng([seed, bag])
        rows = sampler(rng, len(y))
        if negative_ratio is not None:
            rows = _subsample_negatives(rows, y, negative_ratio, rng)
        tree = train_tree(X[rows], y[rows], algorithm, params, categorical)
        logger.debug(
            "bag %d: %d rows, %d nodes, depth %d, %.3fs",
            bag,
            len(rows),
            tree.n_nodes,
            tree.depth,
            time.perf_counter() - start,
        )
        return tree

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = tuple(pool.map(train_bag, range(n_bags)))
    else:
        trees = tuple(train_bag(bag) for bag in range(n_bags))
    return BaggedTreeModel(trees, seed, algorithm, feature_names, idf)


def predict_proba(model: BaggedTreeModel, fv: FeatureVector | Sequence[float]) -> float:
    return model.predict_proba(fv)


# Model container: header, feature names, each tree as a length-prefixed preorder encoding,
# then the training document frequencies (see docs/formats.md).

MAGIC = b"NCBT"
FORMAT_VERSION = 1
# magic, container version, algorithm, feature schema version, schema hash, seed, trees, names
_HEADER = struct.Struct("<4sHBH8sQIH")
_U32 = struct.Struct("<I")
_U16 = struct.Struct("<H")
_ALGORITHM_CODES = {Algorithm.C45: 0, Algorithm.CART: 1}
_ALGORITHMS = {code: alg for alg, code in _ALGORITHM_CODES.items()}


def _pack_text(text: str) -> bytes:
    encoded = text.encode("utf-8")
    return _U16.pack(len(encoded)) + encoded


def dumps_model(model: BaggedTreeModel) -> bytes:
    out = bytearray(
        _HEADER.pack(
            MAGIC,
            FORMAT_VERSION,
            _ALGORITHM_CODES[model.algorithm],
            FEATURE_SCHEMA_VERSION,
            model.schema_hash,
            model.seed,
            len(model.trees),
            len(model.feature_names),
        )
    )
    for name in model.feature_names:
        out += _pack_text(name)
    for tree in model.trees:
        body = bytearray()
        encode_node(tree.root, body)
        out += _U32.pack(len(body)) + body
    # doc_count 0 marks a model saved without document frequencies
    idf = model.idf
    out += _U32.pack(idf.doc_count if idf else 0)
    entries = sorted(idf.doc_freq.items()) if idf else []
    out += _U32.pack(len(entries))
    for phrase, df in entries:
        out += _pack_text(phrase) + _U32.pack(df)
    return bytes(out)


class _Cursor:
    """Bounds-checked reads from a byte buffer"""

    def __init__(self, data: bytes, offset: int):
        self.data = data
        self.offset = offset

    def take(self, fmt: struct.Struct) -> int:
        if self.offset + fmt.size > len(self.data):
            raise ModelFormatError(f"truncated model at byte {self.offset}")
        (value,) = fmt.unpack_from(self.data, self.offset)
        self.offset += fmt.size
        return value

    def text(self) -> str:
        length = self.take(_U16)
        end = self.offset + length
        if end > len(self.data):
            raise ModelFormatError(f"truncated model at byte {self.offset}")
        try:
            value = self.data[self.offset : end].decode("utf-8")
        except UnicodeDecodeError as e:
            raise ModelFormatError(f"corrupt text at byte {self.offset}: {e}") from e
        self.offset = end
        return value


def loads_model(data: bytes) -> BaggedTreeModel:
    """Inverse of dumps_model.

    Raises ModelFormatError on bad magic or truncation, and ModelVersionError when the
    container or feature schema version differs from this reader's.
    """
    if len(data) < _HEADER.size:
        raise ModelFormatError(f"truncated model header ({len(data)} bytes)")
    magic, version, alg_code, schema_version, digest, seed, n_trees, n_names = (
        _HEADER.unpack_from(data)
    )
    if magic != MAGIC:
        raise ModelFormatError(f"not a newscloud model (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise ModelVersionError("model", version, FORMAT_VERSION)
    if schema_version != FEATURE_SCHEMA_VERSION:
        raise ModelVersionError("feature schema", schema_version, FEATURE_SCHEMA_VERSION)
    if alg_code not in _ALGORITHMS:
        raise ModelFormatError(f"unknown algorithm code {alg_code}")
    algorithm = _ALGORITHMS[alg_code]

    cursor = _Cursor(data, _HEADER.size)
    names = tuple(cursor.text() for _ in range(n_names))
    trees = []
    for index in range(n_trees):
        length = cursor.take(_U32)
        end = cursor.offset + length
        if end > len(data):
            raise ModelFormatError(f"truncated tree {index}")
        root, stop = decode_node(data[:end], cursor.offset)
        if stop != end:
            raise ModelFormatError(f"tree {index} has {end - stop} trailing bytes")
        trees.append(DecisionTree(root, algorithm))
        cursor.offset = end

    doc_count = cursor.take(_U32)
    n_entries = cursor.take(_U32)
    doc_freq = {}
    for _ in range(n_entries):
        phrase = cursor.text()
        doc_freq[phrase] = cursor.take(_U32)
    if cursor.offset != len(data):
        raise ModelFormatError(f"{len(data) - cursor.offset} trailing bytes after the model")
    idf = IdfTable(doc_count, MappingProxyType(doc_freq)) if doc_count else None

    try:
        model = BaggedTreeModel(tuple(trees), seed, algorithm, names, idf)
    except ValueError as e:
        raise ModelFormatError(str(e)) from e
    if model.schema_hash != digest:
        raise ModelFormatError("feature schema hash does not match the stored feature names")
    return model


def save_model(model: BaggedTreeModel, path: os.PathLike | str) -> None:
    Path(path).write_bytes(dumps_model(model))
    logger.info("wrote %d-tree %s model to %s", model.n_bags, model.algorithm.value, path)


def load_model(path: os.PathLike | str) -> BaggedTreeModel:
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError as e:
        raise ResourceError(path, "model file not found") from e
    return loads_model(data)


def model_digest(model: BaggedTreeModel) -> str:
    """SHA-256 of the serialized model"""
    return hashlib.sha256(dumps_model(model)).hexdigest()
