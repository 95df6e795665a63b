"""C4.5 decision tree: gain-ratio splits with the mean-gain guard, error-based pruning."""

from __future__ import annotations

import math
import sys
from contextlib import contextmanager
from dataclasses import dataclass
from statistics import NormalDist
from typing import Mapping, Optional, Union

import numpy as np

from ..flow_model import Dataset, FeatureKind, FlowRecord, SchemaError
from ..ingest import MISSING_TOKEN
from ..preprocess import _boundary_mask, _entropy_rows, _midpoint, entropy


@dataclass(frozen=True)
class Leaf:
    label: int
    class_counts: tuple[int, int]


@dataclass(frozen=True)
class NumericSplit:
    feature: str
    threshold: float
    below: "TreeNode"
    at_or_above: "TreeNode"
    class_counts: tuple[int, int]
    # Records with a missing value follow the branch that saw more training data.
    missing_to_above: bool = False


@dataclass(frozen=True)
class CategoricalSplit:
    feature: str
    branches: Mapping[str, "TreeNode"]
    fallback: "TreeNode"
    class_counts: tuple[int, int]


TreeNode = Union[Leaf, NumericSplit, CategoricalSplit]


@dataclass(frozen=True)
class DecisionTreeModel:
    root: TreeNode
    features: tuple[str, ...]
    min_leaf: int = 2
    confidence_factor: Optional[float] = 0.25

    def n_leaves(self) -> int:
        return sum(1 for n in iter_nodes(self.root) if isinstance(n, Leaf))

    def depth(self) -> int:
        return _depth(self.root)


def iter_nodes(node: TreeNode):
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        if isinstance(n, NumericSplit):
            stack.extend((n.below, n.at_or_above))
        elif isinstance(n, CategoricalSplit):
            stack.extend(n.branches.values())


def _depth(node: TreeNode) -> int:
    if isinstance(node, Leaf):
        return 0
    if isinstance(node, NumericSplit):
        return 1 + max(_depth(node.below), _depth(node.at_or_above))
    return 1 + max(_depth(b) for b in node.branches.values())


def _majority(counts) -> int:
    # Ties go to normal traffic.
    return 1 if counts[1] > counts[0] else 0


def _leaf(counts) -> Leaf:
    counts = (int(counts[0]), int(counts[1]))
    return Leaf(_majority(counts), counts)


@contextmanager
def _recursion_limit(limit: int):
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, limit))
    try:
        yield
    finally:
        sys.setrecursionlimit(old)


# -- pessimistic error estimate ----------------------------------------------------


def added_errors(n: float, e: float, cf: float) -> float:
    """Extra errors predicted for a leaf covering ``n`` records with ``e``
    training errors: the upper limit of the binomial confidence interval at
    level ``cf`` minus ``e``."""
    if e < 1:
        base = n * (1 - cf ** (1 / n))
        if e == 0:
            return base
        return base + e * (added_errors(n, 1, cf) - base)
    if e + 0.5 >= n:
        return max(n - e, 0.0)
    z = NormalDist().inv_cdf(1 - cf)
    f = (e + 0.5) / n
    r = (f + z * z / (2 * n) + z * math.sqrt(f / n - f * f / n + z * z / (4 * n * n))) / (1 + z * z / n)
    return r * n - e


def _estimated_errors(node: TreeNode, cf: float) -> float:
    if isinstance(node, Leaf):
        n = sum(node.class_counts)
        if n == 0:
            return 0.0
        e = n - max(node.class_counts)
        return e + added_errors(n, e, cf)
    children = [node.below, node.at_or_above] if isinstance(node, NumericSplit) else node.branches.values()
    return sum(_estimated_errors(c, cf) for c in children)


def _prune(node: TreeNode, cf: float) -> TreeNode:
    if isinstance(node, Leaf):
        return node
    if isinstance(node, NumericSplit):
        node = NumericSplit(
            node.feature,
            node.threshold,
            _prune(node.below, cf),
            _prune(node.at_or_above, cf),
            node.class_counts,
            node.missing_to_above,
        )
    else:
        node = CategoricalSplit(
            node.feature,
            {t: _prune(b, cf) for t, b in node.branches.items()},
            node.fallback,
            node.class_counts,
        )
    as_leaf = _leaf(node.class_counts)
    if _estimated_errors(as_leaf, cf) <= _estimated_errors(node, cf) + 0.1:
        return as_leaf
    return node


# -- growth ------------------------------------------------------------------------


@dataclass
class _Candidate:
    gain: float
    ratio: float
    feature: int
    threshold: Optional[float] = None


class _Grower:
    def __init__(self, d: Dataset, min_leaf: int):
        self.names = d.schema.feature_names
        self.numeric = [c.kind is FeatureKind.NUMERIC for c in d.schema.feature_columns]
        self.y = d.labels
        self.min_leaf = min_leaf
        self.columns = []
        self.vocab = []
        for name, is_num in zip(self.names, self.numeric):
            col = d.column(name)
            if is_num:
                self.columns.append(col)
                self.vocab.append(None)
            else:
                tokens = np.array([MISSING_TOKEN if v is None else v for v in col], dtype=object)
                vocab, codes = np.unique(tokens, return_inverse=True) if len(tokens) else (np.array([], dtype=object), np.array([], dtype=np.int64))
                self.columns.append(codes)
                self.vocab.append([str(v) for v in vocab])

    def counts(self, idx: np.ndarray) -> np.ndarray:
        return np.bincount(self.y[idx], minlength=2)

    def _numeric_candidate(self, j: int, idx: np.ndarray, node_counts: np.ndarray) -> Optional[_Candidate]:
        vals = self.columns[j][idx]
        known = ~np.isnan(vals)
        n_total = len(idx)
        n_known = int(known.sum())
        if n_known < 2 * self.min_leaf:
            return None
        v, y = vals[known], self.y[idx][known]
        distinct, inverse = np.unique(v, return_inverse=True)
        if len(distinct) < 2:
            return None
        table = np.zeros((len(distinct), 2), dtype=np.int64)
        np.add.at(table, (inverse, y), 1)
        left = np.cumsum(table, axis=0)[:-1]
        total = table.sum(axis=0)
        right = total - left
        n_left = left.sum(axis=1)
        ok = _boundary_mask(table) & (n_left >= self.min_leaf) & (n_known - n_left >= self.min_leaf)
        cand = np.flatnonzero(ok)
        if len(cand) == 0:
            return None
        weighted = (n_left * _entropy_rows(left) + (n_known - n_left) * _entropy_rows(right)) / n_known
        best = int(cand[np.argmin(weighted[cand])])
        frac = n_known / n_total
        gain = frac * (entropy(total.tolist()) - weighted[best])
        parts = [int(n_left[best]), n_known - int(n_left[best]), n_total - n_known]
        split_info = entropy([p for p in parts if p > 0])
        if split_info <= 0:
            return None
        return _Candidate(max(gain, 0.0), max(gain, 0.0) / split_info, j, _midpoint(distinct[best], distinct[best + 1]))

    def _categorical_candidate(self, j: int, idx: np.ndarray, node_counts: np.ndarray) -> Optional[_Candidate]:
        codes = self.columns[j][idx]
        n_vocab = len(self.vocab[j])
        table = np.zeros((n_vocab, 2), dtype=np.int64)
        np.add.at(table, (codes, self.y[idx]), 1)
        sizes = table.sum(axis=1)
        if (sizes >= self.min_leaf).sum() < 2:
            return None
        present = sizes > 0
        n = len(idx)
        cond = float((sizes[present] * _entropy_rows(table[present])).sum() / n)
        gain = max(entropy(node_counts.tolist()) - cond, 0.0)
        split_info = entropy(sizes[present].tolist())
        if split_info <= 0:
            return None
        return _Candidate(gain, gain / split_info, j)

    def grow(self, idx: np.ndarray) -> TreeNode:
        node_counts = self.counts(idx)
        if node_counts.min() == 0 or len(idx) < 2 * self.min_leaf:
            return _leaf(node_counts)
        candidates = []
        for j, is_num in enumerate(self.numeric):
            c = (self._numeric_candidate if is_num else self._categorical_candidate)(j, idx, node_counts)
            if c is not None:
                candidates.append(c)
        if not candidates:
            return _leaf(node_counts)
        mean_gain = sum(c.gain for c in candidates) / len(candidates)
        eligible = [c for c in candidates if c.gain >= mean_gain - 1e-12]
        best = max(eligible, key=lambda c: (c.ratio, -c.feature))
        j = best.feature
        name = self.names[j]
        counts = (int(node_counts[0]), int(node_counts[1]))
        if self.numeric[j]:
            vals = self.columns[j][idx]
            missing = np.isnan(vals)
            above = vals >= best.threshold
            below = ~above & ~missing
            to_above = int(above.sum()) > int(below.sum())
            if to_above:
                above |= missing
            else:
                below |= missing
            return NumericSplit(
                name,
                float(best.threshold),
                self.grow(idx[below]),
                self.grow(idx[above]),
                counts,
                to_above,
            )
        codes = self.columns[j][idx]
        branches = {}
        for code in np.unique(codes):
            branches[self.vocab[j][code]] = self.grow(idx[codes == code])
        return CategoricalSplit(name, branches, _leaf(node_counts), counts)


def train_c45(d: Dataset, min_leaf: int = 2, confidence_factor: Optional[float] = 0.25) -> DecisionTreeModel:
    """Grow a C4.5 tree on ``d``; ``confidence_factor=None`` disables pruning."""
    if len(d) == 0:
        raise ValueError("cannot train a decision tree on an empty dataset")
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    if confidence_factor is not None and not 0 < confidence_factor <= 0.5:
        raise ValueError("confidence_factor must lie in (0, 0.5]")
    grower = _Grower(d, min_leaf)
    with _recursion_limit(20000):
        root = grower.grow(np.arange(len(d)))
        if confidence_factor is not None:
            root = _prune(root, confidence_factor)
    return DecisionTreeModel(root, d.schema.feature_names, min_leaf, confidence_factor)


def _check_width(model_features, record: FlowRecord):
    if len(record.features) != len(model_features):
        raise SchemaError(f"record has {len(record.features)} features, model expects {len(model_features)}")


def predict_tree(m: DecisionTreeModel, r: FlowRecord) -> int:
    _check_width(m.features, r)
    index = {name: i for i, name in enumerate(m.features)}
    return _walk(m.root, r.features, index)


def _walk(node: TreeNode, features, index) -> int:
    while not isinstance(node, Leaf):
        v = features[index[node.feature]]
        if isinstance(node, NumericSplit):
            if v is None:
                node = node.at_or_above if node.missing_to_above else node.below
            else:
                node = node.at_or_above if v >= node.threshold else node.below
        else:
            token = MISSING_TOKEN if v is None else v
            node = node.branches.get(token, node.fallback)
    return node.label


def predict_tree_dataset(m: DecisionTreeModel, d: Dataset) -> np.ndarray:
    if tuple(d.schema.feature_names) != tuple(m.features):
        raise SchemaError("dataset features do not match the tree's training features")
    index = {name: i for i, name in enumerate(m.features)}
    return np.array([_walk(m.root, r.features, index) for r in d.records], dtype=np.int64)
