"""Entropy, supervised discretization and Information Gain feature ranking."""

from __future__ import annotations

import math
from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .flow_model import Column, Dataset, FeatureKind, FlowRecord, Role, SchemaError, class_counts


def entropy(counts: Sequence[float]) -> float:
    """Shannon entropy in bits of a class-count vector (0 log 0 = 0)."""
    if any(c < 0 for c in counts):
        raise ValueError("class counts must be non-negative")
    total = sum(counts)
    if total <= 0:
        raise ValueError("entropy of an empty count vector is undefined")
    h = 0.0
    for c in counts:
        if c > 0:
            p = c / total
            h -= p * math.log2(p)
    return max(h, 0.0)


def _entropy_rows(counts: np.ndarray) -> np.ndarray:
    """Row-wise entropy of an (n, classes) count matrix; empty rows give 0."""
    totals = counts.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(totals > 0, counts / np.where(totals > 0, totals, 1), 0.0)
        logs = np.where(p > 0, np.log2(np.where(p > 0, p, 1)), 0.0)
    return -(p * logs).sum(axis=1)


@dataclass(frozen=True)
class CutPoints:
    feature: str
    thresholds: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        t = self.thresholds
        if any(not math.isfinite(x) for x in t) or any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError(f"thresholds for {self.feature!r} must be finite and strictly increasing")

    def bin_of(self, value: float) -> int:
        # Upper bins are closed on the left: value == threshold goes up.
        return bisect_right(self.thresholds, value)


@dataclass(frozen=True)
class DiscretizationMap:
    cuts: Mapping[str, CutPoints] = field(default_factory=dict)

    def __contains__(self, name: str) -> bool:
        return name in self.cuts

    def __getitem__(self, name: str) -> CutPoints:
        return self.cuts[name]


@dataclass(frozen=True)
class FeatureScore:
    feature: str
    ig: float


@dataclass(frozen=True)
class FeatureRanking:
    scores: tuple[FeatureScore, ...]

    @property
    def names(self) -> list[str]:
        return [s.feature for s in self.scores]

    def __len__(self) -> int:
        return len(self.scores)


# -- discretization ------------------------------------------------------------


def _value_class_table(values: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distinct sorted values and their (n_distinct, 2) class-count matrix."""
    distinct, inverse = np.unique(values, return_inverse=True)
    table = np.zeros((len(distinct), 2), dtype=np.int64)
    np.add.at(table, (inverse, labels), 1)
    return distinct, table


def _boundary_mask(table: np.ndarray) -> np.ndarray:
    """Cut positions between adjacent distinct values, excluding those whose
    two neighbours are both pure in the same class (never an optimal cut)."""
    pure_class = np.where(table[:, 0] == 0, 1, np.where(table[:, 1] == 0, 0, -1))
    return ~((pure_class[:-1] >= 0) & (pure_class[:-1] == pure_class[1:]))


def _midpoint(a: float, b: float) -> float:
    mid = (a + b) / 2.0
    return b if mid <= a else mid


def mdl_cut_points(values: np.ndarray, labels: np.ndarray) -> list[float]:
    """Fayyad-Irani recursive entropy discretization with the MDL stopping rule."""
    keep = ~np.isnan(values)
    values, labels = values[keep], labels[keep]
    if len(values) < 2:
        return []
    distinct, table = _value_class_table(values, labels)
    cuts: list[float] = []
    stack = [(0, len(distinct))]
    while stack:
        lo, hi = stack.pop()
        if hi - lo < 2:
            continue
        seg = table[lo:hi]
        total = seg.sum(axis=0)
        n = int(total.sum())
        left = np.cumsum(seg, axis=0)[:-1]
        right = total - left
        candidates = np.flatnonzero(_boundary_mask(seg))
        if len(candidates) == 0:
            continue
        n_left = left.sum(axis=1)
        ent_left = _entropy_rows(left)
        ent_right = _entropy_rows(right)
        weighted = (n_left * ent_left + (n - n_left) * ent_right) / n
        best = int(candidates[np.argmin(weighted[candidates])])

        h_total = entropy(total.tolist())
        gain = h_total - weighted[best]
        k = int((total > 0).sum())
        k1 = int((left[best] > 0).sum())
        k2 = int((right[best] > 0).sum())
        delta = math.log2(3**k - 2) - (k * h_total - k1 * ent_left[best] - k2 * ent_right[best])
        if gain <= (math.log2(n - 1) + delta) / n:
            continue
        cuts.append(_midpoint(distinct[lo + best], distinct[lo + best + 1]))
        stack.append((lo, lo + best + 1))
        stack.append((lo + best + 1, hi))
    return sorted(cuts)


def discretize_mdl(d: Dataset, feature: str) -> CutPoints:
    if d.schema.feature_kind(feature) is not FeatureKind.NUMERIC:
        raise SchemaError(f"feature {feature!r} is not numeric")
    return CutPoints(feature, tuple(mdl_cut_points(d.column(feature), d.labels)))


def discretize_equal_frequency(d: Dataset, feature: str, n_bins: int = 10) -> CutPoints:
    """Unsupervised fallback: cut at the empirical quantiles."""
    if d.schema.feature_kind(feature) is not FeatureKind.NUMERIC:
        raise SchemaError(f"feature {feature!r} is not numeric")
    values = d.column(feature)
    values = np.sort(values[~np.isnan(values)])
    if len(values) == 0 or n_bins < 2:
        return CutPoints(feature)
    # Each cut is the first value of its bin, so bins hold n / n_bins values.
    qs = values[(np.arange(1, n_bins) * len(values)) // n_bins]
    cuts = sorted({float(q) for q in qs if q > values[0]})
    return CutPoints(feature, tuple(cuts))


def fit_discretization(
    d: Dataset, features: Optional[Iterable[str]] = None, method: str = "mdl", n_bins: int = 10
) -> DiscretizationMap:
    names = d.schema.numeric_features() if features is None else list(features)
    if method == "mdl":
        return DiscretizationMap({f: discretize_mdl(d, f) for f in names})
    if method == "equal_frequency":
        return DiscretizationMap({f: discretize_equal_frequency(d, f, n_bins) for f in names})
    raise ValueError(f"unknown discretization method {method!r}")


def bin_token(i: int) -> str:
    return f"bin_{i}"


def apply_discretization(d: Dataset, m: DiscretizationMap) -> Dataset:
    """Replace numeric feature values with ``bin_i`` tokens."""
    numeric = [j for j, c in enumerate(d.schema.feature_columns) if c.kind is FeatureKind.NUMERIC]
    for j in numeric:
        name = d.schema.feature_columns[j].name
        if name not in m:
            raise SchemaError(f"discretization map does not cover feature {name!r}")
    if not numeric:
        return d
    cuts = {j: m[d.schema.feature_columns[j].name] for j in numeric}
    cols = [
        Column(c.name, FeatureKind.CATEGORICAL, c.role) if j in cuts else c
        for j, c in enumerate(d.schema.feature_columns)
    ]
    schema = d.schema.replace_features(cols)
    records = []
    for r in d.records:
        feats = tuple(
            (None if v is None else bin_token(cuts[j].bin_of(v))) if j in cuts else v
            for j, v in enumerate(r.features)
        )
        records.append(FlowRecord(r.key, feats, r.label, r.attack_cat))
    return Dataset(schema, tuple(records))


# -- information gain ------------------------------------------------------------


def _group_keys(d: Dataset, feature: str, m: Optional[DiscretizationMap]) -> list:
    col = d.column(feature)
    if d.schema.feature_kind(feature) is FeatureKind.NUMERIC:
        if m is None or feature not in m:
            raise SchemaError(f"no cut points for numeric feature {feature!r}")
        thresholds = np.asarray(m[feature].thresholds)
        bins = np.searchsorted(thresholds, col, side="right")
        bins[np.isnan(col)] = -1
        return bins.tolist()
    return ["\x00missing" if v is None else v for v in col]


def information_gain(d: Dataset, feature: str, m: Optional[DiscretizationMap] = None) -> FeatureScore:
    """Entropy reduction from partitioning ``d`` on the (discretized) feature.

    Missing values form a partition of their own.
    """
    labels = d.labels
    n = len(labels)
    if n == 0:
        raise ValueError("information gain of an empty dataset is undefined")
    h_class = entropy(list(class_counts(d)))
    keys = _group_keys(d, feature, m)
    pair_counts = Counter(zip(keys, labels.tolist()))
    groups: dict = {}
    for (key, label), count in pair_counts.items():
        groups.setdefault(key, [0, 0])[label] += count
    conditional = 0.0
    for key in sorted(groups, key=lambda k: (type(k).__name__, k)):
        counts = groups[key]
        conditional += (sum(counts) / n) * entropy(counts)
    ig = min(max(h_class - conditional, 0.0), h_class)
    return FeatureScore(feature, ig)


def rank_features(d: Dataset, method: str = "mdl") -> FeatureRanking:
    """Score every feature by Information Gain and sort descending.

    Numeric features are discretized first (MDL by default); ties keep
    schema column order.
    """
    names = d.schema.feature_names
    if not names:
        raise SchemaError("dataset has no feature columns")
    m = fit_discretization(d, method=method)
    scores = [information_gain(d, name, m) for name in names]
    order = sorted(range(len(scores)), key=lambda i: (-scores[i].ig, i))
    return FeatureRanking(tuple(scores[i] for i in order))


def select_top_k(r: FeatureRanking, k: int) -> list[str]:
    if not 1 <= k <= len(r.scores):
        raise ValueError(f"k must lie in [1, {len(r.scores)}], got {k}")
    return [s.feature for s in r.scores[:k]]


def format_ranking(r: FeatureRanking) -> str:
    return "".join(f"{i},{s.feature},{s.ig:.3f}\n" for i, s in enumerate(r.scores, 1))


def parse_ranking(text: str) -> FeatureRanking:
    scores = []
    for line in text.splitlines():
        if line.strip():
            _, name, ig = line.split(",")
            scores.append(FeatureScore(name, float(ig)))
    return FeatureRanking(tuple(scores))


# -- one-hot encoding (for the neural network) -----------------------------------


@dataclass(frozen=True)
class OneHotEncoder:
    """Sorted vocabulary of each categorical feature."""

    vocab: Mapping[str, tuple[str, ...]]

    @classmethod
    def fit(cls, d: Dataset) -> "OneHotEncoder":
        vocab = {}
        for name in d.schema.categorical_features():
            vocab[name] = tuple(sorted({v for v in d.column(name) if v is not None}))
        return cls(vocab)

    def transform(self, d: Dataset) -> Dataset:
        if not self.vocab:
            return d
        cols: list[Column] = []
        plan = []
        for j, c in enumerate(d.schema.feature_columns):
            if c.kind is FeatureKind.CATEGORICAL:
                if c.name not in self.vocab:
                    raise SchemaError(f"encoder has no vocabulary for {c.name!r}")
                tokens = self.vocab[c.name]
                cols.extend(Column(f"{c.name}={t}", FeatureKind.NUMERIC, Role.FEATURE) for t in tokens)
                plan.append((j, tokens))
            else:
                cols.append(c)
                plan.append((j, None))
        schema = d.schema.replace_features(cols)
        records = []
        for r in d.records:
            feats: list = []
            for j, tokens in plan:
                v = r.features[j]
                if tokens is None:
                    feats.append(v)
                else:
                    feats.extend(1.0 if v == t else 0.0 for t in tokens)
            records.append(FlowRecord(r.key, tuple(feats), r.label, r.attack_cat))
        return Dataset(schema, tuple(records))
