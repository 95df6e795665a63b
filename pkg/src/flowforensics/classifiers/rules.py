"""Class association rules mined level-wise (Apriori) and applied as an ordered list."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from ..flow_model import Dataset, FlowRecord, SchemaError

Item = tuple[str, str]


@dataclass(frozen=True)
class ClassRule:
    antecedent: tuple[Item, ...]
    consequent: int
    support: float
    confidence: float
    id: int
    # Exact counts behind support and confidence.
    rule_count: int = 0
    antecedent_count: int = 0

    def __post_init__(self):
        if not self.antecedent:
            raise ValueError("a rule needs a non-empty antecedent")

    def matches(self, items: frozenset) -> bool:
        return all(i in items for i in self.antecedent)

    def describe(self) -> str:
        lhs = ", ".join(f"{f}={t}" for f, t in self.antecedent)
        return f"{{{lhs}}} => {self.consequent}"


def rule_sort_key(r: ClassRule):
    conf = Fraction(r.rule_count, r.antecedent_count) if r.antecedent_count else Fraction(r.confidence)
    return (-conf, -r.rule_count, len(r.antecedent), r.id)


@dataclass(frozen=True)
class RuleListModel:
    features: tuple[str, ...]
    rules: tuple[ClassRule, ...]
    default_label: int
    min_support: float = 0.01
    min_confidence: float = 0.8
    max_antecedent: int = 3

    def rule_by_id(self, rule_id: int) -> ClassRule:
        for r in self.rules:
            if r.id == rule_id:
                return r
        raise KeyError(rule_id)


def is_frequent(count: int, n: int, min_support: float) -> bool:
    return count / n >= min_support


def frequent_itemsets(
    d: Dataset, min_support: float, max_antecedent: int
) -> list[tuple[tuple[Item, ...], np.ndarray]]:
    """All itemsets up to ``max_antecedent`` items whose support reaches
    ``min_support``, with the boolean record mask of each, in level then
    lexicographic order (items ordered by feature position, then token)."""
    n = len(d)
    names = d.schema.feature_names
    item_masks: dict[Item, np.ndarray] = {}
    order: dict[Item, tuple[int, str]] = {}
    for j, name in enumerate(names):
        col = d.column(name)
        for token in sorted({v for v in col if v is not None}):
            mask = col == token
            if is_frequent(int(mask.sum()), n, min_support):
                item_masks[(name, token)] = mask
                order[(name, token)] = (j, token)

    level = [((item,), item_masks[item]) for item in sorted(item_masks, key=order.__getitem__)]
    out = list(level)
    for _ in range(1, max_antecedent):
        seen = {s for s, _ in level}
        nxt = []
        for a in range(len(level)):
            prefix, mask = level[a]
            last = prefix[-1]
            for b in range(a + 1, len(level)):
                other = level[b][0]
                if other[:-1] != prefix[:-1]:
                    break
                new = other[-1]
                if order[new][0] == order[last][0]:
                    continue
                cand = prefix + (new,)
                # Apriori pruning: every (k-1)-subset must itself be frequent.
                if any(cand[:i] + cand[i + 1 :] not in seen for i in range(len(cand) - 2)):
                    continue
                cmask = mask & item_masks[new]
                if is_frequent(int(cmask.sum()), n, min_support):
                    nxt.append((cand, cmask))
        if not nxt:
            break
        out.extend(nxt)
        level = nxt
    return out


def mine_class_rules(
    d: Dataset, min_support: float = 0.01, min_confidence: float = 0.8, max_antecedent: int = 3
) -> RuleListModel:
    numeric = d.schema.numeric_features()
    if numeric:
        raise SchemaError(f"rule mining needs categorical features; discretize first: {', '.join(numeric)}")
    for label, v in (("min_support", min_support), ("min_confidence", min_confidence)):
        if not 0 < v <= 1:
            raise ValueError(f"{label} must lie in (0, 1], got {v}")
    if max_antecedent < 1:
        raise ValueError("max_antecedent must be >= 1")
    y = d.labels
    n = len(y)
    counts = np.bincount(y, minlength=2)
    default = 1 if counts[1] > counts[0] else 0
    if n == 0:
        return RuleListModel(d.schema.feature_names, (), default, min_support, min_confidence, max_antecedent)

    is_attack = y == 1
    rules = []
    for itemset, mask in frequent_itemsets(d, min_support, max_antecedent):
        total = int(mask.sum())
        n_attack = int((mask & is_attack).sum())
        for cls, hits in ((0, total - n_attack), (1, n_attack)):
            if hits / total >= min_confidence:
                rules.append(ClassRule(itemset, cls, hits / n, hits / total, len(rules), hits, total))
    rules.sort(key=rule_sort_key)
    return RuleListModel(d.schema.feature_names, tuple(rules), default, min_support, min_confidence, max_antecedent)


def record_items(features: Sequence[str], r: FlowRecord) -> frozenset:
    return frozenset((f, v) for f, v in zip(features, r.features) if v is not None)


def predict_rules(m: RuleListModel, r: FlowRecord) -> tuple[int, Optional[int]]:
    """Label of the first matching rule and its id, or the default label."""
    if len(r.features) != len(m.features):
        raise SchemaError(f"record has {len(r.features)} features, model expects {len(m.features)}")
    items = record_items(m.features, r)
    for rule in m.rules:
        if rule.matches(items):
            return rule.consequent, rule.id
    return m.default_label, None


def predict_rules_dataset(m: RuleListModel, d: Dataset) -> tuple[np.ndarray, list[Optional[int]]]:
    if tuple(d.schema.feature_names) != tuple(m.features):
        raise SchemaError("dataset features do not match the rule list's training features")
    n = len(d)
    labels = np.full(n, m.default_label, dtype=np.int64)
    ids = np.full(n, -1, dtype=np.int64)
    open_ = np.ones(n, dtype=bool)
    masks: dict[Item, np.ndarray] = {}
    for rule in m.rules:
        if not open_.any():
            break
        hit = open_.copy()
        for item in rule.antecedent:
            if item not in masks:
                masks[item] = d.column(item[0]) == item[1]
            hit &= masks[item]
        labels[hit] = rule.consequent
        ids[hit] = rule.id
        open_ &= ~hit
    return labels, [None if i < 0 else int(i) for i in ids]
