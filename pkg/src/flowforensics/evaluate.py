"""Confusion matrices, Accuracy / False Alarm Rate, and stratified k-fold cross-validation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .classifiers.model import ClassifierSpec, fit
from .flow_model import Dataset, project_features
from .preprocess import rank_features, select_top_k

log = logging.getLogger(__name__)

MODES = ("reproduction", "rigorous")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion-matrix cells must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class Metrics:
    """Exact rational accuracy (overall success rate) and false alarm rate."""

    accuracy: Fraction
    far: Fraction

    @property
    def accuracy_pct(self) -> str:
        return percent(self.accuracy)

    @property
    def far_pct(self) -> str:
        return percent(self.far)


def percent(x: Fraction) -> str:
    """Format a ratio as a percentage with two decimals, rounding half up."""
    value = Decimal(x.numerator * 100) / Decimal(x.denominator)
    return f"{value.quantize(Decimal('0.01'), rounding=ROUND_HALF_UP)}%"


def confusion_matrix(predicted: Sequence[int], actual: Sequence[int]) -> ConfusionMatrix:
    p = np.asarray(predicted, dtype=np.int64)
    a = np.asarray(actual, dtype=np.int64)
    if p.shape != a.shape:
        raise ValueError(f"length mismatch: {len(p)} predictions, {len(a)} labels")
    if len(p) and (not np.isin(p, (0, 1)).all() or not np.isin(a, (0, 1)).all()):
        raise ValueError("labels must be 0 or 1")
    return ConfusionMatrix(
        tp=int(((p == 1) & (a == 1)).sum()),
        tn=int(((p == 0) & (a == 0)).sum()),
        fp=int(((p == 1) & (a == 0)).sum()),
        fn=int(((p == 0) & (a == 1)).sum()),
    )


def metrics(cm: ConfusionMatrix) -> Metrics:
    if cm.total == 0:
        raise ValueError("metrics of an empty confusion matrix are undefined")
    return Metrics(Fraction(cm.tn + cm.tp, cm.total), Fraction(cm.fp + cm.fn, cm.total))


def stratified_folds(labels_or_dataset, k: int, seed: int) -> list[np.ndarray]:
    """Split record indices into ``k`` class-stratified folds.

    Each class is shuffled by the seeded generator and dealt round-robin; the
    deal continues across classes so fold sizes also differ by at most one.
    """
    labels = labels_or_dataset.labels if isinstance(labels_or_dataset, Dataset) else np.asarray(labels_or_dataset)
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    start = 0
    for cls in (0, 1):
        idx = np.flatnonzero(labels == cls)
        if len(idx) < k:
            raise ValueError(f"class {cls} has {len(idx)} records, fewer than k={k}")
        idx = rng.permutation(idx)
        for pos, i in enumerate(idx):
            folds[(start + pos) % k].append(int(i))
        start = (start + len(idx)) % k
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]


@dataclass(frozen=True)
class CvReport:
    classifier: str
    k: int
    seed: int
    mode: str
    folds: tuple[ConfusionMatrix, ...]
    features: Optional[tuple[str, ...]] = None
    fold_features: tuple[tuple[str, ...], ...] = field(default=())

    @property
    def pooled(self) -> ConfusionMatrix:
        total = ConfusionMatrix()
        for cm in self.folds:
            total = total + cm
        return total

    @property
    def metrics(self) -> Metrics:
        return metrics(self.pooled)


def cross_validate(
    d: Dataset,
    spec: ClassifierSpec,
    k: int = 10,
    seed: int = 0,
    features: Optional[Sequence[str]] = None,
    mode: str = "reproduction",
    top_k: Optional[int] = None,
) -> CvReport:
    """Stratified k-fold cross-validation of one classifier.

    In reproduction mode ``features`` (if given) are projected once, before
    folding. In rigorous mode features are re-ranked on every training fold
    and the best ``top_k`` kept. Pooled counts are the sum over folds.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {', '.join(MODES)}")
    if features is not None:
        d = project_features(d, list(features))
    folds = stratified_folds(d, k, seed)
    labels = d.labels
    in_fold = np.empty(len(d), dtype=np.int64)
    for i, f in enumerate(folds):
        in_fold[f] = i

    matrices = []
    chosen = []
    for i, test_idx in enumerate(folds):
        train_idx = np.flatnonzero(in_fold != i)
        train, test = d.subset(train_idx.tolist()), d.subset(test_idx.tolist())
        if mode == "rigorous" and top_k is not None:
            keep = select_top_k(rank_features(train), min(top_k, len(train.schema.feature_names)))
            train, test = project_features(train, keep), project_features(test, keep)
            chosen.append(tuple(keep))
        model = fit(spec, train, seed=seed)
        predicted, _ = model.predict_batch(test)
        matrices.append(confusion_matrix(predicted, labels[test_idx]))
        log.debug("%s fold %d/%d: %s", spec.name, i + 1, k, matrices[-1])
    return CvReport(
        spec.name,
        k,
        seed,
        mode,
        tuple(matrices),
        None if features is None else tuple(features),
        tuple(chosen),
    )


def _cm_row(label: str, cm: ConfusionMatrix) -> str:
    m = metrics(cm)
    return f"{label},{cm.tp},{cm.tn},{cm.fp},{cm.fn},{m.accuracy_pct},{m.far_pct}"


def format_report(reports: Sequence[CvReport]) -> str:
    """Render reports as line-oriented text, one section per classifier."""
    lines = []
    for rep in reports:
        lines.append(f"[{rep.classifier}]")
        lines.append(f"classifier={rep.classifier}")
        lines.append(f"k={rep.k}")
        lines.append(f"seed={rep.seed}")
        lines.append(f"mode={rep.mode}")
        if rep.features is not None:
            lines.append(f"features={','.join(rep.features)}")
        for i, ff in enumerate(rep.fold_features, 1):
            lines.append(f"fold_features.{i}={','.join(ff)}")
        lines.append("fold,tp,tn,fp,fn,accuracy,far")
        for i, cm in enumerate(rep.folds, 1):
            lines.append(_cm_row(str(i), cm))
        lines.append(_cm_row("pooled", rep.pooled))
        lines.append("")
    return "\n".join(lines)
