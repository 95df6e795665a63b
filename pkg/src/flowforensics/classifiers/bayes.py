"""Naive Bayes with Gaussian numeric likelihoods and Laplace-smoothed categorical tables."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..flow_model import Dataset, FeatureKind, FlowRecord, SchemaError

LOG_2PI = math.log(2 * math.pi)


@dataclass(frozen=True)
class GaussianParams:
    mean: tuple[float, float]
    variance: tuple[float, float]
    floor: float


@dataclass(frozen=True)
class CategoricalParams:
    tokens: tuple[str, ...]
    # probs[c][i] = P(tokens[i] | class c)
    probs: tuple[tuple[float, ...], tuple[float, ...]]


@dataclass(frozen=True)
class NaiveBayesModel:
    features: tuple[str, ...]
    priors: tuple[float, float]
    params: Mapping[str, object]
    variance_floor: float = 1e-9
    laplace_alpha: float = 1.0


def train_nb(d: Dataset, variance_floor: float = 1e-9, laplace_alpha: float = 1.0) -> NaiveBayesModel:
    """Fit class priors and per-class feature likelihoods.

    ``variance_floor`` is relative: each numeric feature's variances are
    floored at ``variance_floor * range`` (or ``variance_floor`` when the
    feature is constant). Variances are maximum-likelihood estimates.
    """
    if variance_floor <= 0 or laplace_alpha <= 0:
        raise ValueError("variance_floor and laplace_alpha must be positive")
    y = d.labels
    n_class = np.bincount(y, minlength=2)
    if (n_class == 0).any():
        missing = [str(c) for c in (0, 1) if n_class[c] == 0]
        raise ValueError(f"class {', '.join(missing)} has no training records")
    priors = (float(n_class[0] / len(y)), float(n_class[1] / len(y)))

    params: dict[str, object] = {}
    for c in d.schema.feature_columns:
        col = d.column(c.name)
        if c.kind is FeatureKind.NUMERIC:
            known = ~np.isnan(col)
            span = float(col[known].max() - col[known].min()) if known.any() else 0.0
            floor = variance_floor * (span if span > 0 else 1.0)
            means, variances = [], []
            for cls in (0, 1):
                v = col[known & (y == cls)]
                mean = float(v.mean()) if len(v) else 0.0
                var = float(v.var()) if len(v) else 0.0
                means.append(mean)
                variances.append(max(var, floor))
            params[c.name] = GaussianParams(tuple(means), tuple(variances), floor)
        else:
            tokens = tuple(sorted({v for v in col if v is not None}))
            probs = []
            for cls in (0, 1):
                values = [v for v, label in zip(col, y) if label == cls and v is not None]
                n_c = len(values)
                counts = {t: 0 for t in tokens}
                for v in values:
                    counts[v] += 1
                denom = n_c + laplace_alpha * len(tokens)
                probs.append(tuple((counts[t] + laplace_alpha) / denom for t in tokens))
            params[c.name] = CategoricalParams(tokens, (probs[0], probs[1]))
    return NaiveBayesModel(d.schema.feature_names, priors, params, variance_floor, laplace_alpha)


def gaussian_log_density(x: float, mean: float, variance: float) -> float:
    return -0.5 * (LOG_2PI + math.log(variance) + (x - mean) ** 2 / variance)


def log_posteriors(m: NaiveBayesModel, r: FlowRecord) -> tuple[float, float]:
    """Unnormalised log P(C) + sum log p(x_j | C) for both classes.

    Missing values and tokens never seen in training contribute nothing.
    """
    if len(r.features) != len(m.features):
        raise SchemaError(f"record has {len(r.features)} features, model expects {len(m.features)}")
    out = [math.log(m.priors[0]), math.log(m.priors[1])]
    for name, v in zip(m.features, r.features):
        if v is None:
            continue
        p = m.params[name]
        if isinstance(p, GaussianParams):
            for c in (0, 1):
                out[c] += gaussian_log_density(v, p.mean[c], p.variance[c])
        else:
            try:
                i = p.tokens.index(v)
            except ValueError:
                continue
            for c in (0, 1):
                out[c] += math.log(p.probs[c][i])
    return out[0], out[1]


def decide(log_post: tuple[float, float]) -> int:
    # Exact ties resolve to normal.
    return 1 if log_post[1] > log_post[0] else 0


def predict_nb(m: NaiveBayesModel, r: FlowRecord) -> tuple[int, tuple[float, float]]:
    lp = log_posteriors(m, r)
    return decide(lp), lp


def predict_nb_dataset(m: NaiveBayesModel, d: Dataset) -> np.ndarray:
    if tuple(d.schema.feature_names) != tuple(m.features):
        raise SchemaError("dataset features do not match the model's training features")
    n = len(d)
    lp = np.tile([math.log(m.priors[0]), math.log(m.priors[1])], (n, 1))
    for name in m.features:
        p = m.params[name]
        col = d.column(name)
        if isinstance(p, GaussianParams):
            known = ~np.isnan(col)
            x = col[known]
            for c in (0, 1):
                var = p.variance[c]
                lp[known, c] += -0.5 * (LOG_2PI + math.log(var) + (x - p.mean[c]) ** 2 / var)
        else:
            index = {t: i for i, t in enumerate(p.tokens)}
            logs = np.array([[math.log(q) for q in row] for row in p.probs])
            for row, v in enumerate(col):
                i = index.get(v)
                if i is not None:
                    lp[row] += logs[:, i]
    return (lp[:, 1] > lp[:, 0]).astype(np.int64)
