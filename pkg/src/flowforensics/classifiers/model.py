"""Classifier specs, the fitted-model wrapper, and JSON model documents."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional, Union

import numpy as np

from ..flow_model import Dataset, SchemaError
from ..preprocess import CutPoints, DiscretizationMap, OneHotEncoder, apply_discretization, fit_discretization
from .bayes import CategoricalParams, GaussianParams, NaiveBayesModel, predict_nb_dataset, train_nb
from .mlp import MlpModel, predict_mlp_dataset, train_mlp
from .rules import ClassRule, RuleListModel, mine_class_rules, predict_rules_dataset
from .tree import CategoricalSplit, DecisionTreeModel, Leaf, NumericSplit, TreeNode, predict_tree_dataset, train_c45

# Fixed report order: rules, tree, Bayes, network.
CLASSIFIER_TAGS = ("arm", "dt", "nb", "ann")
DISPLAY_NAMES = {"arm": "ARM", "dt": "DT", "nb": "NB", "ann": "ANN", "const": "CONST"}

DEFAULT_PARAMS: dict[str, dict[str, Any]] = {
    "arm": {"min_support": 0.01, "min_confidence": 0.8, "max_antecedent": 3, "discretization": "mdl"},
    "dt": {"min_leaf": 2, "confidence_factor": 0.25},
    "nb": {"variance_floor": 1e-9, "laplace_alpha": 1.0},
    "ann": {"n_hidden": None, "learning_rate": 0.3, "momentum": 0.2, "epochs": 500, "seed": None},
    # Baseline that always predicts one label; not exposed on the command line.
    "const": {"label": 0},
}


@dataclass(frozen=True)
class ClassifierSpec:
    tag: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tag not in DEFAULT_PARAMS:
            raise ValueError(f"unknown classifier {self.tag!r}; valid tags: {', '.join(CLASSIFIER_TAGS)}")
        unknown = set(self.params) - set(DEFAULT_PARAMS[self.tag])
        if unknown:
            raise ValueError(f"unknown parameters for {self.tag}: {', '.join(sorted(unknown))}")
        object.__setattr__(self, "params", {**DEFAULT_PARAMS[self.tag], **self.params})

    @property
    def name(self) -> str:
        return DISPLAY_NAMES[self.tag]


@dataclass(frozen=True)
class ConstantModel:
    features: tuple[str, ...]
    label: int = 0


Inner = Union[DecisionTreeModel, NaiveBayesModel, MlpModel, RuleListModel, ConstantModel]


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """A fitted classifier plus the preprocessing it was trained behind."""

    tag: str
    model: Inner
    features: tuple[str, ...]
    discretization: Optional[DiscretizationMap] = None
    encoder: Optional[OneHotEncoder] = None

    def _prepare(self, d: Dataset) -> Dataset:
        if tuple(d.schema.feature_names) != self.features:
            raise SchemaError(
                f"dataset features ({', '.join(d.schema.feature_names)}) do not match the model's "
                f"({', '.join(self.features)})"
            )
        if self.discretization is not None:
            d = apply_discretization(d, self.discretization)
        if self.encoder is not None:
            d = self.encoder.transform(d)
        return d

    def predict_batch(self, d: Dataset) -> tuple[np.ndarray, list[Optional[int]]]:
        """Predicted labels and, for rule lists, the id of the rule that fired."""
        d = self._prepare(d)
        m = self.model
        if isinstance(m, RuleListModel):
            return predict_rules_dataset(m, d)
        if isinstance(m, DecisionTreeModel):
            labels = predict_tree_dataset(m, d)
        elif isinstance(m, NaiveBayesModel):
            labels = predict_nb_dataset(m, d)
        elif isinstance(m, MlpModel):
            labels = predict_mlp_dataset(m, d)
        else:
            labels = np.full(len(d), m.label, dtype=np.int64)
        return labels, [None] * len(d)


def fit(spec: ClassifierSpec, d: Dataset, seed: int = 0) -> TrainedModel:
    p = spec.params
    features = tuple(d.schema.feature_names)
    if spec.tag == "dt":
        return TrainedModel("dt", train_c45(d, p["min_leaf"], p["confidence_factor"]), features)
    if spec.tag == "nb":
        return TrainedModel("nb", train_nb(d, p["variance_floor"], p["laplace_alpha"]), features)
    if spec.tag == "ann":
        encoder = OneHotEncoder.fit(d) if d.schema.categorical_features() else None
        dd = encoder.transform(d) if encoder else d
        model_seed = seed if p["seed"] is None else p["seed"]
        m = train_mlp(dd, p["n_hidden"], p["learning_rate"], p["momentum"], p["epochs"], model_seed)
        return TrainedModel("ann", m, features, encoder=encoder)
    if spec.tag == "arm":
        dmap = fit_discretization(d, method=p["discretization"])
        dd = apply_discretization(d, dmap)
        m = mine_class_rules(dd, p["min_support"], p["min_confidence"], p["max_antecedent"])
        return TrainedModel("arm", m, features, discretization=dmap)
    return TrainedModel("const", ConstantModel(features, int(p["label"])), features)


# -- serialization ---------------------------------------------------------------


def _tree_to_dict(node: TreeNode) -> dict:
    if isinstance(node, Leaf):
        return {"leaf": node.label, "counts": list(node.class_counts)}
    if isinstance(node, NumericSplit):
        return {
            "feature": node.feature,
            "threshold": node.threshold,
            "below": _tree_to_dict(node.below),
            "at_or_above": _tree_to_dict(node.at_or_above),
            "missing_to_above": node.missing_to_above,
            "counts": list(node.class_counts),
        }
    return {
        "feature": node.feature,
        "branches": {t: _tree_to_dict(b) for t, b in node.branches.items()},
        "fallback": _tree_to_dict(node.fallback),
        "counts": list(node.class_counts),
    }


def _tree_from_dict(obj: dict) -> TreeNode:
    counts = tuple(obj["counts"])
    if "leaf" in obj:
        return Leaf(obj["leaf"], counts)
    if "threshold" in obj:
        return NumericSplit(
            obj["feature"],
            obj["threshold"],
            _tree_from_dict(obj["below"]),
            _tree_from_dict(obj["at_or_above"]),
            counts,
            obj["missing_to_above"],
        )
    return CategoricalSplit(
        obj["feature"],
        {t: _tree_from_dict(b) for t, b in obj["branches"].items()},
        _tree_from_dict(obj["fallback"]),
        counts,
    )


def _inner_to_dict(m: Inner) -> dict:
    if isinstance(m, DecisionTreeModel):
        return {
            "params": {"min_leaf": m.min_leaf, "confidence_factor": m.confidence_factor},
            "root": _tree_to_dict(m.root),
        }
    if isinstance(m, NaiveBayesModel):
        params = {}
        for name, p in m.params.items():
            if isinstance(p, GaussianParams):
                params[name] = {"mean": list(p.mean), "variance": list(p.variance), "floor": p.floor}
            else:
                params[name] = {"tokens": list(p.tokens), "probs": [list(p.probs[0]), list(p.probs[1])]}
        return {
            "params": {"variance_floor": m.variance_floor, "laplace_alpha": m.laplace_alpha},
            "priors": list(m.priors),
            "likelihoods": params,
        }
    if isinstance(m, MlpModel):
        return {
            "params": {"learning_rate": m.learning_rate, "momentum": m.momentum, "epochs": m.epochs, "seed": m.seed},
            "layer_sizes": list(m.layer_sizes),
            "w1": m.w1.tolist(),
            "b1": m.b1.tolist(),
            "w2": m.w2.tolist(),
            "b2": m.b2.tolist(),
            "input_mean": m.input_mean.tolist(),
            "input_scale": m.input_scale.tolist(),
        }
    if isinstance(m, RuleListModel):
        return {
            "params": {
                "min_support": m.min_support,
                "min_confidence": m.min_confidence,
                "max_antecedent": m.max_antecedent,
            },
            "default_label": m.default_label,
            "rules": [
                {
                    "id": r.id,
                    "antecedent": [list(i) for i in r.antecedent],
                    "consequent": r.consequent,
                    "support": r.support,
                    "confidence": r.confidence,
                    "rule_count": r.rule_count,
                    "antecedent_count": r.antecedent_count,
                }
                for r in m.rules
            ],
        }
    return {"label": m.label}


def _inner_from_dict(tag: str, features: tuple[str, ...], obj: dict, inner_features) -> Inner:
    if tag == "dt":
        p = obj["params"]
        return DecisionTreeModel(_tree_from_dict(obj["root"]), features, p["min_leaf"], p["confidence_factor"])
    if tag == "nb":
        params = {}
        for name, q in obj["likelihoods"].items():
            if "mean" in q:
                params[name] = GaussianParams(tuple(q["mean"]), tuple(q["variance"]), q["floor"])
            else:
                params[name] = CategoricalParams(tuple(q["tokens"]), (tuple(q["probs"][0]), tuple(q["probs"][1])))
        p = obj["params"]
        return NaiveBayesModel(features, tuple(obj["priors"]), params, p["variance_floor"], p["laplace_alpha"])
    if tag == "ann":
        p = obj["params"]
        arr = {k: np.array(obj[k], dtype=np.float64) for k in ("w1", "b1", "w2", "b2", "input_mean", "input_scale")}
        n_in, n_h, n_out = obj["layer_sizes"]
        arr["w1"] = arr["w1"].reshape(n_in, n_h)
        arr["w2"] = arr["w2"].reshape(n_h, n_out)
        return MlpModel(inner_features, **arr, **p)
    if tag == "arm":
        p = obj["params"]
        rules = tuple(
            ClassRule(
                tuple((f, t) for f, t in r["antecedent"]),
                r["consequent"],
                r["support"],
                r["confidence"],
                r["id"],
                r["rule_count"],
                r["antecedent_count"],
            )
            for r in obj["rules"]
        )
        return RuleListModel(features, rules, obj["default_label"], p["min_support"], p["min_confidence"], p["max_antecedent"])
    return ConstantModel(features, obj["label"])


def dump_model(tm: TrainedModel) -> str:
    """Serialize to a self-describing JSON document."""
    doc: dict[str, Any] = {
        "type": tm.tag,
        "features": list(tm.features),
        "model": _inner_to_dict(tm.model),
    }
    if tm.discretization is not None:
        doc["discretization"] = {k: list(c.thresholds) for k, c in tm.discretization.cuts.items()}
    if tm.encoder is not None:
        doc["one_hot"] = {k: list(v) for k, v in tm.encoder.vocab.items()}
    if isinstance(tm.model, MlpModel):
        doc["model"]["inputs"] = list(tm.model.features)
    return json.dumps(doc, indent=1, sort_keys=True)


def load_model(text: str) -> TrainedModel:
    doc = json.loads(text)
    tag = doc["type"]
    if tag not in DEFAULT_PARAMS:
        raise ValueError(f"unknown model type {tag!r}")
    features = tuple(doc["features"])
    dmap = None
    if "discretization" in doc:
        dmap = DiscretizationMap({k: CutPoints(k, tuple(v)) for k, v in doc["discretization"].items()})
    encoder = None
    if "one_hot" in doc:
        encoder = OneHotEncoder({k: tuple(v) for k, v in doc["one_hot"].items()})
    inner = _inner_from_dict(tag, features, doc["model"], tuple(doc["model"].get("inputs", features)))
    return TrainedModel(tag, inner, features, dmap, encoder)
