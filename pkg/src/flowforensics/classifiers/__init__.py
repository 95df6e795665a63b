from .bayes import NaiveBayesModel, predict_nb, train_nb
from .mlp import MlpModel, mlp_loss, mlp_loss_gradient, predict_mlp, train_mlp
from .model import (
    CLASSIFIER_TAGS,
    ClassifierSpec,
    ConstantModel,
    TrainedModel,
    dump_model,
    fit,
    load_model,
)
from .rules import ClassRule, RuleListModel, mine_class_rules, predict_rules
from .tree import CategoricalSplit, DecisionTreeModel, Leaf, NumericSplit, predict_tree, train_c45

__all__ = [
    "CLASSIFIER_TAGS",
    "CategoricalSplit",
    "ClassRule",
    "ClassifierSpec",
    "ConstantModel",
    "DecisionTreeModel",
    "Leaf",
    "MlpModel",
    "NaiveBayesModel",
    "NumericSplit",
    "RuleListModel",
    "TrainedModel",
    "dump_model",
    "fit",
    "load_model",
    "mine_class_rules",
    "mlp_loss",
    "mlp_loss_gradient",
    "predict_mlp",
    "predict_nb",
    "predict_rules",
    "predict_tree",
    "train_c45",
    "train_mlp",
    "train_nb",
]
