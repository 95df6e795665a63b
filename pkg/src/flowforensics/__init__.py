"""Flow-based botnet forensics: Information Gain feature selection, four
classifiers evaluated by stratified cross-validation, and attribution of
predictions back to flow identifiers."""

from .flow_model import (
    Column,
    Dataset,
    FeatureKind,
    FeatureSchema,
    FlowKey,
    FlowRecord,
    Role,
    SchemaError,
    class_counts,
    project_features,
)

__version__ = "0.1.0"

__all__ = [
    "Column",
    "Dataset",
    "FeatureKind",
    "FeatureSchema",
    "FlowKey",
    "FlowRecord",
    "Role",
    "SchemaError",
    "class_counts",
    "project_features",
]
