"""Domain types shared by the whole pipeline: schemas, flow keys, records, datasets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable, Optional, Sequence, Union

import numpy as np

IDENTIFIER_NAMES = ("srcip", "sport", "dstip", "dsport", "proto")

# A feature value is a finite float, a category token, or None (missing).
FeatureValue = Union[float, str, None]
MISSING = None


class SchemaError(ValueError):
    """Raised when a schema or record violates its declared structure."""


class FeatureKind(str, Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"


class Role(str, Enum):
    IDENTIFIER = "identifier"
    FEATURE = "feature"
    ATTACK_CATEGORY = "attack_category"
    LABEL = "label"
    # Columns kept in the file layout but never loaded (e.g. a row id).
    IGNORE = "ignore"


@dataclass(frozen=True)
class Column:
    name: str
    kind: FeatureKind
    role: Role


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered column descriptors plus the label token that means "attack"."""

    columns: tuple[Column, ...]
    class_positive: str = "1"
    header: bool = False

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        names = [c.name for c in self.columns]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise SchemaError(f"duplicate column names: {', '.join(dupes)}")
        roles = [c.role for c in self.columns]
        if roles.count(Role.LABEL) != 1:
            raise SchemaError(f"expected exactly one label column, found {roles.count(Role.LABEL)}")
        if roles.count(Role.ATTACK_CATEGORY) > 1:
            raise SchemaError("at most one attack-category column is allowed")
        ids = {c.name for c in self.columns if c.role is Role.IDENTIFIER}
        if ids and ids != set(IDENTIFIER_NAMES):
            raise SchemaError(
                f"identifier columns must be exactly {', '.join(IDENTIFIER_NAMES)}; got {', '.join(sorted(ids))}"
            )

    @cached_property
    def feature_columns(self) -> tuple[Column, ...]:
        return tuple(c for c in self.columns if c.role is Role.FEATURE)

    @cached_property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.feature_columns)

    @cached_property
    def _feature_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.feature_names)}

    @property
    def has_identifiers(self) -> bool:
        return any(c.role is Role.IDENTIFIER for c in self.columns)

    def feature_index(self, name: str) -> int:
        try:
            return self._feature_index[name]
        except KeyError:
            raise SchemaError(f"unknown feature: {name!r}") from None

    def feature_kind(self, name: str) -> FeatureKind:
        return self.feature_columns[self.feature_index(name)].kind

    def numeric_features(self) -> list[str]:
        return [c.name for c in self.feature_columns if c.kind is FeatureKind.NUMERIC]

    def categorical_features(self) -> list[str]:
        return [c.name for c in self.feature_columns if c.kind is FeatureKind.CATEGORICAL]

    def replace_features(self, features: Sequence[Column]) -> "FeatureSchema":
        """Return a schema whose Feature columns are ``features``.

        Non-feature columns keep their positions; the new feature columns are
        placed where the first original feature column was.
        """
        cols: list[Column] = []
        inserted = False
        for c in self.columns:
            if c.role is Role.FEATURE:
                if not inserted:
                    cols.extend(features)
                    inserted = True
            else:
                cols.append(c)
        if not inserted:
            cols.extend(features)
        return FeatureSchema(tuple(cols), self.class_positive, self.header)


@dataclass(frozen=True)
class FlowKey:
    srcip: str
    sport: int
    dstip: str
    dsport: int
    proto: str

    def __post_init__(self):
        for port in (self.sport, self.dsport):
            if not 0 <= port <= 65535:
                raise SchemaError(f"port out of range: {port}")
        if not self.proto:
            raise SchemaError("proto must be non-empty")


@dataclass(frozen=True)
class FlowRecord:
    key: Optional[FlowKey]
    features: tuple[FeatureValue, ...]
    label: Optional[int] = None
    attack_cat: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        if self.label not in (None, 0, 1):
            raise SchemaError(f"label must be 0, 1 or None, got {self.label!r}")
        for v in self.features:
            if isinstance(v, float) and not math.isfinite(v):
                raise SchemaError(f"non-finite numeric value: {v}")


@dataclass(frozen=True)
class Dataset:
    """An immutable list of flow records conforming to one schema.

    Column arrays used by the learners are built lazily and cached:
    numeric features become float64 arrays with NaN for missing values,
    categorical features become object arrays with None for missing.
    """

    schema: FeatureSchema
    records: tuple[FlowRecord, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        width = len(self.schema.feature_columns)
        for i, r in enumerate(self.records):
            if len(r.features) != width:
                raise SchemaError(f"record {i} has {len(r.features)} features, schema has {width}")

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return self._columns[self.schema.feature_index(name)]

    @cached_property
    def _columns(self) -> list[np.ndarray]:
        cols = []
        for j, c in enumerate(self.schema.feature_columns):
            raw = [r.features[j] for r in self.records]
            if c.kind is FeatureKind.NUMERIC:
                cols.append(np.array([np.nan if v is None else v for v in raw], dtype=np.float64))
            else:
                arr = np.empty(len(raw), dtype=object)
                arr[:] = raw
                cols.append(arr)
        return cols

    @cached_property
    def labels(self) -> np.ndarray:
        """Labels as an int array; raises if any record is unlabeled."""
        out = np.empty(len(self.records), dtype=np.int64)
        for i, r in enumerate(self.records):
            if r.label is None:
                raise SchemaError(f"record {i} has no label")
            out[i] = r.label
        return out

    def subset(self, indices: Iterable[int]) -> "Dataset":
        recs = self.records
        return Dataset(self.schema, tuple(recs[i] for i in indices))

    def with_records(self, records: Iterable[FlowRecord]) -> "Dataset":
        return Dataset(self.schema, tuple(records))


def class_counts(d: Dataset) -> tuple[int, int]:
    """Return ``(n_normal, n_attack)``."""
    labels = d.labels
    n_attack = int(labels.sum())
    return len(labels) - n_attack, n_attack


def project_features(d: Dataset, keep: Sequence[str]) -> Dataset:
    """Keep only the named feature columns, in the order given."""
    idx = [d.schema.feature_index(name) for name in keep]
    cols = [d.schema.feature_columns[i] for i in idx]
    schema = d.schema.replace_features(cols)
    records = tuple(
        FlowRecord(r.key, tuple(r.features[i] for i in idx), r.label, r.attack_cat) for r in d.records
    )
    return Dataset(schema, records)
