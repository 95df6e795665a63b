"""Loading flow-feature CSV files, merging partitions, imputation and synthetic data."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import IO, Iterable, Optional, Union

import numpy as np

from .flow_model import (
    Column,
    Dataset,
    FeatureKind,
    FeatureSchema,
    FlowKey,
    FlowRecord,
    Role,
    SchemaError,
)

MISSING_TOKEN = "missing"


class IngestError(ValueError):
    """Malformed input data; the message carries the line number."""


# -- schema descriptors ------------------------------------------------------

_KINDS = {"numeric": FeatureKind.NUMERIC, "categorical": FeatureKind.CATEGORICAL, "nominal": FeatureKind.CATEGORICAL}
_ROLES = {r.value: r for r in Role}
_ROLES.update({"attackcategory": Role.ATTACK_CATEGORY, "class": Role.LABEL})


def parse_schema_descriptor(text: str) -> FeatureSchema:
    """Parse a descriptor: one ``name,kind,role`` line per column.

    Extra directives are ``class_positive=<token>`` and ``header=true|false``.
    Blank lines and ``#`` comments are ignored.
    """
    columns = []
    class_positive = "1"
    header = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line and "," not in line:
            key, value = (s.strip() for s in line.split("=", 1))
            if key == "class_positive":
                class_positive = value
            elif key == "header":
                header = value.lower() in ("1", "true", "yes")
            else:
                raise SchemaError(f"descriptor line {lineno}: unknown directive {key!r}")
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise SchemaError(f"descriptor line {lineno}: expected name,kind,role")
        name, kind, role = parts
        try:
            columns.append(Column(name, _KINDS[kind.lower()], _ROLES[role.lower()]))
        except KeyError as exc:
            raise SchemaError(f"descriptor line {lineno}: unknown kind or role {exc.args[0]!r}") from None
    return FeatureSchema(tuple(columns), class_positive, header)


def format_schema_descriptor(schema: FeatureSchema) -> str:
    lines = [f"{c.name},{c.kind.value},{c.role.value}" for c in schema.columns]
    lines.append(f"class_positive={schema.class_positive}")
    lines.append(f"header={'true' if schema.header else 'false'}")
    return "\n".join(lines) + "\n"


def load_schema(path: Union[str, Path]) -> FeatureSchema:
    return parse_schema_descriptor(Path(path).read_text(encoding="utf-8"))


def builtin_schema(name: str) -> FeatureSchema:
    """Load a bundled descriptor, e.g. ``unsw_nb15_partition`` or ``unsw_nb15_full``."""
    text = resources.files("flowforensics.schemas").joinpath(f"{name}.schema").read_text(encoding="utf-8")
    return parse_schema_descriptor(text)


# -- CSV parsing ---------------------------------------------------------------


def _parse_port(text: str) -> int:
    # The full UNSW-NB15 files carry a few ports in hex ("0x000b").
    return int(text, 0) if text.lower().startswith("0x") else int(text)


def parse_flow_csv(source: Union[IO[bytes], IO[str], bytes, str], schema: FeatureSchema) -> Dataset:
    """Parse comma-separated flow rows into a Dataset.

    ``source`` may be a binary or text stream, or the raw content. Empty
    fields become missing values; a header row is skipped when the schema
    declares one.
    """
    if isinstance(source, bytes):
        source = source.decode("utf-8-sig")
    if isinstance(source, str):
        stream: IO[str] = io.StringIO(source)
    elif isinstance(source, io.TextIOBase):
        stream = source
    else:
        stream = io.TextIOWrapper(source, encoding="utf-8-sig", newline="")

    cols = schema.columns
    width = len(cols)
    feature_pos = [i for i, c in enumerate(cols) if c.role is Role.FEATURE]
    numeric = [c.kind is FeatureKind.NUMERIC for c in cols]
    label_pos = next(i for i, c in enumerate(cols) if c.role is Role.LABEL)
    cat_pos = next((i for i, c in enumerate(cols) if c.role is Role.ATTACK_CATEGORY), None)
    id_pos = {c.name: i for i, c in enumerate(cols) if c.role is Role.IDENTIFIER}
    positive = schema.class_positive

    records = []
    reader = csv.reader(stream)
    skip_header = schema.header
    for row in reader:
        lineno = reader.line_num
        if skip_header:
            skip_header = False
            continue
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != width:
            raise IngestError(f"line {lineno}: expected {width} fields, got {len(row)}")

        features = []
        for i in feature_pos:
            text = row[i].strip()
            if not text:
                features.append(None)
            elif numeric[i]:
                try:
                    value = float(text)
                except ValueError:
                    raise IngestError(f"line {lineno}, column {cols[i].name!r}: not a number: {text!r}") from None
                if not math.isfinite(value):
                    raise IngestError(f"line {lineno}, column {cols[i].name!r}: non-finite value {text!r}")
                features.append(value)
            else:
                features.append(text)

        key = None
        if id_pos:
            try:
                key = FlowKey(
                    srcip=row[id_pos["srcip"]].strip(),
                    sport=_parse_port(row[id_pos["sport"]].strip()),
                    dstip=row[id_pos["dstip"]].strip(),
                    dsport=_parse_port(row[id_pos["dsport"]].strip()),
                    proto=row[id_pos["proto"]].strip(),
                )
            except (ValueError, SchemaError) as exc:
                raise IngestError(f"line {lineno}: bad flow identifier: {exc}") from None

        label_text = row[label_pos].strip()
        label = None if not label_text else int(label_text == positive)
        attack_cat = None
        if cat_pos is not None:
            attack_cat = row[cat_pos].strip() or None
        records.append(FlowRecord(key, tuple(features), label, attack_cat))
    return Dataset(schema, tuple(records))


def load_flow_csv(path: Union[str, Path], schema: FeatureSchema) -> Dataset:
    with open(path, "rb") as fh:
        return parse_flow_csv(fh, schema)


def _format_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def write_flow_csv(d: Dataset, stream: IO[str]) -> None:
    """Serialize ``d`` in the column layout of its schema (inverse of parse_flow_csv).

    Ignored columns are written as empty fields.
    """
    schema = d.schema
    writer = csv.writer(stream, lineterminator="\n")
    if schema.header:
        writer.writerow([c.name for c in schema.columns])
    feature_idx = {c.name: j for j, c in enumerate(schema.feature_columns)}
    for r in d.records:
        row = []
        for c in schema.columns:
            if c.role is Role.FEATURE:
                v = r.features[feature_idx[c.name]]
                row.append("" if v is None else _format_number(v) if isinstance(v, float) else v)
            elif c.role is Role.IDENTIFIER:
                row.append("" if r.key is None else str(getattr(r.key, c.name)))
            elif c.role is Role.LABEL:
                row.append("" if r.label is None else schema.class_positive if r.label == 1 else "0")
            elif c.role is Role.ATTACK_CATEGORY:
                row.append(r.attack_cat or "")
            else:
                row.append("")
        writer.writerow(row)


def merge_datasets(a: Dataset, b: Dataset) -> Dataset:
    """Concatenate two datasets with identical schemas (``a`` first)."""
    if a.schema != b.schema:
        left = {(c.name, c.kind, c.role) for c in a.schema.columns}
        right = {(c.name, c.kind, c.role) for c in b.schema.columns}
        diff = sorted({t[0] for t in left ^ right})
        detail = ", ".join(diff) if diff else "column order or class_positive"
        raise SchemaError(f"schema mismatch: {detail}")
    return Dataset(a.schema, a.records + b.records)


# -- imputation ----------------------------------------------------------------


class NumericFill(str, Enum):
    MEDIAN = "median"
    ZERO = "zero"


@dataclass(frozen=True)
class ImputePolicy:
    numeric_fill: NumericFill = NumericFill.MEDIAN
    categorical_fill: str = MISSING_TOKEN


def impute_missing(d: Dataset, policy: ImputePolicy = ImputePolicy()) -> Dataset:
    fills: dict[int, object] = {}
    for j, c in enumerate(d.schema.feature_columns):
        if c.kind is FeatureKind.NUMERIC:
            col = d.column(c.name)
            missing = np.isnan(col)
            if not missing.any():
                continue
            if NumericFill(policy.numeric_fill) is NumericFill.ZERO:
                fills[j] = 0.0
            elif missing.all():
                raise IngestError(f"column {c.name!r} has no values to take a median from")
            else:
                fills[j] = float(np.median(col[~missing]))
        else:
            if any(v is None for v in d.column(c.name)):
                fills[j] = policy.categorical_fill
    if not fills:
        return d
    records = []
    for r in d.records:
        if any(r.features[j] is None for j in fills):
            feats = tuple(fills[j] if v is None and j in fills else v for j, v in enumerate(r.features))
            r = FlowRecord(r.key, feats, r.label, r.attack_cat)
        records.append(r)
    return Dataset(d.schema, tuple(records))


# -- synthetic data ------------------------------------------------------------

# (name, normal-class mean, scale); attack rows shift each mean by separation * scale.
_SYNTH_FEATURES = (
    ("sbytes", 1200.0, 300.0),
    ("dbytes", 4000.0, 900.0),
    ("dur", 1.5, 0.4),
    ("rate", 80.0, 20.0),
    ("sttl", 62.0, 4.0),
    ("smean", 95.0, 15.0),
    ("dmean", 120.0, 25.0),
)
_NORMAL_HOSTS = tuple(f"149.171.126.{i}" for i in range(10, 20))
_ATTACK_HOSTS = tuple(f"175.45.176.{i}" for i in range(0, 4))
_ATTACK_CATS = ("Exploits", "Generic", "DoS", "Reconnaissance", "Fuzzers")
_SERVICE_PORTS = (25, 53, 80, 111, 443, 445)


def synth_schema() -> FeatureSchema:
    cols = [Column(n, FeatureKind.CATEGORICAL, Role.IDENTIFIER) for n in ("srcip", "sport", "dstip", "dsport", "proto")]
    cols += [Column(n, FeatureKind.NUMERIC, Role.FEATURE) for n, _, _ in _SYNTH_FEATURES]
    cols.append(Column("attack_cat", FeatureKind.CATEGORICAL, Role.ATTACK_CATEGORY))
    cols.append(Column("label", FeatureKind.CATEGORICAL, Role.LABEL))
    return FeatureSchema(tuple(cols), "1", header=True)


def synth_flows(n: int, attack_fraction: float = 0.5, separation: float = 2.0, seed: int = 0) -> Dataset:
    """Generate ``n`` labelled flows with tunable class separability.

    Every feature is Gaussian; attack rows have their mean moved by
    ``separation`` standard deviations. Flow keys are drawn from disjoint
    normal and attacker address pools.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= attack_fraction <= 1.0:
        raise ValueError("attack_fraction must lie in [0, 1]")
    if separation < 0:
        raise ValueError("separation must be >= 0")
    rng = np.random.default_rng(seed)
    n_attack = int(round(n * attack_fraction))
    labels = np.zeros(n, dtype=np.int64)
    labels[:n_attack] = 1
    rng.shuffle(labels)

    z = rng.standard_normal((n, len(_SYNTH_FEATURES)))
    means = np.array([m for _, m, _ in _SYNTH_FEATURES])
    scales = np.array([s for _, _, s in _SYNTH_FEATURES])
    values = means + scales * (z + separation * labels[:, None])

    src_n = rng.integers(0, len(_NORMAL_HOSTS), n)
    src_a = rng.integers(0, len(_ATTACK_HOSTS), n)
    dst = rng.integers(0, len(_NORMAL_HOSTS), n)
    sports = rng.integers(1024, 65536, n)
    dports = rng.integers(0, len(_SERVICE_PORTS), n)
    udp = rng.random(n) < 0.3
    cats = rng.integers(0, len(_ATTACK_CATS), n)

    records = []
    for i in range(n):
        attack = labels[i] == 1
        key = FlowKey(
            srcip=_ATTACK_HOSTS[src_a[i]] if attack else _NORMAL_HOSTS[src_n[i]],
            sport=int(sports[i]),
            dstip=_NORMAL_HOSTS[dst[i]],
            dsport=_SERVICE_PORTS[dports[i]],
            proto="udp" if udp[i] else "tcp",
        )
        records.append(
            FlowRecord(
                key,
                tuple(float(v) for v in values[i]),
                int(labels[i]),
                _ATTACK_CATS[cats[i]] if attack else None,
            )
        )
    return Dataset(synth_schema(), tuple(records))


def stratified_subsample(d: Dataset, n: int, seed: int) -> Dataset:
    """Draw ``n`` records keeping class proportions; original order is preserved."""
    if n >= len(d):
        return d
    rng = np.random.default_rng(seed)
    labels = d.labels
    chosen = []
    n_attack = int(round(n * labels.mean()))
    for cls, take in ((0, n - n_attack), (1, n_attack)):
        idx = np.flatnonzero(labels == cls)
        chosen.append(rng.choice(idx, size=min(take, len(idx)), replace=False))
    keep = np.sort(np.concatenate(chosen))
    return d.subset(keep.tolist())


def load_many(paths: Iterable[Union[str, Path]], schema: FeatureSchema) -> Optional[Dataset]:
    """Load and merge several files in order; None if ``paths`` is empty."""
    merged = None
    for p in paths:
        d = load_flow_csv(p, schema)
        merged = d if merged is None else merge_datasets(merged, d)
    return merged
