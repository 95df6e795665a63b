"""Small builders for hand-made datasets."""

from flowforensics.flow_model import Column, Dataset, FeatureKind, FeatureSchema, FlowKey, FlowRecord, Role

NUM = FeatureKind.NUMERIC
CAT = FeatureKind.CATEGORICAL


def make_dataset(features, rows, keys=None, attack_cats=None, with_ids=False):
    """``features`` is a list of (name, kind); each row is (*values, label)."""
    cols = []
    if with_ids or keys is not None:
        cols += [Column(n, CAT, Role.IDENTIFIER) for n in ("srcip", "sport", "dstip", "dsport", "proto")]
    cols += [Column(n, k, Role.FEATURE) for n, k in features]
    cols.append(Column("attack_cat", CAT, Role.ATTACK_CATEGORY))
    cols.append(Column("label", CAT, Role.LABEL))
    schema = FeatureSchema(tuple(cols), "1", header=True)
    records = []
    for i, row in enumerate(rows):
        *values, label = row
        values = tuple(float(v) if isinstance(v, (int, float)) and not isinstance(v, bool) else v for v in values)
        key = keys[i] if keys is not None else None
        cat = attack_cats[i] if attack_cats is not None else None
        records.append(FlowRecord(key, values, label, cat))
    return Dataset(schema, tuple(records))


REFERENCE_FLOWS = [
    ("149.171.126.14", 179, "175.45.176.3", 33159, "tcp", 0),
    ("149.171.126.18", 1043, "175.45.176.3", 53, "udp", 0),
    ("175.45.176.3", 46577, "149.171.126.18", 25, "tcp", 1),
    ("149.171.126.15", 1043, "175.45.176.3", 53, "udp", 0),
    ("175.45.176.2", 16415, "149.171.126.16", 445, "tcp", 1),
]


def reference_keys():
    return [FlowKey(s, sp, d, dp, p) for s, sp, d, dp, p, _ in REFERENCE_FLOWS]
