import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowforensics.flow_model import class_counts
from flowforensics.ingest import (
    builtin_schema,
    ImputePolicy,
    IngestError,
    NumericFill,
    format_schema_descriptor,
    impute_missing,
    load_many,
    merge_datasets,
    parse_flow_csv,
    parse_schema_descriptor,
    stratified_subsample,
    synth_flows,
    write_flow_csv,
)

from helpers import CAT, NUM, make_dataset

SIMPLE = """\
sbytes,numeric,feature
label,categorical,label
class_positive=1
"""


def test_parse_two_rows():
    schema = parse_schema_descriptor(SIMPLE)
    d = parse_flow_csv(io.BytesIO(b"100,0\n900,1\n"), schema)
    assert len(d) == 2
    assert class_counts(d) == (1, 1)
    assert d.column("sbytes").tolist() == [100.0, 900.0]


def test_empty_numeric_field_is_missing():
    schema = parse_schema_descriptor("a,numeric,feature\nb,numeric,feature\nlabel,categorical,label\n")
    d = parse_flow_csv(b"1,,0\n", schema)
    assert d.records[0].features == (1.0, None)


def test_wrong_arity_reports_line():
    schema = parse_schema_descriptor(SIMPLE)
    with pytest.raises(IngestError, match="line 2"):
        parse_flow_csv(b"100,0\n1,2,3\n", schema)


def test_bad_number_reports_line_and_column():
    schema = parse_schema_descriptor(SIMPLE)
    with pytest.raises(IngestError, match=r"line 3, column 'sbytes'"):
        parse_flow_csv(b"100,0\n1,1\nabc,1\n", schema)


def test_header_row_skipped_and_identifiers_parsed():
    text = """\
header=true
srcip,categorical,identifier
sport,categorical,identifier
dstip,categorical,identifier
dsport,categorical,identifier
proto,categorical,identifier
sbytes,numeric,feature
attack_cat,categorical,attack_category
Label,categorical,label
"""
    schema = parse_schema_descriptor(text)
    data = b"srcip,sport,dstip,dsport,proto,sbytes,attack_cat,Label\n175.45.176.3,46577,149.171.126.18,25,tcp,300,Exploits,1\n1.1.1.1,0x000b,2.2.2.2,80,udp,5,,0\n"
    d = parse_flow_csv(data, schema)
    assert len(d) == 2
    assert d.records[0].key.srcip == "175.45.176.3"
    assert d.records[0].attack_cat == "Exploits"
    assert d.records[1].key.sport == 11
    assert d.records[1].attack_cat is None


def test_descriptor_round_trip():
    schema = synth_flows(5).schema
    assert parse_schema_descriptor(format_schema_descriptor(schema)) == schema


def test_ignored_column_not_loaded():
    schema = parse_schema_descriptor("header=true\nid,numeric,ignore\nx,numeric,feature\nlabel,categorical,label\n")
    d = parse_flow_csv(b"id,x,label\n7,1.5,1\n", schema)
    assert d.records[0].features == (1.5,)


def _roundtrip(d):
    buf = io.StringIO()
    write_flow_csv(d, buf)
    return parse_flow_csv(buf.getvalue(), d.schema)


def test_serialize_round_trip_synthetic():
    d = synth_flows(100, 0.4, 2.0, seed=5)
    assert _roundtrip(d) == d


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)
token = st.text(alphabet=st.characters(blacklist_categories=("Cs", "Cc", "Zs", "Zl", "Zp")), min_size=1, max_size=6)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.one_of(st.none(), finite), st.one_of(st.none(), token), st.sampled_from([0, 1])), max_size=20))
def test_serialize_round_trip_property(rows):
    d = make_dataset([("x", NUM), ("t", CAT)], rows)
    assert _roundtrip(d) == d


def test_merge():
    a = make_dataset([("x", NUM)], [(1, 0), (2, 1), (3, 0)])
    b = make_dataset([("x", NUM)], [(4, 1), (5, 1)])
    empty = make_dataset([("x", NUM)], [])
    m = merge_datasets(a, b)
    assert len(m) == 5
    assert m.records == a.records + b.records
    assert merge_datasets(a, empty) == a


def test_merge_associative():
    parts = [make_dataset([("x", NUM)], [(i, i % 2)]) for i in range(3)]
    left = merge_datasets(merge_datasets(parts[0], parts[1]), parts[2])
    right = merge_datasets(parts[0], merge_datasets(parts[1], parts[2]))
    assert left == right


def test_merge_schema_mismatch_lists_columns():
    a = make_dataset([("x", NUM)], [(1, 0)])
    b = make_dataset([("y", NUM)], [(1, 0)])
    with pytest.raises(ValueError, match="x, y"):
        merge_datasets(a, b)


def test_impute_median_and_token():
    d = make_dataset([("x", NUM), ("p", CAT)], [(1, "tcp", 0), (None, None, 1), (3, "udp", 0)])
    out = impute_missing(d)
    assert out.column("x").tolist() == [1.0, 2.0, 3.0]
    assert out.column("p").tolist() == ["tcp", "missing", "udp"]


def test_impute_zero_policy():
    d = make_dataset([("x", NUM)], [(5, 0), (None, 1)])
    assert impute_missing(d, ImputePolicy(NumericFill.ZERO)).column("x").tolist() == [5.0, 0.0]


def test_impute_no_missing_is_identity_and_idempotent():
    d = synth_flows(30, 0.5, 1.0, seed=2)
    assert impute_missing(d) is d
    m = make_dataset([("x", NUM)], [(1, 0), (None, 1), (4, 0)])
    once = impute_missing(m)
    assert impute_missing(once) == once


def test_impute_all_missing_median_errors():
    d = make_dataset([("x", NUM)], [(None, 0), (None, 1)])
    with pytest.raises(IngestError, match="'x'"):
        impute_missing(d)


def test_synth_deterministic():
    assert synth_flows(100, 0.5, 2.0, seed=7) == synth_flows(100, 0.5, 2.0, seed=7)
    assert synth_flows(100, 0.5, 2.0, seed=7) != synth_flows(100, 0.5, 2.0, seed=8)


def test_synth_shape():
    d = synth_flows(200, 0.25, 3.0, seed=1)
    assert len(d) == 200
    assert class_counts(d) == (150, 50)
    assert len(d.schema.numeric_features()) >= 6
    assert all(r.key is not None for r in d.records)
    assert all((r.attack_cat is not None) == (r.label == 1) for r in d.records)


def test_synth_separation_zero_identical_distributions():
    # Pooled over 20 seeds, class-conditional feature means agree to sampling noise.
    gaps = []
    for seed in range(20):
        d = synth_flows(400, 0.5, 0.0, seed=seed)
        y = d.labels
        z = (d.column("sbytes") - 1200.0) / 300.0
        gaps.append(z[y == 1].mean() - z[y == 0].mean())
    assert abs(np.mean(gaps)) < 0.05
    d = synth_flows(400, 0.5, 4.0, seed=0)
    z = (d.column("sbytes") - 1200.0) / 300.0
    assert z[d.labels == 1].mean() - z[d.labels == 0].mean() == pytest.approx(4.0, abs=0.3)


def test_synth_rejects_bad_n():
    with pytest.raises(ValueError):
        synth_flows(0)


def test_stratified_subsample_keeps_ratio():
    d = synth_flows(1000, 0.3, 1.0, seed=1)
    s = stratified_subsample(d, 100, seed=4)
    assert len(s) == 100
    assert class_counts(s) == (70, 30)
    assert stratified_subsample(d, 100, seed=4) == s


def _partition_csv(rng, n, start_id):
    """Rows in the layout of the public training/testing partitions."""
    schema = builtin_schema("unsw_nb15_partition")
    names = [c.name for c in schema.columns]
    lines = [",".join(names)]
    for i in range(n):
        label = int(rng.random() < 0.6)
        row = []
        for c in schema.columns:
            if c.name == "id":
                row.append(str(start_id + i))
            elif c.name == "label":
                row.append(str(label))
            elif c.name == "attack_cat":
                row.append("Exploits" if label else "Normal")
            elif c.name in ("proto", "service", "state"):
                row.append(str(rng.choice(["tcp", "udp"] if c.name == "proto" else ["-", "http", "dns"])))
            elif c.name == "sbytes":
                row.append(str(int(rng.normal(5000 if label else 500, 100))))
            else:
                row.append(f"{rng.random():.6f}")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def test_partition_layout_end_to_end(tmp_path):
    from flowforensics.classifiers.model import ClassifierSpec
    from flowforensics.evaluate import cross_validate
    from flowforensics.preprocess import rank_features, select_top_k

    rng = np.random.default_rng(0)
    paths = []
    for name, n, start in (("train.csv", 150, 1), ("test.csv", 100, 1)):
        (tmp_path / name).write_text(_partition_csv(rng, n, start))
        paths.append(tmp_path / name)
    schema = builtin_schema("unsw_nb15_partition")
    merged = load_many(paths, schema)
    assert len(merged) == 250
    assert len(merged.schema.feature_names) == 42
    top = select_top_k(rank_features(merged), 10)
    assert top[0] == "sbytes"
    d = stratified_subsample(merged, 200, seed=0)
    assert len(d) == 200
    rep = cross_validate(d, ClassifierSpec("dt"), k=10, seed=0, features=top)
    assert rep.pooled.total == 200 and rep.metrics.accuracy > 0.9
