import numpy as np
import pytest
from hypothesis import given, strategies as st

from flowforensics.classifiers.model import ClassifierSpec, fit
from flowforensics.flow_model import FlowKey, SchemaError
from flowforensics.forensics import (
    AttributedFlow,
    attribute_flows,
    build_report,
    emit_report,
    parse_delimited,
    summarize_hosts,
)

from helpers import CAT, NUM, REFERENCE_FLOWS, make_dataset, reference_keys

REFERENCE_DELIMITED = (
    b"srcip,sport,dstip,dsport,proto,label,rule_id\n"
    b"149.171.126.14,179,175.45.176.3,33159,tcp,0,\n"
    b"149.171.126.18,1043,175.45.176.3,53,udp,0,\n"
    b"175.45.176.3,46577,149.171.126.18,25,tcp,1,\n"
    b"149.171.126.15,1043,175.45.176.3,53,udp,0,\n"
    b"175.45.176.2,16415,149.171.126.16,445,tcp,1,\n"
)


class StubModel:
    """Returns fixed labels regardless of features."""

    def __init__(self, labels, rule_ids=None):
        self.labels = list(labels)
        self.rule_ids = rule_ids

    def predict_batch(self, d):
        assert len(d) == len(self.labels)
        return np.array(self.labels), list(self.rule_ids or [None] * len(d))


def _reference_dataset():
    rows = [(float(i), row[-1]) for i, row in enumerate(REFERENCE_FLOWS)]
    return make_dataset([("x", NUM)], rows, keys=reference_keys())


def _reference_flows():
    d = _reference_dataset()
    return attribute_flows(d, StubModel([r[-1] for r in REFERENCE_FLOWS]))


def test_reference_row_attributed():
    flows = _reference_flows()
    assert flows[2].key == FlowKey("175.45.176.3", 46577, "149.171.126.18", 25, "tcp")
    assert flows[2].predicted_label == 1
    assert [f.key for f in flows] == reference_keys()


def test_reference_delimited_bytes():
    data = emit_report(build_report(_reference_flows(), "stub"), "delimited")
    assert data == REFERENCE_DELIMITED
    assert data.splitlines()[1] == b"149.171.126.14,179,175.45.176.3,33159,tcp,0,"


def test_reference_host_summary_direct_reading():
    hosts = {h.host: h for h in summarize_hosts(_reference_flows())}
    # As a source, 175.45.176.3 originates one flow (row 3), which is an attack.
    assert (hosts["175.45.176.3"].flows_total, hosts["175.45.176.3"].flows_attack) == (1, 1)
    assert (hosts["175.45.176.2"].flows_total, hosts["175.45.176.2"].flows_attack) == (1, 1)
    # Grouped by destination it receives three flows, none predicted attack.
    dst = {h.host: h for h in summarize_hosts(_reference_flows(), by="dst")}
    assert (dst["175.45.176.3"].flows_total, dst["175.45.176.3"].flows_attack) == (3, 0)


def test_host_sort_order():
    hosts = summarize_hosts(_reference_flows())
    assert [h.host for h in hosts][:2] == ["175.45.176.2", "175.45.176.3"]
    assert [h.flows_attack for h in hosts] == sorted((h.flows_attack for h in hosts), reverse=True)


def test_all_normal_and_identical_attacks():
    key = FlowKey("10.0.0.1", 1, "10.0.0.2", 80, "tcp")
    assert all(h.flows_attack == 0 for h in summarize_hosts([AttributedFlow(key, 0)] * 3))
    (h,) = summarize_hosts([AttributedFlow(key, 1)] * 4)
    assert (h.flows_attack, h.flows_total, h.distinct_dst) == (4, 4, 1)


def test_empty_inputs():
    d = make_dataset([("x", NUM)], [], keys=[])
    assert attribute_flows(d, StubModel([])) == []
    assert emit_report(build_report([], "stub")) == b"srcip,sport,dstip,dsport,proto,label,rule_id\n"


def test_missing_key_reports_index():
    keys = reference_keys()[:2] + [None]
    d = make_dataset([("x", NUM)], [(1, 0), (2, 0), (3, 1)], keys=keys)
    with pytest.raises(SchemaError, match="record 2"):
        attribute_flows(d, StubModel([0, 0, 1]))


def test_rule_model_fills_rule_ids():
    rows = [("tcp", 0)] * 6 + [("udp", 1)] * 6 + [("icmp", 0), ("icmp", 1)]
    keys = [FlowKey(f"10.0.0.{i}", 1000 + i, "10.0.1.1", 80, "tcp") for i in range(len(rows))]
    d = make_dataset([("p", CAT)], rows, keys=keys)
    model = fit(ClassifierSpec("arm", {"min_support": 0.2}), d)
    flows = attribute_flows(d, model)
    assert all(f.matched_rule_id is not None for f in flows[:12])
    # icmp covers too few records to be frequent: no rule fires, default label applies.
    assert flows[-1].matched_rule_id is None and flows[-1].predicted_label == model.model.default_label
    for f, (key, label, rid) in zip(flows, parse_delimited(emit_report(build_report(flows, "ARM")))):
        assert (f.key, f.predicted_label, f.matched_rule_id) == (key, label, rid)


def test_time_columns_echoed():
    d = make_dataset([("stime", NUM), ("ltime", NUM)], [(1421927414, 1421927415.5, 0)], keys=reference_keys()[:1])
    data = emit_report(build_report(attribute_flows(d, StubModel([0])), "stub"))
    assert data.splitlines() == [
        b"srcip,sport,dstip,dsport,proto,label,rule_id,stime,ltime",
        b"149.171.126.14,179,175.45.176.3,33159,tcp,0,,1421927414,1421927415.5",
    ]


def test_table_format_deterministic():
    report = build_report(_reference_flows(), "stub", {"seed": 1})
    a, b = emit_report(report, "table"), emit_report(report, "table")
    assert a == b
    assert b"175.45.176.3" in a and b"Hosts" in a
    with pytest.raises(ValueError):
        emit_report(report, "xml")


ips = st.sampled_from(["10.0.0.1", "10.0.0.2", "192.168.1.9"])
flows_st = st.lists(
    st.builds(
        AttributedFlow,
        st.builds(FlowKey, ips, st.integers(0, 65535), ips, st.integers(0, 65535), st.sampled_from(["tcp", "udp"])),
        st.integers(0, 1),
        st.none(),
        st.one_of(st.none(), st.integers(0, 50)),
    ),
    max_size=30,
)


@given(flows_st)
def test_summary_totals_and_reparse(flows):
    hosts = summarize_hosts(flows)
    assert sum(h.flows_total for h in hosts) == len(flows)
    assert all(h.flows_attack <= h.flows_total for h in hosts)
    parsed = parse_delimited(emit_report(build_report(flows, "x")))
    assert parsed == [(f.key, f.predicted_label, f.matched_rule_id) for f in flows]
