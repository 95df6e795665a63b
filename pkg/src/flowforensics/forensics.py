"""Attribution of predictions to flow identifiers, per-host summaries and report output."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .flow_model import Dataset, FlowKey, SchemaError

DELIMITED_HEADER = ("srcip", "sport", "dstip", "dsport", "proto", "label", "rule_id")
TIME_COLUMNS = ("stime", "ltime")


@dataclass(frozen=True)
class AttributedFlow:
    key: FlowKey
    predicted_label: int
    actual_label: Optional[int] = None
    matched_rule_id: Optional[int] = None
    attack_cat: Optional[str] = None
    times: Optional[tuple[Optional[float], Optional[float]]] = None


@dataclass(frozen=True)
class HostSummary:
    host: str
    flows_total: int
    flows_attack: int
    distinct_dst: int
    distinct_dsport: int
    protocols: frozenset
    rule_ids: frozenset


@dataclass(frozen=True)
class ForensicReport:
    attributed: tuple[AttributedFlow, ...]
    hosts: tuple[HostSummary, ...]
    model_tag: str
    metadata: Mapping[str, object] = field(default_factory=dict)
    group_by: str = "src"


def attribute_flows(d: Dataset, model) -> list[AttributedFlow]:
    """Join each record's flow key with the model's prediction.

    ``model`` is anything with ``predict_batch(dataset) -> (labels, rule_ids)``,
    normally a :class:`~flowforensics.classifiers.TrainedModel`.
    """
    for i, r in enumerate(d.records):
        if r.key is None:
            raise SchemaError(f"record {i} has no flow identifiers; attribution needs srcip/sport/dstip/dsport/proto")
    if len(d) == 0:
        return []
    labels, rule_ids = model.predict_batch(d)
    names = d.schema.feature_names
    time_idx = None
    if all(t in names for t in TIME_COLUMNS):
        time_idx = tuple(names.index(t) for t in TIME_COLUMNS)
    out = []
    for r, label, rule_id in zip(d.records, labels, rule_ids):
        times = None
        if time_idx is not None:
            times = tuple(r.features[j] for j in time_idx)
        out.append(AttributedFlow(r.key, int(label), r.label, rule_id, r.attack_cat, times))
    return out


def summarize_hosts(flows: Sequence[AttributedFlow], by: str = "src") -> list[HostSummary]:
    """Group flows by source (default) or destination address.

    For destination grouping ``distinct_dst`` counts distinct sources.
    """
    if by not in ("src", "dst"):
        raise ValueError("by must be 'src' or 'dst'")
    groups: dict[str, list[AttributedFlow]] = defaultdict(list)
    for f in flows:
        groups[f.key.srcip if by == "src" else f.key.dstip].append(f)
    out = []
    for host, fs in groups.items():
        peers = {f.key.dstip if by == "src" else f.key.srcip for f in fs}
        out.append(
            HostSummary(
                host=host,
                flows_total=len(fs),
                flows_attack=sum(f.predicted_label for f in fs),
                distinct_dst=len(peers),
                distinct_dsport=len({f.key.dsport for f in fs}),
                protocols=frozenset(f.key.proto for f in fs),
                rule_ids=frozenset(f.matched_rule_id for f in fs if f.matched_rule_id is not None),
            )
        )
    out.sort(key=lambda h: (-h.flows_attack, h.host))
    return out


def build_report(
    flows: Sequence[AttributedFlow], model_tag: str, metadata: Optional[Mapping[str, object]] = None, by: str = "src"
) -> ForensicReport:
    return ForensicReport(tuple(flows), tuple(summarize_hosts(flows, by)), model_tag, dict(metadata or {}), by)


def _fmt_time(v) -> str:
    if v is None:
        return ""
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def _flow_fields(f: AttributedFlow) -> list[str]:
    k = f.key
    row = [k.srcip, str(k.sport), k.dstip, str(k.dsport), k.proto, str(f.predicted_label)]
    row.append("" if f.matched_rule_id is None else str(f.matched_rule_id))
    return row


def _emit_delimited(r: ForensicReport) -> str:
    with_times = any(f.times is not None for f in r.attributed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DELIMITED_HEADER + (TIME_COLUMNS if with_times else ()))
    for f in r.attributed:
        row = _flow_fields(f)
        if with_times:
            row += [_fmt_time(t) for t in (f.times or (None, None))]
        w.writerow(row)
    return buf.getvalue()


def _align(rows: list[list[str]]) -> list[str]:
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    return ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]


def _emit_table(r: ForensicReport) -> str:
    lines = [f"Forensic report - model {r.model_tag}"]
    for k in sorted(r.metadata):
        lines.append(f"  {k}: {r.metadata[k]}")
    lines.append("")
    rows = [list(DELIMITED_HEADER) + ["actual", "attack_cat"]]
    for f in r.attributed:
        rows.append(_flow_fields(f) + ["" if f.actual_label is None else str(f.actual_label), f.attack_cat or ""])
    lines += _align(rows)
    lines.append("")
    peer = "distinct_dst" if r.group_by == "src" else "distinct_src"
    lines.append(f"Hosts ({'source' if r.group_by == 'src' else 'destination'} address), most attack flows first")
    rows = [["host", "flows", "attack", peer, "distinct_dsport", "protocols", "rule_ids"]]
    for h in r.hosts:
        rows.append(
            [
                h.host,
                str(h.flows_total),
                str(h.flows_attack),
                str(h.distinct_dst),
                str(h.distinct_dsport),
                "|".join(sorted(h.protocols)),
                "|".join(str(i) for i in sorted(h.rule_ids)),
            ]
        )
    lines += _align(rows)
    return "\n".join(lines) + "\n"


def emit_report(r: ForensicReport, format: str = "delimited") -> bytes:
    if format == "delimited":
        return _emit_delimited(r).encode("utf-8")
    if format == "table":
        return _emit_table(r).encode("utf-8")
    raise ValueError("format must be 'delimited' or 'table'")


def parse_delimited(data: bytes) -> list[tuple[FlowKey, int, Optional[int]]]:
    """Read back ``(key, label, rule_id)`` triples from a delimited report."""
    rows = list(csv.reader(io.StringIO(data.decode("utf-8"))))
    if not rows or tuple(rows[0][: len(DELIMITED_HEADER)]) != DELIMITED_HEADER:
        raise ValueError("not a delimited forensic report")
    out = []
    for row in rows[1:]:
        key = FlowKey(row[0], int(row[1]), row[2], int(row[3]), row[4])
        out.append((key, int(row[5]), int(row[6]) if row[6] else None))
    return out
