"""Command-line driver: ``flowforensics {rank,evaluate,attribute,synth}``.

Every run reads a JSON config file; flags override individual fields.
Exit codes: 0 success, 1 usage or config error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .classifiers.model import CLASSIFIER_TAGS, ClassifierSpec, dump_model, fit
from .evaluate import MODES, cross_validate, format_report
from .flow_model import Dataset, SchemaError, project_features
from .forensics import attribute_flows, build_report, emit_report
from .ingest import (
    ImputePolicy,
    IngestError,
    NumericFill,
    builtin_schema,
    format_schema_descriptor,
    impute_missing,
    load_many,
    load_schema,
    stratified_subsample,
    synth_flows,
    write_flow_csv,
)
from .preprocess import format_ranking, rank_features, select_top_k

log = logging.getLogger("flowforensics")


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


@dataclass
class RunConfig:
    seed: int
    datasets: list[str] = field(default_factory=list)
    schema: str = "builtin:unsw_nb15_partition"
    impute: str = "median"
    top_k: int = 10
    classifiers: list[str] = field(default_factory=lambda: list(CLASSIFIER_TAGS))
    params: dict = field(default_factory=dict)
    folds: int = 10
    mode: str = "reproduction"
    discretization: str = "mdl"
    subsample: Optional[int] = None
    subsample_seed: Optional[int] = None
    out: Optional[str] = None
    # attribute command
    train: list[str] = field(default_factory=list)
    target: list[str] = field(default_factory=list)
    classifier: str = "arm"
    format: str = "delimited"
    group_by: str = "src"
    model_out: Optional[str] = None

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        if "seed" not in raw:
            raise ConfigError(f"{path}: 'seed' is required")
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"{path}: unknown config keys: {', '.join(sorted(unknown))}")
        base = Path(path).resolve().parent
        try:
            cfg = cls(**raw)
        except TypeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for name in ("datasets", "train", "target"):
            setattr(cfg, name, [str(base / p) for p in getattr(cfg, name)])
        if not cfg.schema.startswith("builtin:"):
            cfg.schema = str(base / cfg.schema)
        return cfg

    def validate(self) -> None:
        bad = [c for c in self.classifiers if c not in CLASSIFIER_TAGS]
        if self.classifier not in CLASSIFIER_TAGS:
            bad.append(self.classifier)
        if bad:
            raise ConfigError(f"invalid classifier {', '.join(bad)}; valid tags: {', '.join(CLASSIFIER_TAGS)}")
        if self.mode not in MODES:
            raise ConfigError(f"invalid mode {self.mode!r}; valid modes: {', '.join(MODES)}")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")
        if self.impute not in [p.value for p in NumericFill]:
            raise ConfigError(f"invalid impute policy {self.impute!r}")
        if self.format not in ("delimited", "table"):
            raise ConfigError("format must be 'delimited' or 'table'")

    def spec(self, tag: str) -> ClassifierSpec:
        params = dict(self.params.get(tag, {}))
        if tag == "arm":
            params.setdefault("discretization", self.discretization)
        try:
            return ClassifierSpec(tag, params)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def _schema(cfg: RunConfig):
    if cfg.schema.startswith("builtin:"):
        try:
            return builtin_schema(cfg.schema.split(":", 1)[1])
        except FileNotFoundError:
            raise ConfigError(f"no bundled schema named {cfg.schema!r}") from None
    try:
        return load_schema(cfg.schema)
    except FileNotFoundError:
        raise DataError(f"schema descriptor not found: {cfg.schema}") from None


def _load(cfg: RunConfig, paths: list[str], what: str) -> Dataset:
    if not paths:
        raise ConfigError(f"no {what} files configured")
    schema = _schema(cfg)
    try:
        d = load_many(paths, schema)
    except FileNotFoundError as exc:
        raise DataError(f"cannot read {exc.filename}") from None
    except (IngestError, SchemaError) as exc:
        raise DataError(str(exc)) from None
    try:
        return impute_missing(d, ImputePolicy(NumericFill(cfg.impute)))
    except IngestError as exc:
        raise DataError(str(exc)) from None


def _write(out: Optional[str], text: str) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _prepare(cfg: RunConfig, paths: list[str], what: str) -> Dataset:
    d = _load(cfg, paths, what)
    if cfg.subsample:
        seed = cfg.seed if cfg.subsample_seed is None else cfg.subsample_seed
        d = stratified_subsample(d, cfg.subsample, seed)
        log.info("stratified subsample of %d records (seed %d)", len(d), seed)
    return d


def cmd_rank(cfg: RunConfig) -> int:
    d = _prepare(cfg, cfg.datasets, "dataset")
    ranking = rank_features(d, method=cfg.discretization)
    _write(cfg.out, format_ranking(ranking))
    k = min(cfg.top_k, len(ranking))
    if cfg.out is not None:
        for i, s in enumerate(ranking.scores[:k], 1):
            print(f"{i:>3}  {s.ig:.3f}  {s.feature}")
    return 0


def cmd_evaluate(cfg: RunConfig) -> int:
    d = _prepare(cfg, cfg.datasets, "dataset")
    k_feat = min(cfg.top_k, len(d.schema.feature_names))
    features = None
    if cfg.mode == "reproduction":
        features = select_top_k(rank_features(d, method=cfg.discretization), k_feat)
        log.info("selected features: %s", ", ".join(features))
    reports = []
    for tag in (t for t in CLASSIFIER_TAGS if t in cfg.classifiers):
        log.info("cross-validating %s", tag)
        reports.append(
            cross_validate(
                d,
                cfg.spec(tag),
                k=cfg.folds,
                seed=cfg.seed,
                features=features,
                mode=cfg.mode,
                top_k=k_feat if cfg.mode == "rigorous" else None,
            )
        )
    _write(cfg.out, format_report(reports))
    return 0


def cmd_attribute(cfg: RunConfig) -> int:
    train = _load(cfg, cfg.train, "training")
    target = _load(cfg, cfg.target, "target")
    if not target.schema.has_identifiers or any(r.key is None for r in target.records):
        raise DataError("attribution needs flow identifiers (srcip, sport, dstip, dsport, proto) in the target data")
    keep = select_top_k(rank_features(train, method=cfg.discretization), min(cfg.top_k, len(train.schema.feature_names)))
    train, target = project_features(train, keep), project_features(target, keep)
    spec = cfg.spec(cfg.classifier)
    model = fit(spec, train, seed=cfg.seed)
    if cfg.model_out:
        Path(cfg.model_out).write_text(dump_model(model), encoding="utf-8")
    flows = attribute_flows(target, model)
    meta = {"classifier": spec.name, "seed": cfg.seed, "features": ",".join(keep), "target_records": len(target)}
    report = build_report(flows, spec.name, meta, by=cfg.group_by)
    data = emit_report(report, cfg.format)
    if cfg.out is None:
        sys.stdout.buffer.write(data)
    else:
        Path(cfg.out).write_bytes(data)
    return 0


def cmd_synth(args) -> int:
    d = synth_flows(args.n, args.attack_fraction, args.separation, args.seed)
    out = Path(args.out)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        write_flow_csv(d, fh)
    out.with_suffix(".schema").write_text(format_schema_descriptor(d.schema), encoding="utf-8")
    print(f"wrote {len(d)} flows to {out} and descriptor {out.with_suffix('.schema')}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowforensics", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("rank", "rank features by Information Gain"),
        ("evaluate", "cross-validate classifiers"),
        ("attribute", "attribute predictions to flow identifiers"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--classifier", action="append", help=f"one of {', '.join(CLASSIFIER_TAGS)} (repeatable)")
        p.add_argument("--top-k", type=int)
        p.add_argument("--folds", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--mode", help=" | ".join(MODES))
        p.add_argument("--out")
    p = sub.add_parser("synth", help="write a synthetic flow CSV plus schema descriptor")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--attack-fraction", type=float, default=0.5)
    p.add_argument("--separation", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    return parser


def _apply_overrides(cfg: RunConfig, args) -> None:
    if args.classifier:
        tags = [t for arg in args.classifier for t in arg.split(",") if t]
        cfg.classifiers = tags
        cfg.classifier = tags[0]
    for name in ("top_k", "folds", "seed", "mode", "out"):
        value = getattr(args, name)
        if value is not None:
            setattr(cfg, name, value)


COMMANDS = {"rank": cmd_rank, "evaluate": cmd_evaluate, "attribute": cmd_attribute}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "synth":
            return cmd_synth(args)
        cfg = RunConfig.from_file(args.config)
        _apply_overrides(cfg, args)
        cfg.validate()
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"flowforensics: {exc}", file=sys.stderr)
        return 1
    except (DataError, IngestError, SchemaError) as exc:
        print(f"flowforensics: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
