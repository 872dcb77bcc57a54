"""Command-line interface.

Options resolve in three layers: built-in defaults, then a flat JSON config
file (``--config`` or the ``TAXOLINK_CONFIG`` environment variable), then
flags. The resolved configuration is echoed to stderr as one JSON line.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .corpus import (
    SampleConfig,
    annotated_to_dict,
    document_to_dict,
    dataset_stats,
    load_annotations,
    seen_unseen_partition,
    stratified_sample,
)
from .embeddings import load_vectors
from .errors import ConfigError, InputError, InvalidTaxonomy, TaxolinkError
from .evaluation import evaluate_all, format_tables, gold_table, reports_to_json
from .linkers import DetectorConfig, EntityLinker, Strategy, dump_predictions, load_predictions
from .matcher import build_label_index
from .significance import compute_significance, export_map_data, load_objects, objects_from_predictions
from .taxonomy import filter_facets, load_taxonomy, validate

CONFIG_ENV = "TAXOLINK_CONFIG"

DEFAULTS = {
    "kb": None,
    "facets": None,
    "fuzzy_threshold": 0.85,
    "k": 10,
    "strategy": "string-sim",
    "detector": "exact",
    "mentions": "detect",
    "train": None,
    "vectors": None,
    "context_vectors": None,
    "seed": 42,
    "input": None,
    "pred": None,
    "gold": None,
    "out": None,
    "format": None,
    "n": None,
    "present": 2000,
    "top_k": 10,
    "jobs": 1,
}

COMMAND_KEYS = {
    "kb-validate": ("kb", "facets", "out"),
    "sample": ("input", "n", "seed", "present", "out"),
    "detect": ("kb", "facets", "input", "detector", "fuzzy_threshold", "out"),
    "link": (
        "kb", "facets", "input", "strategy", "detector", "fuzzy_threshold", "k", "seed",
        "train", "vectors", "context_vectors", "mentions", "jobs", "out",
    ),
    "eval": ("pred", "gold", "train", "format", "out"),
    "stats": ("input", "kb", "facets", "top_k", "format", "out"),
    "significance": ("input", "format", "out"),
}


def _add_options(p, keys):
    S = argparse.SUPPRESS
    opts = {
        "kb": lambda: p.add_argument("--kb", default=S, help="taxonomy JSONL"),
        "facets": lambda: p.add_argument("--facets", default=S, help="comma-separated facets to keep"),
        "fuzzy_threshold": lambda: p.add_argument("--fuzzy-threshold", type=float, default=S),
        "k": lambda: p.add_argument("--k", type=int, default=S, help="candidate / KNN depth"),
        "strategy": lambda: p.add_argument(
            "--strategy", choices=["string-sim", "memorization", "embedding", "knn"], default=S
        ),
        "detector": lambda: p.add_argument("--detector", choices=["exact", "fuzzy"], default=S),
        "mentions": lambda: p.add_argument(
            "--mentions", choices=["detect", "input"], default=S,
            help="detect spans, or link the spans already present in --input",
        ),
        "train": lambda: p.add_argument("--train", default=S, help="training annotations JSONL"),
        "vectors": lambda: p.add_argument("--vectors", default=S, help="entity vector TSV"),
        "context_vectors": lambda: p.add_argument(
            "--context-vectors", default=S, help="document vector TSV keyed by doc_id"
        ),
        "seed": lambda: p.add_argument("--seed", type=int, default=S),
        "input": lambda: p.add_argument("--input", default=S),
        "pred": lambda: p.add_argument("--pred", default=S),
        "gold": lambda: p.add_argument("--gold", default=S),
        "out": lambda: p.add_argument("--out", default=S, help="output path (default: stdout)"),
        "format": lambda: p.add_argument("--format", default=S),
        "n": lambda: p.add_argument("--n", type=int, default=S, help="sample size"),
        "present": lambda: p.add_argument("--present", type=int, default=S),
        "top_k": lambda: p.add_argument("--top-k", type=int, default=S),
        "jobs": lambda: p.add_argument("--jobs", type=int, default=S, help="parallel documents"),
    }
    for key in keys:
        opts[key]()
    p.add_argument("--config", default=argparse.SUPPRESS, help="flat JSON config file")


def build_parser():
    parser = argparse.ArgumentParser(prog="taxolink", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"taxolink {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "kb-validate": "check taxonomy invariants",
        "sample": "field-type and date stratified sample",
        "detect": "mention detection",
        "link": "end-to-end entity linking",
        "eval": "strong-match evaluation",
        "stats": "dataset statistics",
        "significance": "technological significance map data",
    }
    for name, keys in COMMAND_KEYS.items():
        _add_options(sub.add_parser(name, help=helps[name]), keys)
    return parser


def _read_config_file(path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc.msg} (line {exc.lineno})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a flat JSON object")
    out = {}
    for key, value in data.items():
        norm = key.lstrip("-").replace("-", "_")
        if norm not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r} in {path}")
        if isinstance(value, (dict, list)) and norm != "facets":
            raise ConfigError(f"config key {key!r} must be a scalar")
        out[norm] = value
    return out


def resolve_config(command, flags: dict, environ=None) -> dict:
    environ = os.environ if environ is None else environ
    flags = dict(flags)
    path = flags.pop("config", None) or environ.get(CONFIG_ENV)
    from_file = _read_config_file(path) if path else {}
    keys = COMMAND_KEYS[command]
    cfg = {k: DEFAULTS[k] for k in keys}
    cfg.update({k: v for k, v in from_file.items() if k in cfg})
    cfg.update({k: v for k, v in flags.items() if k in cfg})
    if isinstance(cfg.get("facets"), list):
        cfg["facets"] = ",".join(cfg["facets"])
    return cfg


def _require(cfg, *keys, command):
    missing = [k for k in keys if cfg.get(k) in (None, "")]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise ConfigError(f"'{command}' requires {flags}")


def _taxonomy(cfg, check=True):
    tax = load_taxonomy(cfg["kb"], check=check)
    if cfg.get("facets"):
        tax = filter_facets(tax, [f.strip() for f in cfg["facets"].split(",") if f.strip()])
    return tax


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _jsonl(rows):
    return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows)


def cmd_kb_validate(cfg):
    _require(cfg, "kb", command="kb-validate")
    tax = _taxonomy(cfg, check=False)
    violations = validate(tax)
    report = {"entities": len(tax), "valid": not violations, "violations": [v.to_dict() for v in violations]}
    _emit(json.dumps(report, indent=2, ensure_ascii=False) + "\n", cfg["out"])
    return 0 if not violations else 1


def cmd_sample(cfg):
    _require(cfg, "input", "n", command="sample")
    adocs = load_annotations(cfg["input"])
    by_id = {a.doc_id: a for a in adocs}
    config = SampleConfig(n=cfg["n"], present=cfg["present"])
    docs = [a.document for a in adocs]
    picked = stratified_sample(docs, config, seed=cfg["seed"])
    _emit(_jsonl(annotated_to_dict(by_id[d.doc_id]) for d in picked), cfg["out"])
    return 0


def cmd_detect(cfg):
    _require(cfg, "kb", "input", command="detect")
    tax = _taxonomy(cfg)
    index = build_label_index(tax)
    detector = DetectorConfig(cfg["detector"], cfg["fuzzy_threshold"])
    docs, _ = load_predictions(cfg["input"])
    rows = []
    for doc in docs:
        d = document_to_dict(doc)
        d["mentions"] = [
            {"start": s.start, "end": s.end, "entity_id": None, "score": s.similarity, "strategy": None}
            for s in detector.detect(doc.text, index)
        ]
        rows.append(d)
    _emit(_jsonl(rows), cfg["out"])
    return 0


def build_linker(cfg):
    """Fitted :class:`EntityLinker` from a resolved ``link`` config."""
    strategy = Strategy.parse(cfg["strategy"])
    if strategy is Strategy.MEMORIZATION and not cfg.get("train"):
        raise ConfigError("--strategy memorization requires --train")
    if cfg.get("context_vectors") and not cfg.get("vectors"):
        raise ConfigError("--context-vectors requires --vectors")
    if cfg.get("vectors") and strategy not in (Strategy.EMBEDDING, Strategy.KNN):
        raise ConfigError("--vectors only applies to the embedding and knn strategies")
    tax = _taxonomy(cfg)
    train = load_annotations(cfg["train"]) if cfg.get("train") else None
    linker = EntityLinker(
        taxonomy=tax,
        strategy=strategy,
        detector=cfg["detector"],
        fuzzy_threshold=cfg["fuzzy_threshold"],
        k=cfg["k"],
        seed=cfg["seed"],
        entity_vectors=load_vectors(cfg["vectors"]) if cfg.get("vectors") else None,
        context_vectors=load_vectors(cfg["context_vectors"]) if cfg.get("context_vectors") else None,
        n_jobs=cfg["jobs"],
    )
    return linker.fit(train)


def cmd_link(cfg):
    _require(cfg, "kb", "input", command="link")
    linker = build_linker(cfg)
    docs, given = load_predictions(cfg["input"])
    spans = None
    if cfg["mentions"] == "input":
        spans = [sorted({p.span for p in row}, key=lambda s: (s.start, s.end)) for row in given]
    preds = linker.predict(docs, spans=spans)
    _emit(dump_predictions(docs, preds), cfg["out"])
    return 0


def cmd_eval(cfg):
    _require(cfg, "pred", "gold", command="eval")
    gold_docs = load_annotations(cfg["gold"])
    _, preds = load_predictions(cfg["pred"])
    partition = None
    if cfg.get("train"):
        partition = seen_unseen_partition(load_annotations(cfg["train"]), gold_docs)
    reports = evaluate_all(preds, gold_table(gold_docs), partition)
    strategies = {p.strategy for row in preds for p in row if p.strategy is not None}
    name = strategies.pop().cli_name if len(strategies) == 1 else Path(cfg["pred"]).stem
    fmt = (cfg.get("format") or "json").lower()
    if fmt == "json":
        text = reports_to_json({name: reports})
    elif fmt == "text":
        text = format_tables({name: reports})
    else:
        raise ConfigError(f"eval --format must be json or text, got {fmt!r}")
    _emit(text, cfg["out"])
    return 0


def cmd_stats(cfg):
    _require(cfg, "input", command="stats")
    tax = _taxonomy(cfg) if cfg.get("kb") else None
    report = dataset_stats(load_annotations(cfg["input"]), taxonomy=tax, top_k=cfg["top_k"])
    fmt = (cfg.get("format") or "json").lower()
    if fmt == "json":
        text = json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n"
    elif fmt == "text":
        lines = [
            f"annotations        {report.annotations}",
            f"documents          {report.documents}",
            f"unique strings     {report.unique_strings}",
            f"unique entities    {report.unique_entities}",
            f"unique mentions    {report.unique_mentions}",
            f"mean words/text    {report.mean_text_length:.2f}",
            f"mean mentions/text {report.mean_mentions_per_document:.2f}",
        ]
        for facet, c in report.facet_annotations.items():
            lines.append(f"{facet:<18} C={c} UE={report.facet_unique_entities[facet]}")
        text = "\n".join(lines) + "\n"
    else:
        raise ConfigError(f"stats --format must be json or text, got {fmt!r}")
    _emit(text, cfg["out"])
    return 0


def cmd_significance(cfg):
    _require(cfg, "input", "out", command="significance")
    fmt = (cfg.get("format") or "geojson").lower()
    if fmt not in ("geojson", "csv"):
        raise ConfigError(f"significance --format must be geojson or csv, got {fmt!r}")
    with open(cfg["input"], encoding="utf-8") as fh:
        first = next((line for line in fh if line.strip()), "")
    if first and "mentions" in json.loads(first):
        docs, preds = load_predictions(cfg["input"])
        objects = objects_from_predictions(docs, preds)
    else:
        objects = load_objects(cfg["input"])
    records, dropped = compute_significance(objects)
    for o in dropped:
        print(json.dumps({"warning": "OutOfRange", "object_id": o.object_id, "date": o.date}), file=sys.stderr)
    export_map_data(records, cfg["out"], fmt)
    return 0


COMMANDS = {
    "kb-validate": cmd_kb_validate,
    "sample": cmd_sample,
    "detect": cmd_detect,
    "link": cmd_link,
    "eval": cmd_eval,
    "stats": cmd_stats,
    "significance": cmd_significance,
}


def _error(exc, code):
    payload = {"error": type(exc).__name__, "message": getattr(exc, "message", str(exc))}
    if isinstance(exc, InputError):
        payload["file"], payload["line"] = exc.path, exc.line
    if isinstance(exc, InvalidTaxonomy):
        payload["violations"] = [v.to_dict() for v in exc.violations]
    print(json.dumps(payload, ensure_ascii=False), file=sys.stderr)
    return code


def main(argv=None):
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    try:
        cfg = resolve_config(command, args)
        print(json.dumps({"command": command, "config": cfg}, sort_keys=True), file=sys.stderr)
        return COMMANDS[command](cfg)
    except ConfigError as exc:
        return _error(exc, 2)
    except (TaxolinkError, OSError, ValueError) as exc:
        return _error(exc, 1)


if __name__ == "__main__":
    sys.exit(main())
