"""Strong-match evaluation: mention detection, disambiguation, end-to-end, rater agreement.

Predictions and gold are tables ``{doc_id: [(start, end, entity_id), ...]}``;
``(start, end)`` pairs are enough for mention detection, and a prediction's
``entity_id`` may be None (an abstention). Lists of
:class:`~taxolink.corpus.AnnotatedDocument` or of ``LinkPrediction`` (flat or
per document) are converted automatically.
"""
from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from typing import Mapping

from .corpus import AnnotatedDocument, Partition
from .errors import UnknownDocId


@dataclass(frozen=True)
class MetricsReport:
    true_positives: int
    false_positives: int
    false_negatives: int
    precision: float
    recall: float
    f1: float
    breakdowns: Mapping = field(default_factory=dict)

    @classmethod
    def from_counts(cls, tp, fp, fn, breakdowns=None):
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        return cls(tp, fp, fn, p, r, f, dict(breakdowns or {}))

    def to_dict(self):
        d = {
            "true_positives": self.true_positives,
            "false_positives": self.false_positives,
            "false_negatives": self.false_negatives,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }
        if self.breakdowns:
            d["breakdowns"] = {str(getattr(k, "value", k)): v for k, v in self.breakdowns.items()}
        return d


def _rows(x):
    """Normalize any supported input to ``{doc_id: [(start, end, entity_id), ...]}``."""
    if isinstance(x, Mapping):
        out = {}
        for doc_id, items in x.items():
            rows = []
            for it in items:
                if hasattr(it, "span") and hasattr(it, "entity_id"):
                    rows.append((it.span.start, it.span.end, it.entity_id))
                elif hasattr(it, "start") and hasattr(it, "end"):
                    rows.append((it.start, it.end, getattr(it, "entity_id", None)))
                else:
                    t = tuple(it)
                    rows.append((t[0], t[1], t[2] if len(t) > 2 else None))
            out[doc_id] = rows
        return out
    out = {}
    for item in x:
        if isinstance(item, AnnotatedDocument):
            out.setdefault(item.doc_id, []).extend((m.start, m.end, m.entity_id) for m in item.mentions)
        elif isinstance(item, (list, tuple)):
            for p in item:
                out.setdefault(p.doc_id, []).append((p.span.start, p.span.end, p.entity_id))
        else:
            out.setdefault(item.doc_id, []).append((item.span.start, item.span.end, item.entity_id))
    return out


def gold_table(docs):
    """Table for gold documents, keeping documents that have no mentions."""
    return _rows(list(docs))


def _check_docs(pred, gold):
    unknown = sorted(set(pred) - set(gold))
    if unknown:
        raise UnknownDocId(f"prediction for unknown document(s): {', '.join(map(str, unknown[:5]))}")


def eval_mention_detection(pred, gold) -> MetricsReport:
    """Exact-boundary span matching; duplicate spans on either side count once."""
    pred, gold = _rows(pred), _rows(gold)
    _check_docs(pred, gold)
    p = {(d, s, e) for d, rows in pred.items() for s, e, _ in rows}
    g = {(d, s, e) for d, rows in gold.items() for s, e, _ in rows}
    tp = len(p & g)
    return MetricsReport.from_counts(tp, len(p) - tp, len(g) - tp)


def eval_disambiguation(pred, gold, partition=None) -> MetricsReport:
    """Linking precision over predictions whose span exactly matches a gold span.

    Abstentions count as wrong. Every gold-aligned prediction is one decision,
    so here precision equals recall (wrong decisions are both FP and FN).
    ``partition`` maps ``(doc_id, start, end)`` to Seen/Unseen; when given,
    ``breakdowns`` holds the precision for All, Seen and Unseen.
    """
    pred, gold = _rows(pred), _rows(gold)
    g_spans = {(d, s, e) for d, rows in gold.items() for s, e, _ in rows}
    g_links = {(d, s, e, eid) for d, rows in gold.items() for s, e, eid in rows}
    aligned = {
        (d, s, e, eid) for d, rows in pred.items() for s, e, eid in rows if (d, s, e) in g_spans
    }
    correct = {a for a in aligned if a[3] is not None and a in g_links}
    tp = len(correct)
    wrong = len(aligned) - tp
    breakdowns = {}
    if partition is not None:
        groups = {"All": [0, 0], Partition.SEEN.value: [0, 0], Partition.UNSEEN.value: [0, 0]}
        for a in aligned:
            hit = a in correct
            groups["All"][0] += hit
            groups["All"][1] += 1
            label = partition.get(a[:3])
            if label is not None:
                key = getattr(label, "value", label)
                groups[key][0] += hit
                groups[key][1] += 1
        breakdowns = {k: (c / n if n else 0.0) for k, (c, n) in groups.items()}
        breakdowns.update({f"{k}_count": n for k, (_, n) in groups.items()})
    return MetricsReport.from_counts(tp, wrong, wrong, breakdowns)


def eval_end_to_end(pred, gold) -> MetricsReport:
    """Span and entity must both match exactly.

    An abstention never scores; it is a false positive only when its span
    matches no gold span.
    """
    pred, gold = _rows(pred), _rows(gold)
    _check_docs(pred, gold)
    g = {(d, s, e, eid) for d, rows in gold.items() for s, e, eid in rows}
    g_spans = {a[:3] for a in g}
    p = {(d, s, e, eid) for d, rows in pred.items() for s, e, eid in rows if eid is not None}
    stray_abstains = {
        (d, s, e)
        for d, rows in pred.items()
        for s, e, eid in rows
        if eid is None and (d, s, e) not in g_spans
    }
    tp = len(p & g)
    return MetricsReport.from_counts(tp, len(p) - tp + len(stray_abstains), len(g) - tp)


def evaluate_all(pred, gold, partition=None):
    """MD, ED and E2E reports for one system, keyed ``"md"``, ``"ed"``, ``"e2e"``."""
    return {
        "md": eval_mention_detection(pred, gold),
        "ed": eval_disambiguation(pred, gold, partition),
        "e2e": eval_end_to_end(pred, gold),
    }


RATER_METRICS = (
    "md_precision",
    "md_recall",
    "md_f1",
    "ed_precision",
    "e2e_precision",
    "e2e_recall",
    "e2e_f1",
)


@dataclass(frozen=True)
class AgreementReport:
    per_rater: Mapping  # rater -> {metric: value}
    bounds: Mapping  # metric -> {"upper", "median", "lower"}

    def to_dict(self):
        return {"per_rater": {k: dict(v) for k, v in self.per_rater.items()},
                "bounds": {k: dict(v) for k, v in self.bounds.items()}}


def rater_agreement(raters: Mapping, consensus) -> AgreementReport:
    """Score each rater against the consensus labels, then take bounds over raters."""
    if not raters:
        raise ValueError("need at least one rater")
    gold = gold_table(consensus) if not isinstance(consensus, Mapping) else _rows(consensus)
    per = {}
    for name in sorted(raters):
        ann = _rows(raters[name])
        _check_docs(ann, gold)
        md = eval_mention_detection(ann, gold)
        ed = eval_disambiguation(ann, gold)
        e2e = eval_end_to_end(ann, gold)
        per[name] = {
            "md_precision": md.precision,
            "md_recall": md.recall,
            "md_f1": md.f1,
            "ed_precision": ed.precision,
            "e2e_precision": e2e.precision,
            "e2e_recall": e2e.recall,
            "e2e_f1": e2e.f1,
        }
    bounds = {}
    for metric in RATER_METRICS:
        values = [per[n][metric] for n in per]
        bounds[metric] = {
            "upper": max(values),
            "median": statistics.median(values),
            "lower": min(values),
        }
    return AgreementReport(per, bounds)


def _pct(x):
    return f"{100 * x:.1f}"


def format_tables(systems: Mapping) -> str:
    """Plain-text MD / ED / E2E tables for ``{system name: evaluate_all(...) result}``."""
    width = max([len("System")] + [len(n) for n in systems]) + 2
    lines = ["Mention detection (%)", f"{'System':<{width}}{'Precision':>10}{'Recall':>10}{'F1':>10}"]
    for name, r in systems.items():
        m = r["md"]
        lines.append(f"{name:<{width}}{_pct(m.precision):>10}{_pct(m.recall):>10}{_pct(m.f1):>10}")
    lines += ["", "Entity disambiguation (% precision)", f"{'System':<{width}}{'All tags':>10}{'Unseen':>10}{'Seen':>10}"]
    for name, r in systems.items():
        ed = r["ed"]
        b = ed.breakdowns
        unseen = _pct(b["Unseen"]) if b else "-"
        seen = _pct(b["Seen"]) if b else "-"
        lines.append(f"{name:<{width}}{_pct(ed.precision):>10}{unseen:>10}{seen:>10}")
    lines += ["", "End-to-end (%)", f"{'System':<{width}}{'Precision':>10}{'Recall':>10}{'F1':>10}"]
    for name, r in systems.items():
        m = r["e2e"]
        lines.append(f"{name:<{width}}{_pct(m.precision):>10}{_pct(m.recall):>10}{_pct(m.f1):>10}")
    return "\n".join(lines) + "\n"


def reports_to_json(systems: Mapping) -> str:
    return json.dumps(
        {name: {k: v.to_dict() for k, v in r.items()} for name, r in systems.items()},
        indent=2,
        sort_keys=True,
    ) + "\n"
