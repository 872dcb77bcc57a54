"""Museum text fields, gold annotations, sampling, splits and dataset statistics."""
from __future__ import annotations

import enum
import json
import logging
import math
import random
import statistics
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import SpanOutOfBounds, UnknownEntity, UnknownField, MalformedRecord
from .text import normalize_str

log = logging.getLogger(__name__)


class FieldType(str, enum.Enum):
    TITLE = "Title"
    DESCRIPTION = "Description"
    MATERIAL = "Material"
    TECHNIQUE = "Technique"


@dataclass(frozen=True)
class Document:
    doc_id: str
    field_type: FieldType
    text: str
    object_date: int | None = None
    location: tuple | None = None  # (latitude, longitude) in degrees
    collection: str | None = None

    def __post_init__(self):
        if not isinstance(self.field_type, FieldType):
            object.__setattr__(self, "field_type", FieldType(self.field_type))
        if self.location is not None:
            object.__setattr__(self, "location", (float(self.location[0]), float(self.location[1])))


@dataclass(frozen=True, order=True)
class MentionAnnotation:
    start: int
    end: int
    entity_id: str


@dataclass(frozen=True)
class AnnotatedDocument:
    document: Document
    mentions: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "mentions", tuple(sorted(self.mentions)))
        n = len(self.document.text)
        for m in self.mentions:
            if not 0 <= m.start < m.end <= n:
                raise SpanOutOfBounds(self.document.doc_id, (m.start, m.end))

    @property
    def doc_id(self):
        return self.document.doc_id

    @property
    def text(self):
        return self.document.text

    def surface(self, mention):
        return self.document.text[mention.start:mention.end]


@dataclass
class DatasetSplit:
    train: list = field(default_factory=list)
    validation: list = field(default_factory=list)
    test: list = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for part in (self.train, self.validation, self.test):
            ids = {d.doc_id for d in part}
            if ids & seen:
                raise ValueError(f"doc ids shared across splits: {sorted(ids & seen)[:5]}")
            seen |= ids


# -- JSONL ------------------------------------------------------------------

DOC_KEYS = ("doc_id", "field_type", "text", "object_date", "lat", "lon", "collection")
_MENTION_KEYS = {"start", "end", "entity_id"}


def parse_document(obj, path=None, line=None, extra_keys=()) -> Document:
    """Build a :class:`Document` from one decoded JSONL object.

    Keys other than the document keys, ``mentions`` and ``extra_keys`` raise
    :class:`UnknownField`.
    """
    if not isinstance(obj, dict):
        raise MalformedRecord("expected a JSON object", path, line)
    unknown = set(obj) - set(DOC_KEYS) - {"mentions"} - set(extra_keys)
    if unknown:
        raise UnknownField(f"unknown field(s): {', '.join(sorted(unknown))}", path, line)
    for key in ("doc_id", "field_type", "text"):
        if key not in obj:
            raise MalformedRecord(f"missing key {key!r}", path, line)
    if not isinstance(obj["text"], str) or not isinstance(obj["doc_id"], str):
        raise MalformedRecord("'doc_id' and 'text' must be strings", path, line)
    try:
        ftype = FieldType(obj["field_type"])
    except ValueError:
        raise MalformedRecord(f"unknown field_type {obj['field_type']!r}", path, line) from None
    date = obj.get("object_date")
    if date is not None and (isinstance(date, bool) or not isinstance(date, int)):
        raise MalformedRecord("'object_date' must be an integer year", path, line)
    lat, lon = obj.get("lat"), obj.get("lon")
    if (lat is None) != (lon is None):
        raise MalformedRecord("'lat' and 'lon' must be given together", path, line)
    location = None if lat is None else (float(lat), float(lon))
    return Document(
        doc_id=obj["doc_id"],
        field_type=ftype,
        text=obj["text"],
        object_date=date,
        location=location,
        collection=obj.get("collection"),
    )


def document_to_dict(doc: Document) -> dict:
    d = {"doc_id": doc.doc_id, "field_type": doc.field_type.value, "text": doc.text}
    if doc.object_date is not None:
        d["object_date"] = doc.object_date
    if doc.location is not None:
        d["lat"], d["lon"] = doc.location
    if doc.collection is not None:
        d["collection"] = doc.collection
    return d


def iter_jsonl(path):
    """Yield ``(line_number, object)`` for each non-blank JSONL line."""
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                yield lineno, json.loads(raw)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(f"invalid JSON ({exc.msg})", path, lineno) from None


def load_documents(path) -> list[Document]:
    """Read plain documents; any ``mentions`` key present is ignored."""
    return [parse_document(obj, path, ln) for ln, obj in iter_jsonl(path)]


def load_annotations(path, taxonomy=None) -> list[AnnotatedDocument]:
    """Read annotation JSONL. With ``taxonomy``, every entity id must resolve in it."""
    out = []
    for lineno, obj in iter_jsonl(path):
        doc = parse_document(obj, path, lineno)
        mentions = []
        for m in obj.get("mentions", []):
            if not isinstance(m, dict):
                raise MalformedRecord("mention must be an object", path, lineno)
            unknown = set(m) - _MENTION_KEYS
            if unknown:
                raise UnknownField(
                    f"unknown mention field(s): {', '.join(sorted(unknown))}", path, lineno
                )
            try:
                start, end, eid = m["start"], m["end"], m["entity_id"]
            except KeyError as exc:
                raise MalformedRecord(f"mention missing {exc.args[0]!r}", path, lineno) from None
            if not (isinstance(start, int) and isinstance(end, int) and isinstance(eid, str)):
                raise MalformedRecord("mention start/end must be ints, entity_id a string", path, lineno)
            if not 0 <= start < end <= len(doc.text):
                raise SpanOutOfBounds(doc.doc_id, (start, end), path, lineno)
            if taxonomy is not None and eid not in taxonomy:
                raise UnknownEntity(f"entity {eid!r} not in taxonomy", path, lineno)
            mentions.append(MentionAnnotation(start, end, eid))
        out.append(AnnotatedDocument(doc, tuple(mentions)))
    return out


def annotated_to_dict(adoc: AnnotatedDocument) -> dict:
    d = document_to_dict(adoc.document)
    d["mentions"] = [
        {"start": m.start, "end": m.end, "entity_id": m.entity_id} for m in adoc.mentions
    ]
    return d


def save_annotations(docs: Iterable[AnnotatedDocument], path):
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for adoc in docs:
            fh.write(json.dumps(annotated_to_dict(adoc), ensure_ascii=False) + "\n")


# -- Stratified sampling ----------------------------------------------------

DEFAULT_PROPORTIONS = {
    (FieldType.DESCRIPTION,): 0.5,
    (FieldType.TITLE,): 0.3,
    (FieldType.MATERIAL, FieldType.TECHNIQUE): 0.2,
}


@dataclass(frozen=True)
class SampleConfig:
    """Sampling plan.

    ``proportions`` maps a group of field types to its share of ``n``. Dates in
    ``[0, present)`` fall into ``recent_window``-year bins; dates in
    ``[horizon, 0)`` into ``ancient_window``-year bins.
    """

    n: int
    proportions: Mapping = field(default_factory=lambda: dict(DEFAULT_PROPORTIONS))
    present: int = 2000
    horizon: int = -3000
    recent_window: int = 200
    ancient_window: int = 500

    def windows(self):
        out = []
        lo = self.horizon
        while lo < 0:
            out.append((lo, min(lo + self.ancient_window, 0)))
            lo += self.ancient_window
        lo = 0
        while lo < self.present:
            out.append((lo, min(lo + self.recent_window, self.present)))
            lo += self.recent_window
        return out

    def window_of(self, year):
        """Half-open window containing ``year``, or None outside [horizon, present)."""
        if year is None or year < self.horizon or year >= self.present:
            return None
        if year < 0:
            lo = self.horizon + ((year - self.horizon) // self.ancient_window) * self.ancient_window
            return (lo, min(lo + self.ancient_window, 0))
        lo = (year // self.recent_window) * self.recent_window
        return (lo, min(lo + self.recent_window, self.present))


@dataclass(frozen=True)
class Shortfall:
    """A window (within a field-type group) that could not meet its equal share."""

    group: tuple
    window: tuple
    target: int
    available: int


@dataclass
class SamplePlan:
    quotas: dict  # group -> int
    allocations: dict  # (group, window) -> int
    shortfalls: list


def largest_remainder(n, weights):
    """Integer apportionment of ``n`` by ``weights`` (ties go to the earlier key)."""
    keys = list(weights)
    total = float(sum(weights.values()))
    if n <= 0 or total <= 0:
        return {k: 0 for k in keys}
    exact = [n * weights[k] / total for k in keys]
    # Round away float noise so that e.g. 10 * 0.3 counts as exactly 3.
    exact = [round(x, 9) for x in exact]
    base = [math.floor(x) for x in exact]
    rest = n - sum(base)
    order = sorted(range(len(keys)), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[:rest]:
        base[i] += 1
    return dict(zip(keys, base))


def _round_robin(quota, capacities):
    """Fill ``quota`` one unit per window per pass, skipping exhausted windows."""
    alloc = [0] * len(capacities)
    left = quota
    while left > 0:
        progressed = False
        for i, cap in enumerate(capacities):
            if left == 0:
                break
            if alloc[i] < cap:
                alloc[i] += 1
                left -= 1
                progressed = True
        if not progressed:
            break
    return alloc


def plan_sample(docs: Sequence[Document], config: SampleConfig):
    """Work out per-window counts without drawing; returns (plan, pools)."""
    groups = [tuple(g) if isinstance(g, (tuple, list, frozenset, set)) else (g,) for g in config.proportions]
    groups = [tuple(FieldType(f) for f in g) for g in groups]
    weights = dict(zip(groups, config.proportions.values()))
    quotas = largest_remainder(config.n, weights)
    windows = config.windows()

    pools = defaultdict(list)
    for doc in docs:
        win = config.window_of(doc.object_date)
        if win is None:
            continue
        for g in groups:
            if doc.field_type in g:
                pools[(g, win)].append(doc)
                break

    allocations = {}
    shortfalls = []
    for g in groups:
        caps = [len(pools[(g, w)]) for w in windows]
        alloc = _round_robin(quotas[g], caps)
        base, extra = divmod(quotas[g], len(windows)) if windows else (0, 0)
        for i, w in enumerate(windows):
            allocations[(g, w)] = alloc[i]
            target = base + (1 if i < extra else 0)
            if caps[i] < target:
                shortfalls.append(Shortfall(g, w, target, caps[i]))
    return SamplePlan(quotas, allocations, shortfalls), pools


def stratified_sample(docs: Sequence[Document], config: SampleConfig, seed: int = 42) -> list[Document]:
    """Draw a field-type- and date-stratified sample.

    Each field-type group gets a largest-remainder share of ``config.n``. Inside
    a group, windows receive equal counts, with any window's shortfall passed
    round-robin to windows that still have documents. Under-filled windows are
    logged as warnings. Output is ordered by group, window, then doc_id.
    """
    plan, pools = plan_sample(docs, config)
    for sf in plan.shortfalls:
        log.warning(
            "InsufficientData: window [%d, %d) for %s has %d document(s), target %d",
            sf.window[0], sf.window[1], "+".join(f.value for f in sf.group), sf.available, sf.target,
        )
    rng = random.Random(seed)
    out = []
    for (g, w), count in plan.allocations.items():
        if count == 0:
            continue
        pool = sorted(pools[(g, w)], key=lambda d: d.doc_id)
        out.extend(sorted(rng.sample(pool, count), key=lambda d: d.doc_id))
    return out


def split_train_val(docs: Sequence[AnnotatedDocument], ratio: float = 0.9, seed: int = 42):
    """Random partition into (train, validation); ``|train| = round(ratio * n)`` (half up)."""
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    ordered = sorted(docs, key=lambda d: d.doc_id)
    n_train = math.floor(ratio * len(ordered) + 0.5)
    idx = list(range(len(ordered)))
    random.Random(seed).shuffle(idx)
    train_idx = set(idx[:n_train])
    train = [d for i, d in enumerate(ordered) if i in train_idx]
    val = [d for i, d in enumerate(ordered) if i not in train_idx]
    return train, val


# -- Seen / unseen ----------------------------------------------------------

class Partition(str, enum.Enum):
    SEEN = "Seen"
    UNSEEN = "Unseen"


def mention_surfaces(docs: Iterable[AnnotatedDocument]):
    """Set of normalized gold mention surfaces."""
    return {normalize_str(d.surface(m)) for d in docs for m in d.mentions}


def seen_unseen_partition(train, test) -> dict:
    """Label each test annotation, keyed ``(doc_id, start, end)``, as Seen or Unseen."""
    known = mention_surfaces(train)
    labels = {}
    for d in test:
        for m in d.mentions:
            seen = normalize_str(d.surface(m)) in known
            labels[(d.doc_id, m.start, m.end)] = Partition.SEEN if seen else Partition.UNSEEN
    return labels


# -- Statistics -------------------------------------------------------------

@dataclass
class StatsReport:
    annotations: int = 0
    documents: int = 0
    unique_strings: int = 0
    unique_entities: int = 0
    unique_mentions: int = 0
    facet_annotations: dict = field(default_factory=dict)
    facet_unique_entities: dict = field(default_factory=dict)
    text_length_distribution: dict = field(default_factory=dict)
    mentions_per_document: dict = field(default_factory=dict)
    mean_text_length: float = 0.0
    mean_mentions_per_document: float = 0.0
    top_entities: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "annotations": self.annotations,
            "documents": self.documents,
            "unique_strings": self.unique_strings,
            "unique_entities": self.unique_entities,
            "unique_mentions": self.unique_mentions,
            "facet_annotations": dict(self.facet_annotations),
            "facet_unique_entities": dict(self.facet_unique_entities),
            "text_length_distribution": {str(k): v for k, v in self.text_length_distribution.items()},
            "mentions_per_document": {str(k): v for k, v in self.mentions_per_document.items()},
            "mean_text_length": self.mean_text_length,
            "mean_mentions_per_document": self.mean_mentions_per_document,
            "top_entities": {k: [list(p) for p in v] for k, v in self.top_entities.items()},
        }


def dataset_stats(docs: Sequence[AnnotatedDocument], taxonomy=None, top_k: int = 10) -> StatsReport:
    """Corpus counts: annotations, unique strings (US), entities (UE), mentions (UM).

    Per-facet breakdowns need ``taxonomy``; entity ids it cannot resolve are
    counted under ``"Unknown"``.
    """
    docs = list(docs)
    if not docs:
        return StatsReport()
    entity_counts = Counter()
    surfaces = set()
    for d in docs:
        for m in d.mentions:
            entity_counts[m.entity_id] += 1
            surfaces.add(normalize_str(d.surface(m)))
    lengths = Counter(len(d.text.split()) for d in docs)
    per_doc = Counter(len(d.mentions) for d in docs)

    facet_ann = Counter()
    facet_ents = defaultdict(set)
    by_facet = defaultdict(Counter)
    if taxonomy is not None:
        for eid, c in entity_counts.items():
            ent = taxonomy.get(eid)
            fname = ent.facet.value if ent is not None else "Unknown"
            facet_ann[fname] += c
            facet_ents[fname].add(eid)
            by_facet[fname][eid] += c
    else:
        by_facet["All"] = entity_counts
    top = {
        f: sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
        for f, counter in sorted(by_facet.items())
    }
    return StatsReport(
        annotations=sum(entity_counts.values()),
        documents=len(docs),
        unique_strings=len({d.text for d in docs}),
        unique_entities=len(entity_counts),
        unique_mentions=len(surfaces),
        facet_annotations=dict(sorted(facet_ann.items())),
        facet_unique_entities={f: len(s) for f, s in sorted(facet_ents.items())},
        text_length_distribution=dict(sorted(lengths.items())),
        mentions_per_document=dict(sorted(per_doc.items())),
        mean_text_length=statistics.fmean(len(d.text.split()) for d in docs),
        mean_mentions_per_document=statistics.fmean(len(d.mentions) for d in docs),
        top_entities=top,
    )
