"""Candidate generation, disambiguation strategies and the end-to-end linker.

Four strategies share one detector:

* ``StringSim``: best label similarity, uniform random pick among exact ties.
* ``Memorization``: the entity most often gold-linked to the same normalized
  surface in training data; unseen surfaces abstain.
* ``Embedding``: cosine between the field text and each candidate's entity text.
* ``KnnBiEncoder``: global nearest entity to the field text, no label gating.
"""
from __future__ import annotations

import enum
import hashlib
import json
import random
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_document
from .corpus import AnnotatedDocument, Document, document_to_dict, iter_jsonl, parse_document
from .embeddings import IdfModel, VectorStore, cosine, embed, fit_tfidf, knn, tie_key
from .errors import (
    ConfigError,
    DimensionMismatch,
    MalformedRecord,
    NoCandidates,
    SpanOutOfBounds,
    TaxolinkError,
)
from .matcher import (
    DEFAULT_FUZZY_THRESHOLD,
    LabelIndex,
    Span,
    best_fuzzy_labels,
    build_label_index,
    detect_exact,
    detect_fuzzy,
)
from .taxonomy import entity_text
from .text import normalize_str

DEFAULT_K = 10


class Strategy(str, enum.Enum):
    STRING_SIM = "StringSim"
    MEMORIZATION = "Memorization"
    EMBEDDING = "Embedding"
    KNN = "KnnBiEncoder"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {
            "string-sim": cls.STRING_SIM,
            "memorization": cls.MEMORIZATION,
            "embedding": cls.EMBEDDING,
            "knn": cls.KNN,
        }
        key = str(value).strip().lower().replace("_", "-")
        if key in aliases:
            return aliases[key]
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ValueError(f"unknown strategy {value!r}")

    @property
    def cli_name(self):
        return {
            Strategy.STRING_SIM: "string-sim",
            Strategy.MEMORIZATION: "memorization",
            Strategy.EMBEDDING: "embedding",
            Strategy.KNN: "knn",
        }[self]


@dataclass(frozen=True)
class Candidate:
    entity_id: str
    label_similarity: float | None = None
    retrieval_score: float | None = None


@dataclass(frozen=True)
class CandidateSet:
    mention: Span
    candidates: tuple = ()

    def __len__(self):
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)

    @property
    def ids(self):
        return [c.entity_id for c in self.candidates]


@dataclass(frozen=True)
class LinkPrediction:
    doc_id: str
    span: Span
    entity_id: str | None
    score: float
    strategy: Strategy | None
    candidates: CandidateSet | None = field(default=None, compare=False)
    error: str | None = field(default=None, compare=False)

    @property
    def abstained(self):
        return self.entity_id is None

    @property
    def start(self):
        return self.span.start

    @property
    def end(self):
        return self.span.end


def generate_candidates(
    span: Span,
    index: LabelIndex,
    fuzzy_threshold: float = DEFAULT_FUZZY_THRESHOLD,
    max_candidates: int = DEFAULT_K,
) -> CandidateSet:
    """Exact and fuzzy label matches for ``span``, best similarity first.

    An entity reached through several labels keeps its best similarity.
    Raises :class:`NoCandidates` when nothing reaches ``fuzzy_threshold``.
    """
    surface = normalize_str(span.surface)
    best = {}
    for eid in index.lookup(surface):
        best[eid] = 1.0
    if surface:
        for sim, label in best_fuzzy_labels(surface, index, fuzzy_threshold):
            for eid in index.labels[label]:
                if sim > best.get(eid, -1.0):
                    best[eid] = sim
    if not best:
        raise NoCandidates(f"no label within {fuzzy_threshold} of {span.surface!r}")
    ranked = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))[:max_candidates]
    return CandidateSet(span, tuple(Candidate(eid, sim) for eid, sim in ranked))


def derive_seed(seed, doc_id, start):
    """Per-span seed, independent of processing order."""
    digest = hashlib.sha256(f"{seed}\x1f{doc_id}\x1f{start}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def link_string_sim(cands: CandidateSet, rng_seed, doc_id="") -> LinkPrediction:
    """Pick uniformly among the candidates tied at the top label similarity."""
    if not cands.candidates:
        raise NoCandidates("empty candidate set")
    top = max(c.label_similarity for c in cands)
    tied = sorted((c for c in cands if c.label_similarity == top), key=lambda c: c.entity_id)
    choice = tied[0] if len(tied) == 1 else random.Random(rng_seed).choice(tied)
    return LinkPrediction(doc_id, cands.mention, choice.entity_id, top, Strategy.STRING_SIM, cands)


@dataclass(frozen=True)
class MemoTable:
    entries: Mapping  # normalized surface -> (entity id, count)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, surface):
        return surface in self.entries

    def get(self, surface):
        return self.entries.get(surface)

    def __reduce__(self):
        return (_memo_table, (dict(self.entries),))


def _memo_table(entries):
    return MemoTable(MappingProxyType(entries))


def train_memorization(train: Sequence[AnnotatedDocument]) -> MemoTable:
    counts = defaultdict(Counter)
    for doc in train:
        for m in doc.mentions:
            counts[normalize_str(doc.surface(m))][m.entity_id] += 1
    entries = {}
    for surface in sorted(counts):
        eid, c = min(counts[surface].items(), key=lambda kv: (-kv[1], kv[0]))
        entries[surface] = (eid, c)
    return MemoTable(MappingProxyType(entries))


def link_memorization(span: Span, table: MemoTable, doc_id="") -> LinkPrediction:
    hit = table.get(normalize_str(span.surface))
    if hit is None:
        return LinkPrediction(doc_id, span, None, 0.0, Strategy.MEMORIZATION)
    return LinkPrediction(doc_id, span, hit[0], 1.0, Strategy.MEMORIZATION)


def link_embedding(
    context_text,
    cands: CandidateSet,
    model: IdfModel | None,
    entity_texts: Mapping[str, str] | None = None,
    doc_id="",
    entity_vectors: VectorStore | None = None,
    context_vector=None,
) -> LinkPrediction:
    """Choose the candidate whose entity text is closest (cosine) to the context.

    Precomputed ``entity_vectors`` / ``context_vector`` take precedence over
    embedding ``entity_texts`` / ``context_text`` with ``model``.
    """
    if not cands.candidates:
        raise NoCandidates("empty candidate set")
    q = context_vector if context_vector is not None else embed(model, context_text)
    scored = []
    for c in cands:
        if entity_vectors is not None:
            vec = entity_vectors[c.entity_id]
        else:
            vec = embed(model, entity_texts[c.entity_id])
        scored.append((cosine(q, vec), c.entity_id))
    score, eid = min(scored, key=lambda p: (-tie_key(p[0]), p[1]))
    return LinkPrediction(doc_id, cands.mention, eid, score, Strategy.EMBEDDING, cands)


def link_knn(
    context_text,
    store: VectorStore,
    model: IdfModel | None,
    k: int = DEFAULT_K,
    span: Span | None = None,
    doc_id="",
    context_vector=None,
):
    """Global KNN retrieval of entities for the context; the top hit is the prediction."""
    q = context_vector if context_vector is not None else embed(model, context_text)
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (store.dim,):
        raise DimensionMismatch(f"context vector dim {q.shape[0]} != store dim {store.dim}")
    if span is None:
        span = Span(0, max(1, len(context_text)), context_text)
    hits = knn(store, q, k)
    cands = CandidateSet(span, tuple(Candidate(eid, None, score) for eid, score in hits))
    if not hits:
        return cands, LinkPrediction(doc_id, span, None, 0.0, Strategy.KNN, cands)
    eid, score = hits[0]
    return cands, LinkPrediction(doc_id, span, eid, score, Strategy.KNN, cands)


# -- Pipeline ---------------------------------------------------------------

@dataclass(frozen=True)
class DetectorConfig:
    mode: str = "exact"  # "exact" or "fuzzy"
    min_similarity: float = DEFAULT_FUZZY_THRESHOLD

    def __post_init__(self):
        if self.mode not in ("exact", "fuzzy"):
            raise ConfigError(f"detector mode must be 'exact' or 'fuzzy', got {self.mode!r}")

    def detect(self, text, index):
        if self.mode == "fuzzy":
            return detect_fuzzy(text, index, self.min_similarity)
        return detect_exact(text, index)


def run_pipeline(doc: Document, detector: DetectorConfig, linker: "EntityLinker", spans=None):
    """Detect (unless ``spans`` is given), generate candidates and link each span.

    A span whose linking fails is kept as an abstention carrying the error text.
    """
    if spans is None:
        spans = detector.detect(doc.text, linker.index_)
    preds = [linker.link_span(doc, span) for span in spans]
    return sorted(preds, key=lambda p: (p.span.start, p.span.end))


class EntityLinker(BaseEstimator):
    """End-to-end linker over a taxonomy.

    ``fit(X)`` prepares the label index, a TF-IDF model over entity texts,
    entity vectors, and (for memorization) the memo table learned from
    ``X``, a list of annotated training documents. ``predict(X)`` returns one
    list of :class:`LinkPrediction` per input document.

    Parameters
    ----------
    taxonomy : Taxonomy
    strategy : {"string-sim", "memorization", "embedding", "knn"}
    detector : {"exact", "fuzzy"}
    fuzzy_threshold : float
        Used both for fuzzy detection and candidate generation.
    k : int
        Candidate-set size and KNN depth.
    seed : int
        Base seed for string-similarity tie-breaking.
    entity_vectors, context_vectors : VectorStore, optional
        Externally computed vectors keyed by entity id / doc_id. When
        ``entity_vectors`` is given without ``context_vectors``, contexts are
        embedded with the internal TF-IDF model and must share its dimension.
    n_jobs : int
        Documents processed in parallel; output order never depends on it.
    """

    def __init__(
        self,
        taxonomy=None,
        strategy="string-sim",
        detector="exact",
        fuzzy_threshold=DEFAULT_FUZZY_THRESHOLD,
        k=DEFAULT_K,
        seed=42,
        entity_vectors=None,
        context_vectors=None,
        n_jobs=1,
    ):
        self.taxonomy = taxonomy
        self.strategy = strategy
        self.detector = detector
        self.fuzzy_threshold = fuzzy_threshold
        self.k = k
        self.seed = seed
        self.entity_vectors = entity_vectors
        self.context_vectors = context_vectors
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        if self.taxonomy is None:
            raise ConfigError("EntityLinker needs a taxonomy")
        strategy = Strategy.parse(self.strategy)
        if not (0.0 < self.fuzzy_threshold <= 1.0):
            raise ConfigError(f"fuzzy_threshold must be in (0, 1], got {self.fuzzy_threshold}")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        self.strategy_ = strategy
        self.detector_ = DetectorConfig(self.detector, self.fuzzy_threshold)
        self.index_ = build_label_index(self.taxonomy)
        self.entity_texts_ = {e.id: entity_text(e) for e in self.taxonomy}
        self.model_ = fit_tfidf(list(self.entity_texts_.items())) if self.entity_texts_ else None
        if self.entity_vectors is not None:
            missing = [eid for eid in self.entity_texts_ if eid not in self.entity_vectors]
            if missing and strategy in (Strategy.EMBEDDING, Strategy.KNN):
                raise ConfigError(f"{len(missing)} taxonomy entities lack vectors, e.g. {missing[0]!r}")
            self.store_ = self.entity_vectors
        elif self.model_ is not None:
            ids = list(self.entity_texts_)
            self.store_ = VectorStore(ids, np.vstack([embed(self.model_, self.entity_texts_[i]) for i in ids]))
        else:
            self.store_ = VectorStore([], np.zeros((0, 0)))
        if strategy is Strategy.MEMORIZATION:
            if X is None:
                raise ConfigError("the memorization strategy needs training annotations")
            self.memo_ = train_memorization(X)
        else:
            self.memo_ = train_memorization(X) if X is not None else None
        return self

    def _context_vector(self, doc):
        if self.context_vectors is not None:
            if doc.doc_id not in self.context_vectors:
                raise DimensionMismatch(f"no context vector for document {doc.doc_id!r}")
            return self.context_vectors[doc.doc_id]
        if self.model_ is None:
            return np.zeros(self.store_.dim)
        return embed(self.model_, doc.text)

    def link_span(self, doc: Document, span: Span) -> LinkPrediction:
        check_is_fitted(self, "index_")
        strategy = self.strategy_
        try:
            if strategy is Strategy.MEMORIZATION:
                return link_memorization(span, self.memo_, doc.doc_id)
            if strategy is Strategy.KNN:
                _, pred = link_knn(
                    doc.text, self.store_, None, self.k, span=span, doc_id=doc.doc_id,
                    context_vector=self._context_vector(doc),
                )
                return pred
            cands = generate_candidates(span, self.index_, self.fuzzy_threshold, self.k)
            if strategy is Strategy.STRING_SIM:
                return link_string_sim(cands, derive_seed(self.seed, doc.doc_id, span.start), doc.doc_id)
            return link_embedding(
                doc.text, cands, self.model_, self.entity_texts_, doc.doc_id,
                entity_vectors=self.store_, context_vector=self._context_vector(doc),
            )
        except TaxolinkError as exc:
            return LinkPrediction(doc.doc_id, span, None, 0.0, strategy, error=f"{type(exc).__name__}: {exc}")

    def predict_one(self, doc, spans=None):
        check_is_fitted(self, "index_")
        if isinstance(doc, AnnotatedDocument):
            doc = doc.document
        return run_pipeline(doc, self.detector_, self, spans=spans)

    def predict(self, X, spans=None):
        """Link every document; ``spans`` optionally supplies per-document spans."""
        check_is_fitted(self, "index_")
        docs = [check_document(d, i) for i, d in enumerate(X)]
        span_lists = list(spans) if spans is not None else [None] * len(docs)
        if len(span_lists) != len(docs):
            raise ValueError("spans must match documents one-to-one")
        if self.n_jobs and self.n_jobs > 1:
            with ThreadPoolExecutor(max_workers=self.n_jobs) as pool:
                return list(pool.map(self.predict_one, docs, span_lists))
        return [self.predict_one(d, s) for d, s in zip(docs, span_lists)]

    def detect(self, X):
        check_is_fitted(self, "index_")
        return [self.detector_.detect(check_document(d, i).text, self.index_) for i, d in enumerate(X)]


def gold_spans(doc: AnnotatedDocument):
    """Distinct gold spans of a document, for linking on gold-aligned mentions."""
    keys = sorted({(m.start, m.end) for m in doc.mentions})
    return [Span.from_text(doc.text, s, e) for s, e in keys]


# -- Prediction JSONL -------------------------------------------------------

_PRED_MENTION_KEYS = {"start", "end", "entity_id", "score", "strategy"}


def prediction_to_dict(pred: LinkPrediction) -> dict:
    return {
        "start": pred.span.start,
        "end": pred.span.end,
        "entity_id": pred.entity_id,
        "score": pred.score,
        "strategy": pred.strategy.value if pred.strategy is not None else None,
    }


def dump_predictions(docs: Sequence[Document], predictions: Sequence[Sequence[LinkPrediction]]) -> str:
    """One JSONL line per document; ``mentions`` holds that document's predictions."""
    lines = []
    for doc, preds in zip(docs, predictions):
        if isinstance(doc, AnnotatedDocument):
            doc = doc.document
        d = document_to_dict(doc)
        d["mentions"] = [prediction_to_dict(p) for p in preds]
        lines.append(json.dumps(d, ensure_ascii=False) + "\n")
    return "".join(lines)


def save_predictions(docs, predictions, path):
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_predictions(docs, predictions))


def load_predictions(path):
    """Read prediction JSONL (annotation JSONL is accepted too).

    Returns ``(documents, predictions)`` where ``predictions[i]`` lists the
    predictions for ``documents[i]``. Missing ``score`` reads as 1.0 and
    missing ``strategy`` as None.
    """
    docs = []
    preds = []
    for lineno, obj in iter_jsonl(path):
        doc = parse_document(obj, path, lineno)
        row = []
        for m in obj.get("mentions", []):
            if not isinstance(m, dict) or set(m) - _PRED_MENTION_KEYS:
                raise MalformedRecord("bad prediction mention", path, lineno)
            try:
                start, end = int(m["start"]), int(m["end"])
            except (KeyError, TypeError, ValueError):
                raise MalformedRecord("prediction needs integer start/end", path, lineno) from None
            if not 0 <= start < end <= len(doc.text):
                raise SpanOutOfBounds(doc.doc_id, (start, end), path, lineno)
            strategy = m.get("strategy")
            row.append(
                LinkPrediction(
                    doc.doc_id,
                    Span.from_text(doc.text, start, end),
                    m.get("entity_id"),
                    float(m.get("score", 1.0)),
                    Strategy.parse(strategy) if strategy is not None else None,
                )
            )
        docs.append(doc)
        preds.append(sorted(row, key=lambda p: (p.start, p.end)))
    return docs, preds
