"""Lexical TF-IDF embeddings, vector files, and exact brute-force KNN.

Vectors are plain 1-D float64 numpy arrays. Text goes through the same
normalization as the matcher and is split on spaces into unigrams.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .errors import DimensionMismatch, EmptyCorpus, MalformedFloat, MalformedRecord
from .text import tokenize


@dataclass(frozen=True)
class IdfModel:
    vocabulary: Mapping[str, int]
    idf: np.ndarray

    @property
    def dim(self):
        return len(self.vocabulary)


def fit_tfidf(texts: Iterable) -> IdfModel:
    """Fit smoothed IDF weights, ``ln((1 + N) / (1 + df)) + 1``.

    ``texts`` holds ``(id, text)`` pairs or bare strings. The vocabulary is
    ordered by first occurrence.
    """
    texts = [t[1] if isinstance(t, tuple) else t for t in texts]
    if not texts:
        raise EmptyCorpus("cannot fit TF-IDF on an empty corpus")
    vocab = {}
    df = []
    for text in texts:
        seen = set()
        for tok in tokenize(text):
            if tok not in vocab:
                vocab[tok] = len(vocab)
                df.append(0)
            if tok not in seen:
                seen.add(tok)
                df[vocab[tok]] += 1
    n = len(texts)
    idf = np.array([math.log((1 + n) / (1 + d)) + 1.0 for d in df], dtype=np.float64)
    return IdfModel(vocab, idf)


def embed(model: IdfModel, text: str) -> np.ndarray:
    """L2-normalized tf*idf vector; the zero vector when nothing is in vocabulary."""
    vec = np.zeros(model.dim, dtype=np.float64)
    for tok in tokenize(text):
        j = model.vocabulary.get(tok)
        if j is not None:
            vec[j] += 1.0
    vec *= model.idf
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"vector shapes differ: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    value = float(np.dot(a, b)) / (na * nb)
    return min(1.0, max(-1.0, value))


class VectorStore:
    """Entity id -> vector mapping with a shared dimension."""

    def __init__(self, ids: Sequence[str], matrix):
        matrix = np.asarray(matrix, dtype=np.float64)
        ids = list(ids)
        if matrix.ndim != 2:
            if matrix.size == 0 and not ids:
                matrix = matrix.reshape(0, 0)
            else:
                raise DimensionMismatch("vector matrix must be 2-D")
        if matrix.shape[0] != len(ids):
            raise DimensionMismatch(f"{len(ids)} ids but {matrix.shape[0]} vectors")
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate ids in vector store")
        self.ids = ids
        self.matrix = matrix
        self._pos = {eid: i for i, eid in enumerate(ids)}
        self._norms = np.linalg.norm(matrix, axis=1) if matrix.size else np.zeros(len(ids))

    @classmethod
    def from_mapping(cls, vectors: Mapping, dim: int | None = None):
        ids = list(vectors)
        if not ids:
            return cls([], np.zeros((0, dim or 0)))
        return cls(ids, np.vstack([np.asarray(vectors[i], dtype=np.float64) for i in ids]))

    @property
    def dim(self):
        return self.matrix.shape[1]

    def __len__(self):
        return len(self.ids)

    def __contains__(self, entity_id):
        return entity_id in self._pos

    def __getitem__(self, entity_id):
        return self.matrix[self._pos[entity_id]]

    def items(self):
        return ((eid, self.matrix[i]) for i, eid in enumerate(self.ids))

    def scores(self, query):
        """Cosine of ``query`` against every stored vector, in store order."""
        query = np.asarray(query, dtype=np.float64)
        if query.shape != (self.dim,):
            raise DimensionMismatch(f"query has shape {query.shape}, store dim is {self.dim}")
        qn = float(np.linalg.norm(query))
        out = np.zeros(len(self.ids))
        if qn == 0.0 or not len(self.ids):
            return out
        ok = self._norms > 0
        out[ok] = (self.matrix[ok] @ query) / (self._norms[ok] * qn)
        return np.clip(out, -1.0, 1.0)


TIE_DECIMALS = 12


def tie_key(score):
    return round(float(score), TIE_DECIMALS)


def knn(store: VectorStore, query, k: int) -> list[tuple[str, float]]:
    """Exact top-k by cosine; ties go to the smaller entity id.

    Scores equal to ``TIE_DECIMALS`` places count as tied, so rounding noise
    (e.g. a vector and a scaled copy of it) cannot reorder equal candidates.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = store.scores(query)
    order = sorted(range(len(store.ids)), key=lambda i: (-tie_key(scores[i]), store.ids[i]))
    return [(store.ids[i], float(scores[i])) for i in order[:k]]


def save_vectors(store: VectorStore, path):
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"#dim={store.dim}\n")
        for eid, vec in store.items():
            fh.write(eid + "\t" + " ".join(repr(float(x)) for x in vec) + "\n")


def load_vectors(path) -> VectorStore:
    """Read a vector TSV: ``#dim=<d>`` header, then ``id<TAB>v1 ... vd`` rows."""
    path = Path(path)
    ids = []
    seen = set()
    rows = []
    dim = None
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if lineno == 1:
                if not line.startswith("#dim="):
                    raise MalformedRecord("first line must be '#dim=<d>'", path, lineno)
                try:
                    dim = int(line[5:])
                except ValueError:
                    raise MalformedRecord(f"bad dimension header {line!r}", path, lineno) from None
                continue
            if not line:
                continue
            eid, sep, values = line.partition("\t")
            if not sep or not eid:
                raise MalformedRecord("expected 'id<TAB>values'", path, lineno)
            parts = values.split()
            if len(parts) != dim:
                raise DimensionMismatch(f"expected {dim} values, got {len(parts)}", path, lineno)
            try:
                vec = [float(p) for p in parts]
            except ValueError:
                raise MalformedFloat("could not parse float", path, lineno) from None
            if eid in seen:
                raise MalformedRecord(f"duplicate id {eid!r}", path, lineno)
            seen.add(eid)
            ids.append(eid)
            rows.append(vec)
    if dim is None:
        raise MalformedRecord("missing '#dim=' header", path, 1)
    matrix = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
    return VectorStore(ids, matrix)


class TfidfEmbedder(TransformerMixin, BaseEstimator):
    """Estimator wrapper: ``fit`` learns IDF weights, ``transform`` embeds texts row-wise."""

    def fit(self, X, y=None):
        self.model_ = fit_tfidf(list(X))
        self.vocabulary_ = dict(self.model_.vocabulary)
        self.idf_ = self.model_.idf
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        rows = [embed(self.model_, t) for t in X]
        if not rows:
            return np.zeros((0, self.model_.dim))
        return np.vstack(rows)

    def embed_one(self, text):
        check_is_fitted(self, "model_")
        return embed(self.model_, text)
