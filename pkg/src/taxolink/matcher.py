"""Dictionary mention detection over taxonomy labels.

Both detectors scan normalized tokens left to right, emit the longest window
that matches some label, and jump past it, so outputs never overlap. The
fuzzy detector accepts a window when its normalized Levenshtein similarity
to a label reaches ``min_similarity``.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from types import MappingProxyType

from .errors import InvalidThreshold
from .text import NormalizedText, normalize, normalize_str, similarity_at_least

__all__ = [
    "LabelIndex",
    "NormalizedText",
    "Span",
    "build_label_index",
    "detect_exact",
    "detect_fuzzy",
    "normalize",
]

DEFAULT_FUZZY_THRESHOLD = 0.85


@dataclass(frozen=True)
class Span:
    start: int
    end: int
    surface: str
    similarity: float = 1.0
    candidate_ids: tuple = ()
    label: str | None = None  # best-matching normalized label

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"empty span ({self.start}, {self.end})")

    @classmethod
    def from_text(cls, text, start, end, **kw):
        return cls(start, end, text[start:end], **kw)

    @property
    def key(self):
        return (self.start, self.end)


@dataclass(frozen=True)
class LabelIndex:
    labels: MappingProxyType  # normalized label -> frozenset of entity ids
    token_counts: MappingProxyType  # normalized label -> number of tokens
    max_tokens: int = 0
    by_length: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))

    def __len__(self):
        return len(self.labels)

    def __contains__(self, label):
        return label in self.labels

    def __reduce__(self):
        return (_label_index, (dict(self.labels), dict(self.token_counts), self.max_tokens, dict(self.by_length)))

    def lookup(self, label):
        return self.labels.get(label, frozenset())

    def near_length(self, n, threshold):
        """Labels whose length could reach ``threshold`` similarity with an n-char string."""
        if threshold >= 1.0:
            return (n,)
        lo = max(1, int(n * threshold) - 1)
        hi = int(n / threshold) + 1 if threshold > 0 else max(self.by_length, default=0)
        return [k for k in range(lo, hi + 1) if k in self.by_length]


def _label_index(labels, counts, max_tokens, by_length):
    return LabelIndex(MappingProxyType(labels), MappingProxyType(counts), max_tokens, MappingProxyType(by_length))


def build_label_index(taxonomy) -> LabelIndex:
    """Index the normalized preferred and alternate labels of every entity."""
    labels = defaultdict(set)
    for ent in taxonomy:
        for raw in ent.labels:
            norm = normalize_str(raw)
            if norm:
                labels[norm].add(ent.id)
    frozen = {k: frozenset(v) for k, v in sorted(labels.items())}
    counts = {k: len(k.split(" ")) for k in frozen}
    by_length = defaultdict(list)
    for k in frozen:
        by_length[len(k)].append(k)
    return LabelIndex(
        labels=MappingProxyType(frozen),
        token_counts=MappingProxyType(counts),
        max_tokens=max(counts.values(), default=0),
        by_length=MappingProxyType({k: tuple(v) for k, v in sorted(by_length.items())}),
    )


def _scan(text, index, match):
    """Leftmost-longest scan; ``match(window) -> (similarity, label, ids) | None``."""
    norm = normalize(text)
    toks = norm.tokens()
    spans = []
    i = 0
    while i < len(toks):
        found = None
        for w in range(min(index.max_tokens, len(toks) - i), 0, -1):
            s, e = toks[i][1], toks[i + w - 1][2]
            hit = match(norm.text[s:e])
            if hit is not None:
                found = (w, s, e, hit)
                break
        if found is None:
            i += 1
            continue
        w, s, e, (sim, label, ids) = found
        start, end = norm.original_span(s, e)
        spans.append(
            Span(start, end, text[start:end], similarity=sim, candidate_ids=tuple(sorted(ids)), label=label)
        )
        i += w
    return spans


def detect_exact(text: str, index: LabelIndex) -> list[Span]:
    """Non-overlapping exact label matches at token boundaries, sorted by start."""

    def match(window):
        ids = index.labels.get(window)
        return None if ids is None else (1.0, window, ids)

    return _scan(text, index, match)


def best_fuzzy_labels(window: str, index: LabelIndex, min_similarity: float):
    """All ``(similarity, label)`` pairs at or above the threshold, best first."""
    if window in index.labels and min_similarity >= 1.0:
        return [(1.0, window)]
    hits = []
    for length in index.near_length(len(window), min_similarity):
        for label in index.by_length.get(length, ()):
            sim = similarity_at_least(window, label, min_similarity)
            if sim is not None:
                hits.append((sim, label))
    hits.sort(key=lambda p: (-p[0], p[1]))
    return hits


def detect_fuzzy(text: str, index: LabelIndex, min_similarity: float = DEFAULT_FUZZY_THRESHOLD) -> list[Span]:
    """Like :func:`detect_exact`, but a window matches any label within ``min_similarity``.

    At each start position the widest accepted window wins; the emitted span
    carries the best label similarity and the ids of every label reaching it.
    """
    if not (0.0 < min_similarity <= 1.0):
        raise InvalidThreshold(f"min_similarity must be in (0, 1], got {min_similarity}")

    def match(window):
        hits = best_fuzzy_labels(window, index, min_similarity)
        if not hits:
            return None
        best_sim, best_label = hits[0]
        ids = set()
        for sim, label in hits:
            if sim == best_sim:
                ids |= index.labels[label]
        return best_sim, best_label, ids

    return _scan(text, index, match)
