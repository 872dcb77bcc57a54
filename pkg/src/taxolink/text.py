"""Text normalization with an offset map, plus edit-distance helpers.

Normalization rules, applied in this order:

1. Unicode NFKC, then case folding.
2. Every punctuation character (Unicode category ``P*``) becomes a space,
   except a hyphen or apostrophe sitting between two alphanumeric characters.
3. Runs of whitespace collapse to one space; leading/trailing space is dropped.

Every normalized character remembers the half-open range of original
characters it came from, so spans found in normalized text can be mapped back.
"""
from __future__ import annotations

import unicodedata
from dataclasses import dataclass

HYPHENS = frozenset("-‐‑")
APOSTROPHES = frozenset("'’")


@dataclass(frozen=True)
class NormalizedText:
    text: str
    starts: tuple  # original start offset for each normalized char
    ends: tuple  # original (exclusive) end offset for each normalized char

    def __len__(self):
        return len(self.text)

    def original_span(self, start, end):
        """Map a normalized half-open range back to original offsets."""
        if not 0 <= start < end <= len(self.text):
            raise ValueError(f"bad normalized range ({start}, {end})")
        return self.starts[start], self.ends[end - 1]

    def tokens(self):
        """Return ``(token, start, end)`` triples in normalized coordinates."""
        out = []
        pos = 0
        for tok in self.text.split(" "):
            if tok:
                out.append((tok, pos, pos + len(tok)))
            pos += len(tok) + 1
        return out


def _chunks(text):
    # A base character plus trailing combining marks is normalized as a unit,
    # so composition under NFKC sees the whole cluster.
    i = 0
    n = len(text)
    while i < n:
        j = i + 1
        while j < n and unicodedata.combining(text[j]):
            j += 1
        yield i, j
        i = j


def normalize(text: str) -> NormalizedText:
    chars = []
    starts = []
    ends = []
    for i, j in _chunks(text):
        piece = unicodedata.normalize("NFKC", text[i:j]).casefold()
        for ch in piece:
            chars.append(ch)
            starts.append(i)
            ends.append(j)

    # Punctuation pass; internal hyphens/apostrophes survive.
    n = len(chars)
    mapped = []
    for k, ch in enumerate(chars):
        if ch.isspace():
            mapped.append(" ")
        elif unicodedata.category(ch).startswith("P"):
            internal = (
                (ch in HYPHENS or ch in APOSTROPHES)
                and 0 < k < n - 1
                and chars[k - 1].isalnum()
                and chars[k + 1].isalnum()
            )
            if not internal:
                mapped.append(" ")
            elif ch in HYPHENS:
                mapped.append("-")
            else:
                mapped.append("'")
        else:
            mapped.append(ch)

    out_chars = []
    out_starts = []
    out_ends = []
    for ch, s, e in zip(mapped, starts, ends):
        if ch == " " and (not out_chars or out_chars[-1] == " "):
            continue
        out_chars.append(ch)
        out_starts.append(s)
        out_ends.append(e)
    if out_chars and out_chars[-1] == " ":
        out_chars.pop()
        out_starts.pop()
        out_ends.pop()
    return NormalizedText("".join(out_chars), tuple(out_starts), tuple(out_ends))


def normalize_str(text: str) -> str:
    """Normalized string only, without the offset map."""
    return normalize(text).text


def tokenize(text: str) -> list[str]:
    return [t for t in normalize(text).text.split(" ") if t]


def levenshtein(a: str, b: str, max_dist: int | None = None) -> int:
    """Unit-cost edit distance.

    With ``max_dist`` set, returns ``max_dist + 1`` as soon as the distance is
    known to exceed it.
    """
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    if max_dist is not None and len(a) - len(b) > max_dist:
        return max_dist + 1
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        best = i
        for j, cb in enumerate(b, 1):
            v = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb))
            cur.append(v)
            if v < best:
                best = v
        if max_dist is not None and best > max_dist:
            return max_dist + 1
        prev = cur
    return prev[-1]


def similarity(a: str, b: str) -> float:
    """Normalized Levenshtein similarity ``1 - dist / max(len)``; 1.0 for two empties."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


def similarity_at_least(a: str, b: str, threshold: float):
    """Return the similarity if it reaches ``threshold``, else None (with early exit)."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    # Largest distance d with 1 - d/longest >= threshold; the epsilon guards
    # against 1 - threshold being a hair under an exact ratio in floating point.
    budget = int((1.0 - threshold) * longest + 1e-9)
    if abs(len(a) - len(b)) > budget:
        return None
    d = levenshtein(a, b, max_dist=budget)
    if d > budget:
        return None
    sim = 1.0 - d / longest
    return sim if sim >= threshold else None
