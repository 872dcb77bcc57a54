"""AAT-style controlled vocabulary: records, loading, validation, facet filtering."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

from .errors import DuplicateId, InvalidTaxonomy, MalformedRecord
from .text import normalize_str


class Facet(str, enum.Enum):
    OBJECTS = "Objects"
    MATERIALS = "Materials"
    STYLES_AND_PERIODS = "StylesAndPeriods"
    ACTIVITIES = "Activities"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).replace(" ", "").replace("&", "And").replace("_", "").lower()
        for member in cls:
            if member.value.lower() == key or member.name.replace("_", "").lower() == key:
                return member
        raise ValueError(f"unknown facet {value!r}")


ALL_FACETS = frozenset(Facet)


@dataclass(frozen=True)
class EntityRecord:
    id: str
    preferred_label: str
    facet: Facet
    alt_labels: tuple = ()
    parent_id: str | None = None
    description: str = ""

    @property
    def labels(self):
        return (self.preferred_label,) + tuple(self.alt_labels)


def entity_text(entity: EntityRecord) -> str:
    """Text embedded for an entity: its preferred label and scope note."""
    return f"{entity.preferred_label}: {entity.description}"


class ViolationKind(str, enum.Enum):
    MISSING_PARENT = "MissingParent"
    CYCLE_DETECTED = "CycleDetected"
    CROSS_FACET_PARENT = "CrossFacetParent"
    EMPTY_LABEL = "EmptyLabel"


@dataclass(frozen=True)
class Violation:
    entity_id: str
    kind: ViolationKind
    detail: str = ""
    members: tuple = ()

    def to_dict(self):
        d = {"entity_id": self.entity_id, "kind": self.kind.value, "detail": self.detail}
        if self.members:
            d["members"] = list(self.members)
        return d


@dataclass(frozen=True)
class Taxonomy:
    """Immutable id-keyed entity collection; iteration is in sorted id order."""

    entities: Mapping[str, EntityRecord] = field(default_factory=dict)
    facet_index: Mapping[Facet, frozenset] = field(init=False)

    def __post_init__(self):
        ordered = {k: self.entities[k] for k in sorted(self.entities)}
        for key, ent in ordered.items():
            if key != ent.id:
                raise ValueError(f"entity stored under {key!r} has id {ent.id!r}")
        index = {}
        for ent in ordered.values():
            index.setdefault(ent.facet, set()).add(ent.id)
        object.__setattr__(self, "entities", MappingProxyType(ordered))
        object.__setattr__(
            self, "facet_index", MappingProxyType({f: frozenset(ids) for f, ids in index.items()})
        )

    def __reduce__(self):
        return (Taxonomy, (dict(self.entities),))

    @classmethod
    def from_records(cls, records: Iterable[EntityRecord]):
        entities = {}
        for rec in records:
            if rec.id in entities:
                raise DuplicateId(rec.id)
            entities[rec.id] = rec
        return cls(entities)

    def __len__(self):
        return len(self.entities)

    def __iter__(self):
        return iter(self.entities.values())

    def __contains__(self, entity_id):
        return entity_id in self.entities

    def __getitem__(self, entity_id) -> EntityRecord:
        return self.entities[entity_id]

    def get(self, entity_id, default=None):
        return self.entities.get(entity_id, default)

    def ancestors(self, entity_id):
        """Parent chain from ``entity_id`` upward (excluding itself); stops on cycles."""
        seen = {entity_id}
        out = []
        cur = self.entities[entity_id].parent_id
        while cur is not None and cur in self.entities and cur not in seen:
            out.append(cur)
            seen.add(cur)
            cur = self.entities[cur].parent_id
        return out


_KB_KEYS = {"id", "label", "alt_labels", "facet", "parent_id", "description"}
_KB_REQUIRED = {"id", "label", "facet"}


def parse_entity(obj, path=None, line=None) -> EntityRecord:
    if not isinstance(obj, dict):
        raise MalformedRecord("expected a JSON object", path, line)
    unknown = set(obj) - _KB_KEYS
    if unknown:
        raise MalformedRecord(f"unknown key(s): {', '.join(sorted(unknown))}", path, line)
    missing = _KB_REQUIRED - set(obj)
    if missing:
        raise MalformedRecord(f"missing key(s): {', '.join(sorted(missing))}", path, line)
    eid = obj["id"]
    if not isinstance(eid, str) or not eid:
        raise MalformedRecord("'id' must be a non-empty string", path, line)
    label = obj["label"]
    if not isinstance(label, str):
        raise MalformedRecord("'label' must be a string", path, line)
    alts = obj.get("alt_labels", [])
    if not isinstance(alts, list) or not all(isinstance(a, str) for a in alts):
        raise MalformedRecord("'alt_labels' must be a list of strings", path, line)
    parent = obj.get("parent_id")
    if parent is not None and (not isinstance(parent, str) or not parent):
        raise MalformedRecord("'parent_id' must be a non-empty string or null", path, line)
    desc = obj.get("description", "")
    if not isinstance(desc, str):
        raise MalformedRecord("'description' must be a string", path, line)
    try:
        facet = Facet(obj["facet"])
    except ValueError:
        raise MalformedRecord(f"unknown facet {obj['facet']!r}", path, line) from None
    return EntityRecord(
        id=eid,
        preferred_label=label,
        facet=facet,
        alt_labels=tuple(alts),
        parent_id=parent,
        description=desc,
    )


def entity_to_dict(entity: EntityRecord) -> dict:
    d = {"id": entity.id, "label": entity.preferred_label}
    if entity.alt_labels:
        d["alt_labels"] = list(entity.alt_labels)
    d["facet"] = entity.facet.value
    if entity.parent_id is not None:
        d["parent_id"] = entity.parent_id
    d["description"] = entity.description
    return d


def load_taxonomy(path, check=True) -> Taxonomy:
    """Read a KB JSONL file (one entity per line).

    With ``check`` (the default) the result must pass :func:`validate`;
    otherwise :class:`InvalidTaxonomy` is raised. Blank lines are skipped.
    """
    path = Path(path)
    entities = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(f"invalid JSON ({exc.msg})", path, lineno) from None
            rec = parse_entity(obj, path, lineno)
            if rec.id in entities:
                raise DuplicateId(rec.id, path, lineno)
            entities[rec.id] = rec
    tax = Taxonomy(entities)
    if check:
        violations = validate(tax)
        if violations:
            raise InvalidTaxonomy(violations)
    return tax


def save_taxonomy(taxonomy: Taxonomy, path):
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for ent in taxonomy:
            fh.write(json.dumps(entity_to_dict(ent), ensure_ascii=False) + "\n")


def validate(taxonomy: Taxonomy) -> list[Violation]:
    """List every invariant violation; an empty list means the taxonomy is valid."""
    ents = taxonomy.entities
    report = []
    for ent in ents.values():
        if not normalize_str(ent.preferred_label):
            report.append(Violation(ent.id, ViolationKind.EMPTY_LABEL, "preferred label is empty"))
        if ent.parent_id is None:
            continue
        parent = ents.get(ent.parent_id)
        if parent is None:
            report.append(
                Violation(ent.id, ViolationKind.MISSING_PARENT, f"parent {ent.parent_id!r} not found")
            )
        elif parent.facet != ent.facet:
            report.append(
                Violation(
                    ent.id,
                    ViolationKind.CROSS_FACET_PARENT,
                    f"parent {parent.id!r} is in {parent.facet.value}, entity in {ent.facet.value}",
                )
            )

    # Cycle search over parent pointers; each node has out-degree <= 1.
    state = {}  # id -> 1 while on the current walk, 2 when finished
    for start in ents:
        if start in state:
            continue
        walk = []
        cur = start
        while cur is not None and cur in ents and cur not in state:
            state[cur] = 1
            walk.append(cur)
            cur = ents[cur].parent_id
        if cur is not None and state.get(cur) == 1:
            cycle = walk[walk.index(cur):]
            members = tuple(sorted(cycle))
            report.append(
                Violation(
                    members[0],
                    ViolationKind.CYCLE_DETECTED,
                    "parent chain loops through " + " -> ".join(cycle + [cur]),
                    members,
                )
            )
        for node in walk:
            state[node] = 2
    return report


def filter_facets(taxonomy: Taxonomy, facets) -> Taxonomy:
    """Keep entities in ``facets``; parent links leaving the kept set are dropped."""
    facets = {Facet.parse(f) for f in facets}
    if not facets:
        raise ValueError("facets must be non-empty")
    kept = {eid: e for eid, e in taxonomy.entities.items() if e.facet in facets}
    out = {}
    for eid, ent in kept.items():
        if ent.parent_id is not None and ent.parent_id not in kept:
            ent = replace(ent, parent_id=None)
        out[eid] = ent
    return Taxonomy(out)
