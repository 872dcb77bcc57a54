import json

import pytest
from hypothesis import given, strategies as st

from taxolink.errors import DuplicateId, InvalidTaxonomy, MalformedRecord
from taxolink.taxonomy import (
    EntityRecord,
    Facet,
    Taxonomy,
    ViolationKind,
    entity_text,
    filter_facets,
    load_taxonomy,
    save_taxonomy,
    validate,
)

from conftest import write_jsonl

THREE = [
    {"id": "300010662", "label": "pottery", "facet": "Objects", "description": "objects made of fired clay"},
    {"id": "300011019", "label": "gold", "facet": "Materials"},
    {"id": "300053718", "label": "gilding", "facet": "Activities"},
]


@pytest.fixture
def three(tmp_path):
    return write_jsonl(tmp_path / "kb.jsonl", THREE)


def test_load_three(three):
    t = load_taxonomy(three)
    assert len(t) == 3
    assert {f: len(ids) for f, ids in t.facet_index.items() if ids} == {
        Facet.OBJECTS: 1, Facet.MATERIALS: 1, Facet.ACTIVITIES: 1,
    }
    assert t["300010662"].preferred_label == "pottery"


def test_empty_file(tmp_path):
    p = tmp_path / "kb.jsonl"
    p.write_text("")
    t = load_taxonomy(p)
    assert len(t) == 0 and validate(t) == []


def test_duplicate_id(tmp_path):
    p = write_jsonl(tmp_path / "kb.jsonl", [THREE[0], dict(THREE[0], label="other")])
    with pytest.raises(DuplicateId) as info:
        load_taxonomy(p)
    assert info.value.line == 2


@pytest.mark.parametrize("bad", [{"id": "x", "label": "a"}, {"id": "x", "label": "a", "facet": "Nope"},
                                 {"id": "x", "label": "a", "facet": "Objects", "colour": "red"}])
def test_malformed_records(tmp_path, bad):
    p = write_jsonl(tmp_path / "kb.jsonl", [THREE[0], bad])
    with pytest.raises(MalformedRecord) as info:
        load_taxonomy(p)
    assert info.value.line == 2


def test_malformed_json_line(tmp_path):
    p = tmp_path / "kb.jsonl"
    p.write_text(json.dumps(THREE[0]) + "\n{not json\n")
    with pytest.raises(MalformedRecord):
        load_taxonomy(p)


def test_deterministic_order(three, tmp_path):
    a = load_taxonomy(three)
    p = write_jsonl(tmp_path / "rev.jsonl", THREE[::-1])
    b = load_taxonomy(p)
    assert [e.id for e in a] == [e.id for e in b] == sorted(e["id"] for e in THREE)
    assert a == load_taxonomy(three)


def test_roundtrip(kb, tmp_path):
    save_taxonomy(kb, tmp_path / "out.jsonl")
    assert load_taxonomy(tmp_path / "out.jsonl") == kb


def rec(eid, parent=None, facet=Facet.OBJECTS, label="x"):
    return EntityRecord(eid, label, facet, parent_id=parent)


def kinds(t):
    return sorted(v.kind for v in validate(t))


def test_valid_fixture(kb, three):
    assert validate(kb) == []
    assert validate(load_taxonomy(three)) == []


def test_two_cycle():
    t = Taxonomy.from_records([rec("A", "B"), rec("B", "A")])
    (v,) = validate(t)
    assert v.kind is ViolationKind.CYCLE_DETECTED
    assert set(v.members) == {"A", "B"}


def test_self_loop_and_long_cycle():
    t = Taxonomy.from_records([rec("A", "A"), rec("B", "C"), rec("C", "D"), rec("D", "B"), rec("E", "B")])
    cycles = [set(v.members) for v in validate(t)]
    assert sorted(cycles, key=sorted) == [{"A"}, {"B", "C", "D"}]


def test_cross_facet_and_missing_and_empty():
    t = Taxonomy.from_records([
        rec("A"),
        rec("B", "A", facet=Facet.MATERIALS),
        rec("C", "zzz"),
        rec("D", label="  "),
    ])
    report = {(v.entity_id, v.kind) for v in validate(t)}
    assert report == {
        ("B", ViolationKind.CROSS_FACET_PARENT),
        ("C", ViolationKind.MISSING_PARENT),
        ("D", ViolationKind.EMPTY_LABEL),
    }


def test_load_rejects_invalid(tmp_path):
    p = write_jsonl(tmp_path / "kb.jsonl", [dict(THREE[0], parent_id="nowhere")])
    with pytest.raises(InvalidTaxonomy) as info:
        load_taxonomy(p)
    assert info.value.violations[0].kind is ViolationKind.MISSING_PARENT
    assert len(load_taxonomy(p, check=False)) == 1


@given(st.lists(st.integers(0, 7) | st.none(), min_size=1, max_size=8))
def test_accepted_taxonomies_terminate(parents):
    ents = [rec(str(i), None if p is None else str(p)) for i, p in enumerate(parents)]
    t = Taxonomy.from_records(ents)
    if validate(t):
        return
    for e in t:
        steps, cur = 0, e
        while cur.parent_id is not None:
            cur = t[cur.parent_id]
            steps += 1
            assert steps <= len(t)


def test_filter_objects(three):
    t = filter_facets(load_taxonomy(three), {Facet.OBJECTS})
    assert [e.preferred_label for e in t] == ["pottery"]


def test_filter_all_is_identity(kb):
    assert filter_facets(kb, list(Facet)) == kb


def test_filter_drops_both_materials():
    t = Taxonomy.from_records([rec("m1", facet=Facet.MATERIALS), rec("m2", "m1", facet=Facet.MATERIALS), rec("o")])
    assert [e.id for e in filter_facets(t, ["Objects"])] == ["o"]


@pytest.mark.parametrize("facets", [["Objects"], ["Materials", "Activities"], ["Styles and Periods"]])
def test_filter_idempotent_and_valid(kb, facets):
    once = filter_facets(kb, facets)
    assert filter_facets(once, facets) == once
    assert validate(once) == []


def test_filter_empty_raises(kb):
    with pytest.raises(ValueError):
        filter_facets(kb, [])


@pytest.mark.parametrize(
    "label, desc, expected",
    [
        ("wheel-throwing", "forming pottery on a rotating wheel", "wheel-throwing: forming pottery on a rotating wheel"),
        ("gold", "", "gold: "),
        ("pottery (object genre)", "objects made of fired clay", "pottery (object genre): objects made of fired clay"),
    ],
)
def test_entity_text(label, desc, expected):
    assert entity_text(EntityRecord("1", label, Facet.OBJECTS, description=desc)) == expected


def test_ancestors(kb):
    assert list(kb.ancestors("300043011")) == ["300010662", "300010659"]
