import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from taxolink.corpus import AnnotatedDocument, Document, FieldType, MentionAnnotation, Partition
from taxolink.errors import UnknownDocId
from taxolink.evaluation import (
    MetricsReport,
    eval_disambiguation,
    eval_end_to_end,
    eval_mention_detection,
    evaluate_all,
    format_tables,
    rater_agreement,
    reports_to_json,
)

from oracles import e2e_oracle, ed_oracle, md_oracle, prf

A, B, C = (0, 3, "x"), (4, 7, "y"), (8, 11, "z")


def counts(r):
    return r.true_positives, r.false_positives, r.false_negatives


def test_identity():
    g = {"d": [A, B, C]}
    for fn in (eval_mention_detection, eval_end_to_end):
        r = fn(g, g)
        assert (r.precision, r.recall, r.f1) == (1.0, 1.0, 1.0)
    assert eval_disambiguation(g, g).precision == 1.0


def test_boundary_off_by_one():
    r = eval_mention_detection({"d": [(0, 12, "x")]}, {"d": [(0, 13, "x")]})
    assert counts(r) == (0, 1, 1)


def test_ab_vs_bc():
    r = eval_mention_detection({"d": [A, B]}, {"d": [B, C]})
    assert counts(r) == (1, 1, 1)
    assert (r.precision, r.recall, r.f1) == (0.5, 0.5, 0.5)


def test_ed_examples():
    gold = {"d": [A, B, C]}
    assert eval_disambiguation({"d": [(0, 3, None), (4, 7, None)]}, gold).precision == 0.0
    r = eval_disambiguation({"d": [A, B, (8, 11, "q"), (20, 22, "x")]}, gold)
    assert r.precision == pytest.approx(2 / 3)
    assert counts(r) == (2, 1, 1)


def test_ed_breakdowns():
    gold = {"d": [A, B, C]}
    part = {("d", 0, 3): Partition.SEEN, ("d", 4, 7): Partition.SEEN, ("d", 8, 11): Partition.UNSEEN}
    r = eval_disambiguation({"d": [A, (4, 7, "q"), (8, 11, None)]}, gold, part)
    assert r.breakdowns["All"] == pytest.approx(1 / 3)
    assert r.breakdowns["Seen"] == 0.5 and r.breakdowns["Unseen"] == 0.0
    assert r.breakdowns["Seen_count"] == 2


def test_e2e_examples():
    assert counts(eval_end_to_end({"d": [(0, 3, "q")]}, {"d": [A]})) == (0, 1, 1)
    gold = {"d": [A, B, C], "e": [(0, 2, "u"), (3, 5, "v")]}
    pred = {"d": [A, B, (8, 11, "wrong")], "e": [(0, 2, "u")]}
    r = eval_end_to_end(pred, gold)
    assert counts(r) == (3, 1, 2)
    assert r.precision == 0.75 and r.recall == 0.6
    assert r.f1 == pytest.approx(2 / 3, abs=1e-3)


def test_e2e_abstentions():
    gold = {"d": [A]}
    # abstaining on a gold span is a miss only; on a non-gold span also a false positive
    assert counts(eval_end_to_end({"d": [(0, 3, None)]}, gold)) == (0, 0, 1)
    assert counts(eval_end_to_end({"d": [(5, 9, None)]}, gold)) == (0, 1, 1)


def test_unknown_doc():
    with pytest.raises(UnknownDocId):
        eval_mention_detection({"nope": [A]}, {"d": [A]})


def test_zero_denominators():
    r = MetricsReport.from_counts(0, 0, 0)
    assert (r.precision, r.recall, r.f1) == (0.0, 0.0, 0.0)
    assert eval_mention_detection({}, {}).f1 == 0.0


def random_fixture(rng, with_abstain=True):
    gold, pred = {}, {}
    ents = ["a", "b", "c"]
    for d in range(rng.randint(1, 10)):
        did = f"d{d}"
        pool = [(s, s + rng.randint(1, 3)) for s in range(0, 24, 3)]
        g = [(s, e, rng.choice(ents)) for s, e in rng.sample(pool, rng.randint(0, 8))]
        gold[did] = g
        if rng.random() < 0.2:
            continue
        p = []
        for _ in range(rng.randint(0, 8)):
            roll = rng.random()
            if g and roll < 0.5:
                s, e, eid = rng.choice(g)
                if rng.random() < 0.3:
                    eid = rng.choice(ents)
            else:
                s, e = rng.choice(pool)
                eid = rng.choice(ents)
            if with_abstain and rng.random() < 0.15:
                eid = None
            p.append((s, e, eid))
        pred[did] = p
    return pred, gold


def test_random_fixtures_match_oracle():
    rng = random.Random(2024)
    for _ in range(300):
        pred, gold = random_fixture(rng)
        assert counts(eval_mention_detection(pred, gold)) == md_oracle(pred, gold)
        assert counts(eval_end_to_end(pred, gold)) == e2e_oracle(pred, gold)
        correct, total = ed_oracle(pred, gold)
        r = eval_disambiguation(pred, gold)
        assert (r.true_positives, r.true_positives + r.false_positives) == (correct, total)
        assert r.precision == pytest.approx(prf(correct, total - correct, 0)[0])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**9))
def test_metric_properties(seed):
    rng = random.Random(seed)
    pred, gold = random_fixture(rng, with_abstain=False)
    md, e2e = eval_mention_detection(pred, gold), eval_end_to_end(pred, gold)
    assert e2e.true_positives <= md.true_positives
    for r in (md, e2e):
        assert (r.f1 == 0) == (r.true_positives == 0)
    # permutation invariance
    shuffled = {d: rng.sample(rows, len(rows)) for d, rows in reversed(list(pred.items()))}
    assert evaluate_all(shuffled, gold) == evaluate_all(pred, gold)
    # swapping pred and gold swaps precision and recall
    full_pred = {d: pred.get(d, []) for d in gold}
    for fn in (eval_mention_detection, eval_end_to_end):
        a, b = fn(full_pred, gold), fn(gold, full_pred)
        assert (a.precision, a.recall) == (b.recall, b.precision)


def annotated(rows, text="abc def ghi jkl mno"):
    return AnnotatedDocument(Document("d", FieldType.DESCRIPTION, text), tuple(MentionAnnotation(*r) for r in rows))


def test_rater_identical():
    cons = [annotated([A, B, C])]
    rep = rater_agreement({"r1": cons}, cons)
    assert set(rep.per_rater["r1"].values()) == {1.0}
    assert all(b["upper"] == b["median"] == b["lower"] == 1.0 for b in rep.bounds.values())


def test_rater_missing_mention():
    cons = [annotated([A, B, C])]
    m = rater_agreement({"r": [annotated([A, B])]}, cons).per_rater["r"]
    assert m["md_precision"] == 1.0 and m["md_recall"] < 1.0


def test_rater_planted_disagreements():
    cons = [annotated([A, B, C])]
    raters = {
        "r1": [annotated([A, B, C])],
        "r2": [annotated([A, (4, 7, "wrong")])],
        "r3": [annotated([(0, 2, "x"), B, C, (12, 15, "w")])],
    }
    rep = rater_agreement(raters, cons)
    f_r3 = 2 * 0.5 * (2 / 3) / (0.5 + 2 / 3)
    expected = {
        "md_precision": (1.0, 1.0, 0.5),
        "md_recall": (1.0, 2 / 3, 2 / 3),
        "md_f1": (1.0, 0.8, f_r3),
        "ed_precision": (1.0, 1.0, 0.5),
        "e2e_precision": (1.0, 0.5, 0.5),
        "e2e_recall": (1.0, 2 / 3, 1 / 3),
        "e2e_f1": (1.0, f_r3, 0.4),
    }
    for metric, (hi, med, lo) in expected.items():
        b = rep.bounds[metric]
        assert (b["upper"], b["median"], b["lower"]) == pytest.approx((hi, med, lo)), metric
    json.dumps(rep.to_dict())


def test_rater_needs_raters():
    with pytest.raises(ValueError):
        rater_agreement({}, [])


def test_tables_and_json():
    g = {"d": [A, B]}
    part = {("d", 0, 3): Partition.SEEN, ("d", 4, 7): Partition.UNSEEN}
    systems = {"mine": evaluate_all({"d": [A]}, g, part)}
    text = format_tables(systems)
    assert "Mention detection" in text and "Unseen" in text
    assert "mine" in text and "100.0" in text and "50.0" in text
    data = json.loads(reports_to_json(systems))
    assert data["mine"]["md"]["recall"] == 0.5
    assert data["mine"]["ed"]["breakdowns"]["Seen"] == 1.0
