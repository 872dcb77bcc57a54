import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from taxolink.embeddings import (
    TfidfEmbedder,
    VectorStore,
    cosine,
    embed,
    fit_tfidf,
    knn,
    load_vectors,
    save_vectors,
    tie_key,
)
from taxolink.errors import DimensionMismatch, EmptyCorpus, MalformedFloat, MalformedRecord

from oracles import dense_cos, sparse_cos, tfidf_vectors


def idf_of(model, tok):
    return model.idf[model.vocabulary[tok]]


def test_idf_values():
    m = fit_tfidf(["gold leaf", "gold wire"])
    assert idf_of(m, "gold") == pytest.approx(1.0)
    assert idf_of(m, "leaf") == pytest.approx(math.log(1.5) + 1)
    assert idf_of(m, "leaf") == pytest.approx(1.4055, abs=1e-4)
    single = fit_tfidf(["a b c b"])
    assert list(single.idf) == [1.0, 1.0, 1.0]


def test_vocabulary_first_occurrence():
    m = fit_tfidf([("e2", "clay pot"), ("e1", "pot gold")])
    assert list(m.vocabulary) == ["clay", "pot", "gold"]


def test_empty_corpus():
    with pytest.raises(EmptyCorpus):
        fit_tfidf([])


def test_embed_self_and_disjoint():
    m = fit_tfidf(["fired clay vessel", "gold wire"])
    v = embed(m, "fired clay vessel")
    assert cosine(v, v) == pytest.approx(1.0)
    assert cosine(embed(m, "gold"), embed(m, "clay")) == 0.0
    assert not embed(m, "").any() and not embed(m, "unknown words").any()


def test_fired_clay_ranking():
    texts = ["pottery: objects made of fired clay", "goldsmithing: working gold"]
    m = fit_tfidf(texts)
    q = embed(m, "fired clay object")
    a, b = (cosine(q, embed(m, t)) for t in texts)
    assert a > b
    # frozen from the pure-Python oracle in tests/oracles.py
    assert a == pytest.approx(0.577350269189626, abs=1e-12)
    assert b == 0.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.sampled_from("abcdefg"), min_size=1, max_size=6), min_size=1, max_size=6),
       st.lists(st.sampled_from("abcdefgh"), max_size=6))
def test_embed_matches_oracle(corpus, query):
    texts = [" ".join(t) for t in corpus]
    m = fit_tfidf(texts)
    idf, cvecs, (qv,) = tfidf_vectors(corpus, [query])
    for tok, val in idf.items():
        assert idf_of(m, tok) == pytest.approx(val)
    e = embed(m, " ".join(query))
    for t, cv in zip(texts, cvecs):
        assert cosine(e, embed(m, t)) == pytest.approx(sparse_cos(qv, cv), abs=1e-12)
    norm = np.linalg.norm(e)
    assert norm == 0 or abs(norm - 1) < 1e-6


@pytest.mark.parametrize("a, b, expected", [
    ([1, 0], [1, 0], 1.0), ([1, 0], [0, 1], 0.0), ([0.6, 0.8], [0.8, 0.6], 0.96), ([0, 0], [1, 2], 0.0),
])
def test_cosine_examples(a, b, expected):
    assert cosine(a, b) == pytest.approx(expected)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_cosine_symmetric(a, b):
    assert cosine(a, b) == cosine(b, a)


def test_cosine_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        cosine([1, 0], [1, 0, 0])


def test_tsv_roundtrip(tmp_path):
    store = VectorStore(["a", "b"], [[0.1, 0.2, 0.3, 1 / 3], [0, 0, 0, 1e-300]])
    save_vectors(store, tmp_path / "v.tsv")
    back = load_vectors(tmp_path / "v.tsv")
    assert len(back) == 2 and back.dim == 4
    assert np.array_equal(back.matrix, store.matrix)


@pytest.mark.parametrize("body, exc, line", [
    ("#dim=4\na\t1 2 3\n", DimensionMismatch, 2),
    ("#dim=2\na\t1 2\nb\t1 x\n", MalformedFloat, 3),
    ("#dim=2\na\t1 2\na\t3 4\n", MalformedRecord, 3),
    ("a\t1 2\n", MalformedRecord, 1),
    ("#dim=2\nno-tab-here\n", MalformedRecord, 2),
])
def test_tsv_errors(tmp_path, body, exc, line):
    p = tmp_path / "v.tsv"
    p.write_text(body)
    with pytest.raises(exc) as info:
        load_vectors(p)
    assert info.value.line == line


def random_store(rng, n, dim, dupes=True):
    vecs = []
    for _ in range(n):
        if dupes and vecs and rng.random() < 0.3:
            base = rng.choice(vecs)
            vecs.append([x * rng.choice([1, 2, 0.5]) for x in base])
        else:
            vecs.append([rng.randint(-3, 3) for _ in range(dim)])
    ids = [f"e{rng.randrange(10**6):06d}" for _ in range(n)]
    ids = list(dict.fromkeys(ids))
    return list(zip(ids, vecs))


def oracle_ranking(items, query, k):
    scored = [(eid, dense_cos(v, query)) for eid, v in items]
    scored.sort(key=lambda p: (-tie_key(p[1]), p[0]))
    return scored[:k]


def test_knn_full_ranking_and_self_hit():
    items = [("b", [1, 0]), ("a", [1, 0]), ("c", [0, 1])]
    store = VectorStore.from_mapping(dict(items))
    assert [i for i, _ in knn(store, [1, 0], 10)] == ["a", "b", "c"]
    eid, score = knn(store, [0, 3], 1)[0]
    assert eid == "c" and score == pytest.approx(1.0)


def test_knn_random_20_k5():
    rng = random.Random(11)
    items = random_store(rng, 20, 6)
    store = VectorStore.from_mapping(dict(items))
    q = [rng.randint(-3, 3) for _ in range(6)]
    got = knn(store, q, 5)
    want = oracle_ranking(items, q, 5)
    assert [g[0] for g in got] == [w[0] for w in want]
    assert [g[1] for g in got] == pytest.approx([w[1] for w in want])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 30))
def test_knn_prefix(seed, k):
    rng = random.Random(seed)
    items = random_store(rng, 25, 4)
    store = VectorStore.from_mapping(dict(items))
    q = [rng.randint(-3, 3) for _ in range(4)]
    assert knn(store, q, k) == knn(store, q, k + 1)[:k]


def test_knn_dim_mismatch():
    store = VectorStore.from_mapping({"a": [1.0, 0.0]})
    with pytest.raises(DimensionMismatch):
        knn(store, [1.0, 0.0, 0.0], 1)


def test_store_rejects_duplicates():
    with pytest.raises(ValueError):
        VectorStore(["a", "a"], [[1.0], [2.0]])


def test_estimator_wrapper():
    emb = TfidfEmbedder().fit(["a b", "b c"])
    X = emb.transform(["a", "c b", ""])
    assert X.shape == (3, 3)
    assert np.allclose(np.linalg.norm(X[:2], axis=1), 1.0)
    assert emb.get_params() == {}
    assert np.array_equal(emb.embed_one("a"), X[0])
