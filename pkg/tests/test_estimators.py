import pickle

import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from taxolink import EntityLinker, MemorizationLinker, MentionDetector, TfidfEmbedder
from taxolink.corpus import Document, FieldType


def test_detector(kb):
    det = MentionDetector(kb).fit()
    (spans,) = det.predict(["Plain weave, tapestry, dyed"])
    assert [(s.start, s.end) for s in spans] == [(0, 11), (13, 21)]
    fuzzy = MentionDetector(kb, mode="fuzzy", min_similarity=0.5).fit()
    # leftmost-longest: a longer window above threshold beats a shorter exact one
    assert [(s.start, s.end) for s in fuzzy.predict(["Plain weave, tapestry, dyed"])[0]] == [(0, 11), (13, 27)]
    assert det.get_params() == {"taxonomy": kb, "mode": "exact", "min_similarity": 0.85}


def test_detector_validation(kb):
    with pytest.raises(ValueError):
        MentionDetector(kb, min_similarity=0).fit()
    with pytest.raises(ValueError):
        MentionDetector(None).fit()
    with pytest.raises(NotFittedError):
        MentionDetector(kb).predict(["x"])
    with pytest.raises(TypeError):
        MentionDetector(kb).fit().predict("a bare string")
    with pytest.raises(TypeError):
        MentionDetector(kb).fit().predict([42])


def test_memorization_estimator(train, test_docs):
    est = MemorizationLinker().fit(train)
    assert 0.0 <= est.score(test_docs) <= 1.0
    assert est.score(train) > 0.8
    with pytest.raises(TypeError):
        MemorizationLinker().fit([Document("d", FieldType.TITLE, "x")])


def test_clone_and_pickle(kb, train, test_docs):
    for est in (EntityLinker(kb, strategy="memorization"), MentionDetector(kb), TfidfEmbedder(), MemorizationLinker()):
        c = clone(est)
        assert c.get_params().keys() == est.get_params().keys()
    fitted = EntityLinker(kb, strategy="memorization").fit(train)
    again = pickle.loads(pickle.dumps(fitted))
    assert again.predict(test_docs) == fitted.predict(test_docs)


def test_linker_accepts_strings(kb):
    (preds,) = EntityLinker(kb, strategy="embedding").fit().predict(["Buff pottery vessel"])
    assert [p.span.surface for p in preds] == ["Buff", "pottery", "vessel"]
