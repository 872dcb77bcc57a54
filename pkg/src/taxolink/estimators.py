"""scikit-learn style wrappers around mention detection and memorization.

:class:`~taxolink.linkers.EntityLinker` and
:class:`~taxolink.embeddings.TfidfEmbedder` live next to the code they wrap.
"""
from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_annotated, check_documents, check_threshold
from .evaluation import eval_disambiguation, gold_table
from .linkers import DetectorConfig, gold_spans, link_memorization, train_memorization
from .matcher import DEFAULT_FUZZY_THRESHOLD, build_label_index


class MentionDetector(BaseEstimator):
    """Dictionary mention detector.

    >>> det = MentionDetector(taxonomy).fit()
    >>> det.predict(["Plain weave, tapestry, dyed"])  # doctest: +SKIP
    """

    def __init__(self, taxonomy=None, mode="exact", min_similarity=DEFAULT_FUZZY_THRESHOLD):
        self.taxonomy = taxonomy
        self.mode = mode
        self.min_similarity = min_similarity

    def fit(self, X=None, y=None):
        if self.taxonomy is None:
            raise ValueError("MentionDetector needs a taxonomy")
        check_threshold(self.min_similarity, "min_similarity")
        self.detector_ = DetectorConfig(self.mode, self.min_similarity)
        self.index_ = build_label_index(self.taxonomy)
        return self

    def predict(self, X):
        """One list of spans per input document."""
        check_is_fitted(self, "index_")
        return [self.detector_.detect(d.text, self.index_) for d in check_documents(X)]


class MemorizationLinker(BaseEstimator):
    """Most-frequent-entity baseline scored on gold mention spans.

    ``predict`` links the gold spans of each annotated document (the gold
    entity ids are ignored); ``score`` is disambiguation precision.
    """

    def fit(self, X, y=None):
        self.table_ = train_memorization(check_annotated(X))
        return self

    def predict(self, X):
        check_is_fitted(self, "table_")
        return [
            [link_memorization(span, self.table_, doc.doc_id) for span in gold_spans(doc)]
            for doc in check_annotated(X)
        ]

    def score(self, X, y=None):
        X = check_annotated(X)
        return eval_disambiguation(self.predict(X), gold_table(X)).precision
