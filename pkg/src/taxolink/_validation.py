"""Input coercion shared by the estimator classes."""
from __future__ import annotations

from .corpus import AnnotatedDocument, Document, FieldType


def check_document(x, i=0) -> Document:
    """Accept a Document, an AnnotatedDocument or a bare string (as a Description field)."""
    if isinstance(x, AnnotatedDocument):
        return x.document
    if isinstance(x, Document):
        return x
    if isinstance(x, str):
        return Document(f"doc-{i}", FieldType.DESCRIPTION, x)
    raise TypeError(f"expected Document, AnnotatedDocument or str, got {type(x).__name__}")


def check_documents(X) -> list[Document]:
    if isinstance(X, (str, Document, AnnotatedDocument)):
        raise TypeError("expected a sequence of documents, got a single document")
    return [check_document(x, i) for i, x in enumerate(X)]


def check_annotated(X) -> list[AnnotatedDocument]:
    X = list(X)
    bad = [type(x).__name__ for x in X if not isinstance(x, AnnotatedDocument)]
    if bad:
        raise TypeError(f"expected AnnotatedDocument items, got {bad[0]}")
    return X


def check_threshold(value, name="threshold"):
    if not (0.0 < float(value) <= 1.0):
        raise ValueError(f"{name} must be in (0, 1], got {value}")
    return float(value)
