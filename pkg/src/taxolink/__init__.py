"""Entity linking against AAT-style controlled vocabularies.

The functional core lives in the submodules (``taxonomy``, ``corpus``,
``matcher``, ``embeddings``, ``linkers``, ``evaluation``, ``significance``);
``MentionDetector``, ``TfidfEmbedder`` and ``EntityLinker`` wrap it in the
scikit-learn estimator protocol.
"""

__version__ = "0.1.0"

from .corpus import AnnotatedDocument, Document, FieldType, MentionAnnotation, load_annotations
from .embeddings import TfidfEmbedder
from .estimators import MentionDetector, MemorizationLinker
from .linkers import EntityLinker, LinkPrediction, Strategy
from .taxonomy import EntityRecord, Facet, Taxonomy, load_taxonomy

__all__ = [
    "AnnotatedDocument",
    "Document",
    "EntityLinker",
    "EntityRecord",
    "Facet",
    "FieldType",
    "LinkPrediction",
    "MemorizationLinker",
    "MentionAnnotation",
    "MentionDetector",
    "Strategy",
    "Taxonomy",
    "TfidfEmbedder",
    "load_annotations",
    "load_taxonomy",
]
