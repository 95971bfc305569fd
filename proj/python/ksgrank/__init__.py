"""Knowledge-subgraph partitioning, ranking and evaluation."""

from ._ksgrank import (
    KnowledgeGraph,
    Ksg,
    load_triples,
    mrr,
    recall_at_k,
    run_pipeline,
    selftest_quick,
    tfidf_cosine,
)

__all__ = [
    "KnowledgeGraph",
    "Ksg",
    "load_triples",
    "mrr",
    "recall_at_k",
    "run_pipeline",
    "selftest_quick",
    "tfidf_cosine",
]
