"""evidencekit: evidence units from fact-check articles, plus their evaluation.

The pipeline ingests crawled articles into letter-addressed sentence units
with source anchors, extracts premises in three modes (verbatim, rewritten,
open), and scores the results for faithfulness, retrievability, and
verification utility.
"""

__version__ = "0.1.0"

from .corpus import (
    Anchor,
    ArticleRecord,
    BinaryLabel,
    EvaluationRun,
    EvidenceType,
    Premise,
    SentenceUnit,
    SourceEntry,
    VerdictLabel,
    collapse_verdict,
    letter_id,
    letter_index,
)
from .faithfulness import dfs_corpus, overlap, tokenize
from .retrieval import build_index, evaluate_retrieval, search

__all__ = [
    "Anchor",
    "ArticleRecord",
    "BinaryLabel",
    "EvaluationRun",
    "EvidenceType",
    "Premise",
    "SentenceUnit",
    "SourceEntry",
    "VerdictLabel",
    "collapse_verdict",
    "letter_id",
    "letter_index",
    "tokenize",
    "overlap",
    "dfs_corpus",
    "build_index",
    "search",
    "evaluate_retrieval",
    "__version__",
]
