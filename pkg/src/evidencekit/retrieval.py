"""BM25 retrieval over premises and standard ranking metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .faithfulness import tokenize


class EmptyCorpus(ValueError):
    """No premises to index."""


class EmptyGold(ValueError):
    """A query arrived without gold premise ids."""


@dataclass(frozen=True)
class PremiseIndex:
    mode: str
    k1: float
    b: float
    doc_ids: tuple
    doc_len: dict
    postings: dict
    df: dict
    n_docs: int
    avgdl: float


def build_index(premises: list, k1: float = 1.5, b: float = 0.75) -> PremiseIndex:
    """Index premises of a single extraction mode for BM25 search."""
    if not premises:
        raise EmptyCorpus("no premises to index")
    modes = {p.mode for p in premises}
    if len(modes) != 1:
        raise ValueError(f"premises span multiple modes: {sorted(modes)}")
    seen = set()
    for p in premises:
        if p.premise_id in seen:
            raise ValueError(f"duplicate premise id: {p.premise_id}")
        seen.add(p.premise_id)

    doc_ids = tuple(sorted(p.premise_id for p in premises))
    doc_len: dict = {}
    postings: dict = {}
    for premise in premises:
        counts = tokenize(premise.text)
        doc_len[premise.premise_id] = sum(counts.values())
        for term, tf in counts.items():
            postings.setdefault(term, {})[premise.premise_id] = tf
    df = {term: len(docs) for term, docs in postings.items()}
    n_docs = len(doc_ids)
    avgdl = sum(doc_len.values()) / n_docs
    return PremiseIndex(
        mode=modes.pop(),
        k1=k1,
        b=b,
        doc_ids=doc_ids,
        doc_len=doc_len,
        postings=postings,
        df=df,
        n_docs=n_docs,
        avgdl=avgdl,
    )


def idf(index: PremiseIndex, term: str) -> float:
    df = index.df.get(term, 0)
    return math.log(1.0 + (index.n_docs - df + 0.5) / (df + 0.5))


def search(index: PremiseIndex, query: str, k: int = 10) -> list:
    """Top-k (premise_id, score) pairs for the query.

    Only documents sharing at least one term with the query are ranked.
    Distinct query terms contribute once each; score ties break by
    ascending premise id.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    terms = sorted(set(tokenize(query)))
    scores: dict = {}
    for term in terms:
        docs = index.postings.get(term)
        if not docs:
            continue
        term_idf = idf(index, term)
        for doc_id, tf in docs.items():
            if index.avgdl > 0:
                norm = index.k1 * (1.0 - index.b + index.b * index.doc_len[doc_id] / index.avgdl)
            else:
                norm = index.k1
            contribution = term_idf * (tf * (index.k1 + 1.0)) / (tf + norm)
            scores[doc_id] = scores.get(doc_id, 0.0) + contribution
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:k]


# --------------------------------------------------------------------------
# Ranking metrics (binary relevance)


def reciprocal_rank(ranked_ids: list, gold: set, k: int) -> float:
    for position, doc_id in enumerate(ranked_ids[:k], start=1):
        if doc_id in gold:
            return 1.0 / position
    return 0.0


def recall_at(ranked_ids: list, gold: set, k: int) -> float:
    if not gold:
        raise EmptyGold("recall needs a non-empty gold set")
    hits = sum(1 for doc_id in ranked_ids[:k] if doc_id in gold)
    return hits / len(gold)


def ndcg_at(ranked_ids: list, gold: set, k: int) -> float:
    if not gold:
        raise EmptyGold("ndcg needs a non-empty gold set")
    dcg = 0.0
    for position, doc_id in enumerate(ranked_ids[:k], start=1):
        if doc_id in gold:
            dcg += 1.0 / math.log2(position + 1)
    ideal_hits = min(len(gold), k)
    idcg = sum(1.0 / math.log2(position + 1) for position in range(1, ideal_hits + 1))
    return dcg / idcg if idcg > 0 else 0.0


@dataclass(frozen=True)
class QuerySpec:
    article_url: str
    query_text: str
    gold_ids: frozenset


def evaluate_retrieval(
    index: PremiseIndex,
    queries: Iterable[QuerySpec],
    mrr_k: int = 10,
    ndcg_ks: tuple = (3, 10),
    recall_ks: tuple = (1, 3, 10),
) -> tuple:
    """Score each query and average; returns (aggregates, per_query).

    Raises EmptyGold when any query has no gold ids, and EmptyCorpus when
    there are no queries at all.
    """
    queries = list(queries)
    if not queries:
        raise EmptyCorpus("no queries to evaluate")
    depth = max([mrr_k, *ndcg_ks, *recall_ks])
    per_query = []
    for spec in queries:
        if not spec.gold_ids:
            raise EmptyGold(f"query for {spec.article_url} has no gold premises")
        ranking = search(index, spec.query_text, k=depth)
        ranked_ids = [doc_id for doc_id, _ in ranking]
        gold = set(spec.gold_ids)
        metrics = {f"mrr@{mrr_k}": reciprocal_rank(ranked_ids, gold, mrr_k)}
        for k in ndcg_ks:
            metrics[f"ndcg@{k}"] = ndcg_at(ranked_ids, gold, k)
        for k in recall_ks:
            metrics[f"recall@{k}"] = recall_at(ranked_ids, gold, k)
        per_query.append(
            {
                "article_url": spec.article_url,
                "gold_size": len(gold),
                "ranking": [[doc_id, score] for doc_id, score in ranking],
                **metrics,
            }
        )
    metric_names = [key for key in per_query[0] if key not in ("article_url", "gold_size", "ranking")]
    aggregates = {
        name: sum(q[name] for q in per_query) / len(per_query) for name in metric_names
    }
    aggregates["n_queries"] = len(per_query)
    return aggregates, per_query


def gold_premises_by_article(premises: list) -> dict:
    """Map article_url -> frozenset of its premise ids."""
    gold: dict = {}
    for premise in premises:
        gold.setdefault(premise.article_url, set()).add(premise.premise_id)
    return {url: frozenset(ids) for url, ids in gold.items()}
