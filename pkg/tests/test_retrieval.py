import math
import random

import pytest

from evidencekit.corpus import Premise, letter_id, make_premise_id
from evidencekit.retrieval import (
    EmptyCorpus,
    EmptyGold,
    QuerySpec,
    build_index,
    evaluate_retrieval,
    gold_premises_by_article,
    idf,
    ndcg_at,
    recall_at,
    reciprocal_rank,
    search,
)

# --------------------------------------------------------------------------
# Independent oracles, written straight from the scoring definitions and
# kept deliberately naive so they share no code with the implementation.


def _oracle_tokens(text):
    import unicodedata

    out = []
    for raw in text.lower().split():
        while raw and unicodedata.category(raw[0]).startswith("P"):
            raw = raw[1:]
        while raw and unicodedata.category(raw[-1]).startswith("P"):
            raw = raw[:-1]
        if raw:
            out.append(raw)
    return out


def _oracle_bm25_rank(docs, query, k1=1.5, b=0.75, k=10):
    """docs: {doc_id: text}. Returns [(doc_id, score)] for matching docs."""
    doc_tokens = {doc_id: _oracle_tokens(text) for doc_id, text in docs.items()}
    n = len(docs)
    avgdl = sum(len(tokens) for tokens in doc_tokens.values()) / n
    scores = {}
    for term in sorted(set(_oracle_tokens(query))):
        df = sum(1 for tokens in doc_tokens.values() if term in tokens)
        if df == 0:
            continue
        term_idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
        for doc_id, tokens in doc_tokens.items():
            tf = tokens.count(term)
            if tf == 0:
                continue
            denom = tf + k1 * (1.0 - b + b * len(tokens) / avgdl)
            scores[doc_id] = scores.get(doc_id, 0.0) + term_idf * tf * (k1 + 1.0) / denom
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:k]


def _oracle_mrr(ranked_ids, gold, k):
    for i, doc_id in enumerate(ranked_ids[:k]):
        if doc_id in gold:
            return 1.0 / (i + 1)
    return 0.0


def _oracle_recall(ranked_ids, gold, k):
    return len(set(ranked_ids[:k]) & gold) / len(gold)


def _oracle_ndcg(ranked_ids, gold, k):
    dcg = sum(
        1.0 / math.log2(i + 2) for i, doc_id in enumerate(ranked_ids[:k]) if doc_id in gold
    )
    idcg = sum(1.0 / math.log2(i + 2) for i in range(min(len(gold), k)))
    return dcg / idcg


# --------------------------------------------------------------------------
# fixtures


def _premise(i, text, url="https://example.org/fact/x", mode="B"):
    letter = letter_id(i)
    return Premise(
        article_url=url,
        mode=mode,
        premise_id=make_premise_id(url, mode, letter),
        letter_id=letter,
        text=text,
        evidence_type="CONTEXT" if mode != "A" else None,
    )


VOCAB = [
    "budget",
    "audit",
    "spending",
    "rose",
    "fell",
    "mayor",
    "council",
    "report",
    "federal",
    "rate",
    "school",
    "record",
]


def _random_docs(rng, n_docs):
    premises = []
    for i in range(n_docs):
        length = rng.randint(3, 12)
        words = [rng.choice(VOCAB) for _ in range(length)]
        premises.append(_premise(i, " ".join(words) + "."))
    return premises


# --------------------------------------------------------------------------
# index construction


def test_build_index_rejects_bad_input():
    with pytest.raises(EmptyCorpus):
        build_index([])
    mixed = [_premise(0, "one two", mode="A"), _premise(1, "three four", mode="B")]
    with pytest.raises(ValueError):
        build_index(mixed)
    dup = _premise(0, "one two")
    with pytest.raises(ValueError):
        build_index([dup, dup])


def test_build_index_statistics():
    premises = [_premise(0, "budget audit budget"), _premise(1, "spending rose")]
    index = build_index(premises)
    assert index.n_docs == 2
    assert index.avgdl == 2.5
    assert index.df["budget"] == 1
    assert index.postings["budget"][premises[0].premise_id] == 2
    assert index.doc_len[premises[1].premise_id] == 2


def test_idf_matches_formula():
    premises = [_premise(i, text) for i, text in enumerate(["budget audit", "budget rose", "rate fell"])]
    index = build_index(premises)
    assert idf(index, "budget") == pytest.approx(math.log(1 + (3 - 2 + 0.5) / 2.5))
    assert idf(index, "rate") == pytest.approx(math.log(1 + (3 - 1 + 0.5) / 1.5))
    assert idf(index, "unseen") == pytest.approx(math.log(1 + 3.5 / 0.5))


# --------------------------------------------------------------------------
# search vs oracle


def test_search_matches_oracle_on_random_corpora():
    rng = random.Random(7)
    for _ in range(25):
        premises = _random_docs(rng, rng.randint(2, 50))
        index = build_index(premises)
        docs = {p.premise_id: p.text for p in premises}
        query = " ".join(rng.choice(VOCAB) for _ in range(rng.randint(1, 4)))
        expected = _oracle_bm25_rank(docs, query, k=10)
        actual = search(index, query, k=10)
        assert [doc_id for doc_id, _ in actual] == [doc_id for doc_id, _ in expected]
        for (_, got), (_, want) in zip(actual, expected):
            assert got == pytest.approx(want, abs=1e-9)


def test_search_only_ranks_matching_docs():
    premises = [_premise(0, "budget audit"), _premise(1, "school record")]
    index = build_index(premises)
    results = search(index, "budget", k=10)
    assert [doc_id for doc_id, _ in results] == [premises[0].premise_id]
    assert search(index, "zebra", k=10) == []


def test_search_repeated_query_terms_count_once():
    premises = [_premise(0, "budget audit"), _premise(1, "school record")]
    index = build_index(premises)
    once = search(index, "budget", k=10)
    thrice = search(index, "budget budget budget", k=10)
    assert once == thrice


def test_search_ties_break_by_ascending_id():
    # identical docs score identically; order must follow premise_id
    premises = [_premise(i, "budget audit report") for i in range(5)]
    index = build_index(premises)
    results = search(index, "budget", k=10)
    ids = [doc_id for doc_id, _ in results]
    assert ids == sorted(ids)
    scores = {score for _, score in results}
    assert len(scores) == 1


def test_search_rejects_bad_k():
    index = build_index([_premise(0, "budget")])
    with pytest.raises(ValueError):
        search(index, "budget", k=0)


# --------------------------------------------------------------------------
# metrics


def test_metrics_hand_example():
    # gold docs sit at ranks 2 and 4
    ranked = ["d1", "g1", "d2", "g2", "d3"]
    gold = {"g1", "g2"}
    assert reciprocal_rank(ranked, gold, 10) == 0.5
    assert recall_at(ranked, gold, 1) == 0.0
    assert recall_at(ranked, gold, 3) == 0.5
    assert recall_at(ranked, gold, 10) == 1.0
    expected_ndcg3 = (1 / math.log2(3)) / (1 + 1 / math.log2(3))
    assert ndcg_at(ranked, gold, 3) == pytest.approx(expected_ndcg3)
    assert ndcg_at(ranked, gold, 3) == pytest.approx(0.3868528072345416)
    assert ndcg_at(ranked, gold, 10) == pytest.approx(
        (1 / math.log2(3) + 1 / math.log2(5)) / (1 + 1 / math.log2(3))
    )


def test_metrics_perfect_and_empty_rankings():
    gold = {"a", "b"}
    assert reciprocal_rank(["a", "b"], gold, 10) == 1.0
    assert ndcg_at(["a", "b"], gold, 10) == pytest.approx(1.0)
    assert recall_at(["a", "b"], gold, 10) == 1.0
    assert reciprocal_rank([], gold, 10) == 0.0
    assert ndcg_at([], gold, 10) == 0.0
    assert recall_at([], gold, 10) == 0.0


def test_metrics_respect_cutoff():
    ranked = ["x", "y", "z", "a"]
    gold = {"a"}
    assert reciprocal_rank(ranked, gold, 3) == 0.0
    assert reciprocal_rank(ranked, gold, 4) == 0.25
    assert recall_at(ranked, gold, 3) == 0.0


def test_metrics_gold_larger_than_k():
    # three gold docs, cutoff 2: ideal DCG uses only two positions
    ranked = ["a", "b"]
    gold = {"a", "b", "c"}
    assert ndcg_at(ranked, gold, 2) == pytest.approx(1.0)
    assert recall_at(ranked, gold, 2) == pytest.approx(2 / 3)


def test_metrics_empty_gold_raises():
    with pytest.raises(EmptyGold):
        recall_at(["a"], set(), 3)
    with pytest.raises(EmptyGold):
        ndcg_at(["a"], set(), 3)


def test_metrics_match_oracle_on_random_rankings():
    rng = random.Random(13)
    for _ in range(100):
        n = rng.randint(1, 30)
        ranked = [f"d{i}" for i in range(n)]
        rng.shuffle(ranked)
        gold = set(rng.sample(ranked, rng.randint(1, n)))
        for k in (1, 3, 10):
            assert reciprocal_rank(ranked, gold, k) == pytest.approx(
                _oracle_mrr(ranked, gold, k), abs=1e-9
            )
            assert recall_at(ranked, gold, k) == pytest.approx(
                _oracle_recall(ranked, gold, k), abs=1e-9
            )
            assert ndcg_at(ranked, gold, k) == pytest.approx(
                _oracle_ndcg(ranked, gold, k), abs=1e-9
            )


# --------------------------------------------------------------------------
# evaluation loop


def test_evaluate_retrieval_aggregates_are_means():
    urls = ["https://example.org/fact/a", "https://example.org/fact/b"]
    premises = []
    premises += [_premise(i, text, url=urls[0]) for i, text in enumerate(["budget audit", "mayor council"])]
    premises += [_premise(i, text, url=urls[1]) for i, text in enumerate(["school record", "rate fell"])]
    index = build_index(premises)
    gold = gold_premises_by_article(premises)
    queries = [
        QuerySpec(article_url=urls[0], query_text="budget mayor", gold_ids=gold[urls[0]]),
        QuerySpec(article_url=urls[1], query_text="school rate", gold_ids=gold[urls[1]]),
    ]
    aggregates, per_query = evaluate_retrieval(index, queries)
    assert aggregates["n_queries"] == 2
    assert len(per_query) == 2
    for name in ("mrr@10", "ndcg@3", "ndcg@10", "recall@1", "recall@3", "recall@10"):
        assert aggregates[name] == pytest.approx(
            (per_query[0][name] + per_query[1][name]) / 2
        )
    assert per_query[0]["gold_size"] == 2
    assert per_query[0]["ranking"]  # rankings are persisted for the run log


def test_evaluate_retrieval_errors():
    premises = [_premise(0, "budget audit")]
    index = build_index(premises)
    with pytest.raises(EmptyCorpus):
        evaluate_retrieval(index, [])
    bad = QuerySpec(article_url="u", query_text="budget", gold_ids=frozenset())
    with pytest.raises(EmptyGold):
        evaluate_retrieval(index, [bad])


def test_gold_premises_by_article():
    premises = [
        _premise(0, "one", url="https://example.org/fact/a"),
        _premise(1, "two", url="https://example.org/fact/a"),
        _premise(0, "three", url="https://example.org/fact/b"),
    ]
    gold = gold_premises_by_article(premises)
    assert set(gold) == {"https://example.org/fact/a", "https://example.org/fact/b"}
    assert len(gold["https://example.org/fact/a"]) == 2
    assert isinstance(gold["https://example.org/fact/a"], frozenset)
