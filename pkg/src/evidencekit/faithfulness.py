"""Faithfulness scoring for generated premises.

A premise is faithful when it entails its source sentence without simply
copying it.  Each (premise, source) pair contributes

    entail(p, s) * (1 - overlap(p, s))

where overlap is the fraction of the premise's tokens, with multiplicity,
that also appear in the source.  The corpus score is the mean contribution.
"""
from __future__ import annotations

import logging
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Any, Callable, Optional

import requests

logger = logging.getLogger(__name__)


class EmptyPremise(ValueError):
    """The premise tokenizes to nothing, so overlap is undefined."""


class EmptyDataset(ValueError):
    """No scorable pairs remain."""


class BackendFailure(Exception):
    """The entailment backend failed after all retries."""


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def _strip_edges(token: str) -> str:
    start = 0
    end = len(token)
    while start < end and _is_punct(token[start]):
        start += 1
    while end > start and _is_punct(token[end - 1]):
        end -= 1
    return token[start:end]


def tokenize(text: str) -> Counter:
    """Lowercased multiset of tokens.

    Splits on whitespace and strips punctuation from token edges; internal
    hyphens and apostrophes survive.  Tokens that strip to nothing vanish.
    """
    counts: Counter = Counter()
    for raw in text.lower().split():
        token = _strip_edges(raw)
        if token:
            counts[token] += 1
    return counts


def overlap(premise: str, source: str) -> float:
    """Fraction of premise tokens (with multiplicity) present in the source."""
    p_tokens = tokenize(premise)
    if not p_tokens:
        raise EmptyPremise(f"premise has no tokens: {premise!r}")
    s_tokens = tokenize(source)
    shared = sum((p_tokens & s_tokens).values())
    return shared / sum(p_tokens.values())


def entail(premise: str, source: str, scorer: Any) -> float:
    """Probability that the premise entails the source sentence."""
    value = scorer.score_pairs([(premise, source)])[0]
    if value is None:
        raise BackendFailure("entailment backend returned no score")
    return value


@dataclass(frozen=True)
class ScoredPair:
    premise_id: str
    premise_text: str
    source_text: str
    entail: float
    overlap: float
    dfs: float

    def to_dict(self) -> dict:
        return {
            "premise_id": self.premise_id,
            "premise_text": self.premise_text,
            "source_text": self.source_text,
            "entail": self.entail,
            "overlap": self.overlap,
            "dfs": self.dfs,
        }


def dfs_corpus(
    pairs: list,
    scorer: Any,
    ids: Optional[list] = None,
    on_failure: Optional[Callable] = None,
) -> tuple:
    """Score (premise, source) text pairs; returns (mean_entail, mean_dfs, scored).

    Pairs whose premise has no tokens, or whose entailment call fails, are
    excluded after being reported to `on_failure`.  Raises EmptyDataset when
    nothing remains.
    """
    if not pairs:
        raise EmptyDataset("no pairs to score")
    if ids is None:
        ids = [f"pair-{i}" for i in range(len(pairs))]
    if len(ids) != len(pairs):
        raise ValueError("ids and pairs must have the same length")

    keep = []
    for pair_id, (premise, source) in zip(ids, pairs):
        try:
            o_value = overlap(premise, source)
        except EmptyPremise:
            logger.warning("skipping tokenless premise %s", pair_id)
            if on_failure is not None:
                on_failure(pair_id, "empty_premise")
            continue
        keep.append((pair_id, premise, source, o_value))

    if not keep:
        raise EmptyDataset("no scorable pairs after exclusions")
    scores = scorer.score_pairs([(premise, source) for _, premise, source, _ in keep])
    if len(scores) != len(keep):
        raise BackendFailure("entailment backend returned a mismatched number of scores")

    scored = []
    for (pair_id, premise, source, o_value), e_value in zip(keep, scores):
        if e_value is None:
            logger.warning("entailment backend failed for %s", pair_id)
            if on_failure is not None:
                on_failure(pair_id, "backend_failure")
            continue
        scored.append(
            ScoredPair(
                premise_id=pair_id,
                premise_text=premise,
                source_text=source,
                entail=e_value,
                overlap=o_value,
                dfs=e_value * (1.0 - o_value),
            )
        )
    if not scored:
        raise EmptyDataset("every pair failed entailment scoring")
    mean_entail = sum(p.entail for p in scored) / len(scored)
    mean_dfs = sum(p.dfs for p in scored) / len(scored)
    return mean_entail, mean_dfs, scored


# --------------------------------------------------------------------------
# Entailment backends


class ConstantEntailment:
    """Fixed-score backend, useful for calibration and tests."""

    def __init__(self, value: float):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"entailment score must be within [0, 1], got {value}")
        self.value = value

    def score_pairs(self, pairs: list) -> list:
        return [self.value] * len(pairs)


class LexicalEntailment:
    """Token-coverage proxy: how much of the source the premise covers.

    Scores 1.0 when the premise's tokens are a superset of the source's;
    a tokenless source is trivially covered.
    """

    def score_pairs(self, pairs: list) -> list:
        scores = []
        for premise, source in pairs:
            s_tokens = tokenize(source)
            if not s_tokens:
                scores.append(1.0)
                continue
            p_tokens = tokenize(premise)
            shared = sum((s_tokens & p_tokens).values())
            scores.append(shared / sum(s_tokens.values()))
        return scores


class HTTPEntailment:
    """Remote NLI backend scoring batches of (premise, hypothesis) pairs.

    POSTs {"pairs": [{"premise": ..., "hypothesis": ...}]} and expects
    {"scores": [{"entail": ..., "neutral": ..., "contradict": ...}]}.
    A batch that still fails after the retry budget scores as None per pair.
    """

    def __init__(
        self,
        base_url: str,
        timeout_ms: int = 30000,
        batch_size: int = 16,
        max_retries: int = 2,
        session: Optional[requests.Session] = None,
    ):
        if batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        self.base_url = base_url
        self.timeout_s = timeout_ms / 1000.0
        self.batch_size = batch_size
        self.max_retries = max_retries
        self._session = session or requests.Session()

    def _score_batch(self, batch: list) -> list:
        body = {"pairs": [{"premise": p, "hypothesis": s} for p, s in batch]}
        last_error: Optional[Exception] = None
        for _ in range(self.max_retries + 1):
            try:
                response = self._session.post(self.base_url, json=body, timeout=self.timeout_s)
                response.raise_for_status()
                scores = response.json()["scores"]
                if len(scores) != len(batch):
                    raise ValueError("backend returned a mismatched number of scores")
                return [float(entry["entail"]) for entry in scores]
            except (requests.RequestException, ValueError, KeyError, TypeError) as exc:
                last_error = exc
        logger.warning("entailment batch failed after retries: %s", last_error)
        return [None] * len(batch)

    def score_pairs(self, pairs: list) -> list:
        scores: list = []
        for start in range(0, len(pairs), self.batch_size):
            scores.extend(self._score_batch(pairs[start : start + self.batch_size]))
        return scores


def entailment_backend_from_url(
    url: str,
    timeout_ms: int = 30000,
    batch_size: int = 16,
    max_retries: int = 2,
) -> Any:
    """Build a scorer from a URL-style spec.

    "constant://0.7" gives a fixed score, "lexical://" the token-coverage
    proxy, and http(s) URLs a remote NLI service.
    """
    if url.startswith("constant://"):
        return ConstantEntailment(float(url[len("constant://") :]))
    if url.startswith("lexical://") or url == "lexical":
        return LexicalEntailment()
    if url.startswith(("http://", "https://")):
        return HTTPEntailment(url, timeout_ms=timeout_ms, batch_size=batch_size, max_retries=max_retries)
    raise ValueError(f"unknown entailment backend spec: {url!r}")
