"""Claim verification over extracted premises, with citation accounting."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Iterable, Optional

from .corpus import letter_sort_key
from .gateway import GenerationRequest, SchemaContext, SchemaFailure, TransportFailure

logger = logging.getLogger(__name__)

# Predicted label recorded when the model response never parsed; it can
# match no gold label, so parse failures count against every metric.
INVALID_PREDICTION = "__invalid__"


class EmptyGiven(ValueError):
    """A result has no shown premises, so coverage is undefined."""


VERIFY_SYSTEM_TEMPLATE = (
    "You are a careful fact-checking assistant. Decide a verdict for the claim using only the "
    "lettered premises shown to you.\n"
    "Allowed labels: {labels}\n"
    'Respond with a JSON object {{"verdict": "...", "justification": "...", "cited_ids": [...]}} '
    "where verdict is exactly one allowed label, justification is a brief explanation, and "
    "cited_ids lists the letters of the premises you relied on. Return JSON only."
)


def build_verification_prompt(claim: str, premises: list, label_set: tuple) -> tuple:
    """Return (system, user) prompts showing letter-identified premises."""
    system = VERIFY_SYSTEM_TEMPLATE.format(labels=", ".join(label_set))
    lines = "\n".join(f"{p.letter_id}: {p.text}" for p in premises)
    user = f"Claim: {claim}\nPremises:\n{lines}\nReturn JSON only."
    return system, user


@dataclass(frozen=True)
class VerificationResult:
    article_url: str
    mode: str
    predicted: str
    gold: str
    justification: str
    cited_ids: tuple
    given_ids: tuple
    coverage: float
    parse_ok: bool
    n_hallucinated: int

    def to_dict(self) -> dict:
        return {
            "article_url": self.article_url,
            "mode": self.mode,
            "predicted": self.predicted,
            "gold": self.gold,
            "justification": self.justification,
            "cited_ids": list(self.cited_ids),
            "given_ids": list(self.given_ids),
            "coverage": self.coverage,
            "parse_ok": self.parse_ok,
            "n_hallucinated": self.n_hallucinated,
        }

    @staticmethod
    def from_dict(data: dict) -> "VerificationResult":
        return VerificationResult(
            article_url=data.get("article_url", ""),
            mode=data.get("mode", ""),
            predicted=data.get("predicted", ""),
            gold=data.get("gold", ""),
            justification=data.get("justification", ""),
            cited_ids=tuple(data.get("cited_ids") or ()),
            given_ids=tuple(data.get("given_ids") or ()),
            coverage=float(data.get("coverage", 0.0)),
            parse_ok=bool(data.get("parse_ok", False)),
            n_hallucinated=int(data.get("n_hallucinated", 0)),
        )


def citation_stats(cited: Iterable, given: Iterable) -> tuple:
    """Return (kept_citations, coverage, n_hallucinated) for one result."""
    given_list = list(given)
    if not given_list:
        raise EmptyGiven("no premises were shown")
    given_set = set(given_list)
    cited_set = set(cited)
    kept = sorted(cited_set & given_set, key=letter_sort_key)
    hallucinated = len(cited_set - given_set)
    return tuple(kept), len(kept) / len(given_set), hallucinated


def verify_one(
    claim: str,
    premises: list,
    label_set: tuple,
    gateway: Any,
    gold: str = "",
    mode: str = "",
) -> VerificationResult:
    """Ask for a verdict over one article's premises and account citations."""
    if not premises:
        raise EmptyGiven("no premises were shown")
    ordered = sorted(premises, key=lambda p: (letter_sort_key(p.letter_id), p.premise_id))
    given = []
    for premise in ordered:
        if premise.letter_id not in given:
            given.append(premise.letter_id)
    article_url = ordered[0].article_url
    mode = mode or ordered[0].mode

    system_prompt, user_prompt = build_verification_prompt(claim, ordered, label_set)
    request = GenerationRequest(
        system_prompt=system_prompt,
        user_prompt=user_prompt,
        schema_id="verify_v1",
        context=SchemaContext(allowed_labels=tuple(label_set)),
    )
    try:
        result = gateway.generate(request)
    except (SchemaFailure, TransportFailure) as exc:
        logger.warning("verification failed for %s: %s", article_url, exc)
        return VerificationResult(
            article_url=article_url,
            mode=mode,
            predicted=INVALID_PREDICTION,
            gold=gold,
            justification="",
            cited_ids=(),
            given_ids=tuple(given),
            coverage=0.0,
            parse_ok=False,
            n_hallucinated=0,
        )
    kept, coverage, hallucinated = citation_stats(result.parsed["cited_ids"], given)
    return VerificationResult(
        article_url=article_url,
        mode=mode,
        predicted=result.parsed["verdict"],
        gold=gold,
        justification=result.parsed["justification"],
        cited_ids=kept,
        given_ids=tuple(given),
        coverage=coverage,
        parse_ok=True,
        n_hallucinated=hallucinated,
    )


def macro_f1(results: list, label_set: tuple) -> float:
    """Unweighted mean F1 over the label set.

    A label with no predictions and no gold occurrences scores 0; parse
    failures carry the invalid marker and therefore never match.
    """
    if not results:
        raise ValueError("no results to score")
    total = 0.0
    for label in label_set:
        tp = sum(1 for r in results if r.predicted == label and r.gold == label)
        fp = sum(1 for r in results if r.predicted == label and r.gold != label)
        fn = sum(1 for r in results if r.gold == label and r.predicted != label)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        total += f1
    return total / len(label_set)


def coverage_aggregate(results: list) -> Optional[float]:
    """Mean citation coverage over results whose response parsed."""
    for result in results:
        if not result.given_ids:
            raise EmptyGiven(f"result for {result.article_url} has no shown premises")
    parsed = [r for r in results if r.parse_ok]
    if not parsed:
        return None
    return sum(r.coverage for r in parsed) / len(parsed)
