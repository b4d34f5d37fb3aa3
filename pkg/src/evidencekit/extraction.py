"""Evidence extraction modes over anchored, letter-addressed articles.

Mode A copies anchored sentences verbatim.  Mode B rewrites each anchored
sentence into a standalone premise via the generation gateway.  Mode C asks
the gateway for an open set of premises, bounded by the article's anchor
count, each tied to exactly one letter.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from typing import Any, Callable, Optional

from .corpus import Premise, letter_sort_key, make_premise_id
from .gateway import GenerationRequest, SchemaContext, SchemaFailure, TransportFailure
from .prompts import UnknownLetter, build_decontextualize_prompt, build_open_extract_prompt

logger = logging.getLogger(__name__)


class DanglingAnchor(KeyError):
    """An anchor references a letter with no usable sentence unit."""


@dataclass(frozen=True)
class ExtractionFailure:
    """One failed generation, recorded for the run log."""

    article_url: str
    letter_id: str
    kind: str
    raw_digest: str

    def to_dict(self) -> dict:
        return {
            "article_url": self.article_url,
            "letter_id": self.letter_id,
            "kind": self.kind,
            "raw_digest": self.raw_digest,
        }


def _raw_digest(raw_text: Optional[str]) -> str:
    if not raw_text:
        return ""
    return hashlib.sha1(raw_text.encode("utf-8")).hexdigest()[:12]


@dataclass(frozen=True)
class LabeledArticle:
    """Letter-labeled rendering of an article's non-verdict sentences."""

    article_url: str
    claim: str
    rendering: str
    sentences: dict

    @staticmethod
    def from_units(units: list, claim: str) -> "LabeledArticle":
        kept = [u for u in units if not u.is_verdict_sentence]
        kept.sort(key=lambda u: letter_sort_key(u.letter_id))
        rendering = "\n".join(f"{u.letter_id}: {u.text}" for u in kept)
        sentences = {u.letter_id: u.text for u in kept}
        url = kept[0].article_url if kept else (units[0].article_url if units else "")
        return LabeledArticle(article_url=url, claim=claim, rendering=rendering, sentences=sentences)

    def letters(self) -> list:
        return sorted(self.sentences, key=letter_sort_key)

    def sentence(self, letter: str) -> str:
        try:
            return self.sentences[letter]
        except KeyError:
            raise UnknownLetter(letter) from None


def _anchored_letters(anchors: list) -> list:
    seen = []
    for anchor in anchors:
        if anchor.letter_id not in seen:
            seen.append(anchor.letter_id)
    return sorted(seen, key=letter_sort_key)


def mode_a(anchors: list, units: list) -> list:
    """Verbatim premises: one per distinct anchored sentence."""
    if not anchors:
        return []
    by_letter = {u.letter_id: u for u in units if not u.is_verdict_sentence}
    premises = []
    for letter in _anchored_letters(anchors):
        unit = by_letter.get(letter)
        if unit is None:
            raise DanglingAnchor(letter)
        premises.append(
            Premise(
                article_url=unit.article_url,
                mode="A",
                premise_id=make_premise_id(unit.article_url, "A", letter),
                letter_id=letter,
                text=unit.text,
            )
        )
    return premises


def mode_b(
    article: LabeledArticle,
    anchors: list,
    gateway: Any,
    on_failure: Optional[Callable] = None,
) -> list:
    """Decontextualized premises, one per distinct anchored sentence.

    Failed generations are reported to `on_failure` and skipped; the rest of
    the article still yields premises.
    """
    allowed = frozenset(article.sentences)
    premises = []
    for letter in _anchored_letters(anchors):
        target = article.sentence(letter)  # raises UnknownLetter for bad anchors
        system_prompt, user_prompt = build_decontextualize_prompt(
            article.claim, article.rendering, letter, target
        )
        request = GenerationRequest(
            system_prompt=system_prompt,
            user_prompt=user_prompt,
            schema_id="decontextualize_v1",
            context=SchemaContext(allowed_letters=allowed),
        )
        try:
            result = gateway.generate(request)
        except (SchemaFailure, TransportFailure) as exc:
            kind = "schema_failure" if isinstance(exc, SchemaFailure) else "transport_failure"
            logger.warning("mode B generation failed for %s %s: %s", article.article_url, letter, exc)
            if on_failure is not None:
                on_failure(ExtractionFailure(article.article_url, letter, kind, _raw_digest(exc.raw_text)))
            continue
        returned = result.parsed["letter"]
        if returned != letter:
            logger.warning(
                "mode B response for %s cited %s instead of %s; keeping the requested letter",
                article.article_url,
                returned,
                letter,
            )
        premises.append(
            Premise(
                article_url=article.article_url,
                mode="B",
                premise_id=make_premise_id(article.article_url, "B", letter),
                letter_id=letter,
                text=result.parsed["decontextualized"],
                evidence_type=result.parsed["category"],
                model_id=result.model_id,
            )
        )
    return premises


def mode_c(
    article: LabeledArticle,
    n_anchors: int,
    gateway: Any,
    on_failure: Optional[Callable] = None,
) -> list:
    """Open premise extraction, bounded above by the article's anchor count.

    Schema and transport failures propagate after being reported; letters
    that fail to resolve are dropped with a log entry.
    """
    if n_anchors < 1:
        raise ValueError(f"n_anchors must be at least 1, got {n_anchors}")
    system_prompt, user_prompt = build_open_extract_prompt(article.claim, article.rendering, 1, n_anchors)
    request = GenerationRequest(
        system_prompt=system_prompt,
        user_prompt=user_prompt,
        schema_id="open_extract_v1",
        context=SchemaContext(
            allowed_letters=frozenset(article.sentences),
            min_items=1,
            max_items=n_anchors,
        ),
    )
    try:
        result = gateway.generate(request)
    except (SchemaFailure, TransportFailure) as exc:
        kind = "schema_failure" if isinstance(exc, SchemaFailure) else "transport_failure"
        if on_failure is not None:
            on_failure(ExtractionFailure(article.article_url, "", kind, _raw_digest(exc.raw_text)))
        raise

    items = []
    for item in result.parsed:
        if item["letter"] not in article.sentences:
            logger.warning(
                "mode C dropped a premise citing unknown letter %s in %s",
                item["letter"],
                article.article_url,
            )
            continue
        items.append(item)
    items.sort(key=lambda item: letter_sort_key(item["letter"]))

    premises = []
    counts: dict = {}
    for item in items:
        letter = item["letter"]
        seq = counts.get(letter)
        counts[letter] = 1 if seq is None else seq + 1
        premises.append(
            Premise(
                article_url=article.article_url,
                mode="C",
                premise_id=make_premise_id(article.article_url, "C", letter, seq),
                letter_id=letter,
                text=item["decontextualized"],
                evidence_type=item["category"],
                model_id=result.model_id,
            )
        )
    return premises


def overlap_report(a_premises: list, c_premises: list) -> float:
    """Fraction of mode C premises whose letter also carries a mode A premise."""
    if not c_premises:
        return 0.0
    a_letters = {p.letter_id for p in a_premises}
    hits = sum(1 for p in c_premises if p.letter_id in a_letters)
    return hits / len(c_premises)
