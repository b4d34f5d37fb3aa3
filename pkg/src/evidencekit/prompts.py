"""Prompt builders for the generation backends."""
from __future__ import annotations

import re

from .corpus import EVIDENCE_TYPES


class UnknownLetter(KeyError):
    """A requested letter does not occur in the labeled article."""


class BoundsError(ValueError):
    """Requested premise bounds are not satisfiable (need 1 <= min <= max)."""


CATEGORY_GUIDE = (
    "Category guide:\n"
    "- QUOTE: an attributed statement by a person or organization.\n"
    "- STATISTIC: a numeric fact from an official dataset or series.\n"
    "- DOCUMENT: findings of an authoritative record such as a law, ruling, report, or prior fact-check.\n"
    "- CONTEXT: background, attribution, or qualification needed to interpret other premises.\n"
    "- OTHER: none of the above fits.\n"
)

DECONTEXTUALIZE_SYSTEM = (
    "You are a careful scientific editor. Produce ONE decontextualized sentence that stands alone, "
    "explicitly preserving or adding the entities, numbers, and dates needed to understand it outside "
    "the article. Assign a category label using exactly one of: "
    + ", ".join(EVIDENCE_TYPES)
    + ".\n"
    + CATEGORY_GUIDE
    + 'Respond with a JSON object {"letter": "...", "decontextualized": "...", "category": "..."}. '
    "Return JSON only."
)

_LABELED_LINE = re.compile(r"^([A-Z]+): ", re.MULTILINE)


def article_letters(labeled_article: str) -> list:
    """Letters present in a labeled-article rendering, in order."""
    return _LABELED_LINE.findall(labeled_article)


def build_decontextualize_prompt(
    claim: str, labeled_article: str, letter: str, target_sentence: str
) -> tuple:
    """Return (system, user) prompts for rewriting one anchored sentence."""
    if letter not in article_letters(labeled_article):
        raise UnknownLetter(letter)
    user = (
        f"Claim: {claim}\n"
        f"Article (labeled):\n{labeled_article}\n"
        f"Target letter: {letter}\n"
        f"Target sentence: {target_sentence}\n"
        "Return JSON only."
    )
    return DECONTEXTUALIZE_SYSTEM, user


def build_open_extract_prompt(claim: str, labeled_article: str, min_n: int, max_n: int) -> tuple:
    """Return (system, user) prompts for open premise extraction."""
    if min_n < 1 or min_n > max_n:
        raise BoundsError(f"need 1 <= min_n <= max_n, got min_n={min_n} max_n={max_n}")
    system = (
        f"You are a careful scientific editor. Extract {min_n}–{max_n} non-redundant key premises "
        "from the labeled article. For each premise provide: (a) exactly ONE letter anchor from the "
        "article that supports it; (b) ONE decontextualized sentence that stands alone; and (c) a "
        "category label using exactly one of: " + ", ".join(EVIDENCE_TYPES) + ".\n"
        + CATEGORY_GUIDE
        + 'Respond with a JSON array of objects {"letter": "...", "decontextualized": "...", "category": "..."}. '
        "Return JSON only."
    )
    user = f"Claim: {claim}\nArticle (labeled):\n{labeled_article}\nReturn JSON only."
    return system, user
