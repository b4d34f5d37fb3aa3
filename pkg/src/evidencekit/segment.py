"""Rule-based sentence segmentation with letter-addressable units."""
from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .corpus import SentenceUnit, letter_id
from .htmlnorm import NormalizedDocument

# A candidate boundary is terminal punctuation, optional closing quotes or
# brackets, then whitespace.  It only splits when the next character (after
# any opening quotes or brackets) is uppercase.
_BOUNDARY = re.compile(r"([.!?])([\"')\]]*)(\s+)")
_OPENERS = "([\"'"
_INITIAL = re.compile(r"^[A-Z]\.$")


def load_word_list(path: "Path | str") -> list[str]:
    """Read one entry per line, skipping blanks and # comments."""
    entries = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            entries.append(line)
    return entries


@lru_cache(maxsize=1)
def default_abbreviations() -> frozenset:
    text = resources.files("evidencekit.data").joinpath("abbreviations.txt").read_text("utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#"))


def _token_before(text: str, end: int) -> str:
    """The whitespace-delimited token ending at `end` (exclusive)."""
    start = end - 1
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    return text[start:end].lstrip(_OPENERS)


def split_sentences(text: str, abbreviations: frozenset) -> list:
    """Return (start, end) character spans of sentences within `text`."""
    cuts = []  # (sentence_end, next_start)
    for match in _BOUNDARY.finditer(text):
        nxt = match.end()
        while nxt < len(text) and text[nxt] in _OPENERS:
            nxt += 1
        if nxt >= len(text) or not text[nxt].isupper():
            continue
        if match.group(1) == ".":
            token = _token_before(text, match.start() + 1)
            if token in abbreviations or _INITIAL.match(token):
                continue
        cuts.append((match.start() + 1 + len(match.group(2)), match.end()))

    spans = []
    start = 0
    for end, next_start in cuts:
        if end > start:
            spans.append((start, end))
        start = next_start
    if start < len(text):
        spans.append((start, len(text)))
    if not spans:
        spans.append((0, len(text)))

    tightened = []
    for s, e in spans:
        while s < e and text[s].isspace():
            s += 1
        while e > s and text[e - 1].isspace():
            e -= 1
        if e > s:
            tightened.append((s, e))
    return tightened


def segment(doc: NormalizedDocument, abbreviations: "frozenset | None" = None) -> list:
    """Segment a normalized document into letter-addressed sentence units.

    Letters run A, B, ... Z, AA, ... in document order.  A unit inherits the
    hyperlink URLs whose spans intersect its character range; units never
    span block boundaries.
    """
    guard = default_abbreviations() if abbreviations is None else frozenset(abbreviations)
    units = []
    position = 0
    for block in doc.blocks:
        for s, e in split_sentences(block.text, guard):
            hrefs = []
            for span in block.links:
                if span.start < e and span.end > s and span.href not in hrefs:
                    hrefs.append(span.href)
            units.append(
                SentenceUnit(
                    article_url=doc.article_url,
                    letter_id=letter_id(position),
                    text=block.text[s:e],
                    hyperlink_urls=tuple(hrefs),
                )
            )
            position += 1
    return units
