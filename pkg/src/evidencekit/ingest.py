"""Per-article ingestion: verdict-sentence marking and anchor extraction."""
from __future__ import annotations

import logging
import re
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .corpus import Anchor, ArticleRecord, SentenceUnit, SourceEntry, VerdictLabel
from .htmlnorm import normalize_html, normalize_text
from .segment import load_word_list, segment
from .urlnorm import host_path, normalize_url

logger = logging.getLogger(__name__)

DEFAULT_RATING_TRIGGERS = ("we rate", "our ruling", "rates this")

# A rating-label phrase only marks a sentence when it sits this close to a
# trigger phrase; bare occurrences ("the false alarm rate") stay unmarked.
LABEL_TRIGGER_WINDOW = 40

LABEL_PHRASES = tuple(label.display_phrase for label in VerdictLabel)


@lru_cache(maxsize=1)
def default_leak_patterns() -> tuple:
    text = resources.files("evidencekit.data").joinpath("leak_patterns.txt").read_text("utf-8")
    return tuple(line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#"))


def load_leak_patterns(path: "Path | str | None" = None) -> tuple:
    if path is None:
        return default_leak_patterns()
    return tuple(load_word_list(path))


def _find_all(haystack: str, needle: str) -> list:
    spans = []
    start = 0
    while True:
        idx = haystack.find(needle, start)
        if idx < 0:
            return spans
        spans.append((idx, idx + len(needle)))
        start = idx + 1


def _label_spans(lowered: str) -> list:
    spans = []
    for phrase in LABEL_PHRASES:
        pattern = r"\b" + re.escape(phrase) + r"\b"
        for match in re.finditer(pattern, lowered):
            spans.append((match.start(), match.end()))
    return spans


def _gap(a: tuple, b: tuple) -> int:
    if a[1] <= b[0]:
        return b[0] - a[1]
    if b[1] <= a[0]:
        return a[0] - b[1]
    return 0


def mark_verdict_sentences(
    units: list,
    verdict: "VerdictLabel | str",
    patterns: "tuple | None" = None,
    triggers: tuple = DEFAULT_RATING_TRIGGERS,
) -> list:
    """Flag sentences that state the article's own ruling.

    A unit is flagged when it contains any configured pattern
    (case-insensitive substring), or when a rating-label phrase occurs
    within LABEL_TRIGGER_WINDOW characters of a trigger phrase.
    """
    VerdictLabel(verdict)  # reject unknown verdicts early
    if patterns is None:
        patterns = default_leak_patterns()
    lowered_patterns = tuple(p.lower() for p in patterns)
    lowered_triggers = tuple(t.lower() for t in triggers)

    marked = []
    for unit in units:
        lowered = unit.text.lower()
        flagged = any(p in lowered for p in lowered_patterns)
        if not flagged:
            trigger_spans = [s for t in lowered_triggers for s in _find_all(lowered, t)]
            if trigger_spans:
                flagged = any(
                    _gap(t_span, l_span) <= LABEL_TRIGGER_WINDOW
                    for t_span in trigger_spans
                    for l_span in _label_spans(lowered)
                )
        if flagged == unit.is_verdict_sentence:
            marked.append(unit)
        else:
            marked.append(
                SentenceUnit(
                    article_url=unit.article_url,
                    letter_id=unit.letter_id,
                    text=unit.text,
                    hyperlink_urls=unit.hyperlink_urls,
                    is_verdict_sentence=flagged,
                )
            )
    return marked


def extract_anchors(units: list, sources: tuple) -> list:
    """Match sentence hyperlinks against the article's source list.

    A hyperlink matches a source when the two URLs are equal after
    normalization, or failing that when host and path agree.  At most one
    anchor is created per (unit, source) pair, and verdict sentences never
    anchor evidence.
    """
    prepared = []
    for source in sources:
        if not source.url:
            continue
        prepared.append(
            (
                source,
                normalize_url(source.url),
                host_path(source.url),
            )
        )

    anchors = []
    for unit in units:
        if unit.is_verdict_sentence:
            continue
        matched_sources = set()
        for href in unit.hyperlink_urls:
            href_norm = normalize_url(href)
            if not href_norm:
                continue
            href_hp = host_path(href)
            for idx, (source, source_norm, source_hp) in enumerate(prepared):
                if idx in matched_sources:
                    continue
                if href_norm == source_norm or href_hp == source_hp:
                    matched_sources.add(idx)
                    anchors.append(
                        Anchor(
                            article_url=unit.article_url,
                            letter_id=unit.letter_id,
                            matched_source=SourceEntry(
                                name=source.name,
                                url=source.url,
                                normalized_url=source_norm,
                            ),
                            hyperlink_url=href,
                        )
                    )
    return anchors


def ingest_article(
    record: ArticleRecord,
    patterns: "tuple | None" = None,
    abbreviations: "frozenset | None" = None,
    triggers: tuple = DEFAULT_RATING_TRIGGERS,
) -> tuple:
    """Normalize, segment, mark, and anchor one article.

    Returns (units, anchors).  Raises EmptyDocument when the body yields no
    usable text.
    """
    if record.body_html:
        doc = normalize_html(record.body_html, article_url=record.canonical_url)
    else:
        doc = normalize_text(record.body_text or "", article_url=record.canonical_url)
    units = segment(doc, abbreviations)
    units = mark_verdict_sentences(units, record.verdict, patterns, triggers)
    anchors = extract_anchors(units, record.sources)
    return units, anchors
