"""Core record types, label schemas, and JSONL persistence.

Every on-disk artifact is a JSONL file: one UTF-8 JSON object per line,
with keys in declared field order.  Record types are frozen dataclasses
and safe to share across worker threads without coordination.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Iterator, Optional


class VerdictLabel(str, Enum):
    """Five-point rating scale attached to each article."""

    TRUE = "true"
    MOSTLY_TRUE = "mostly-true"
    HALF_TRUE = "half-true"
    MOSTLY_FALSE = "mostly-false"
    FALSE = "false"

    @property
    def display_phrase(self) -> str:
        """The label as it appears in article prose, e.g. "mostly false"."""
        return self.value.replace("-", " ")


class BinaryLabel(str, Enum):
    """Two-sided collapse of the five-point scale."""

    TRUE_SIDE = "true-side"
    FALSE_SIDE = "false-side"


class EvidenceType(str, Enum):
    QUOTE = "QUOTE"
    STATISTIC = "STATISTIC"
    DOCUMENT = "DOCUMENT"
    CONTEXT = "CONTEXT"
    OTHER = "OTHER"


FIVE_CLASS_LABELS = tuple(label.value for label in VerdictLabel)
BINARY_CLASS_LABELS = tuple(label.value for label in BinaryLabel)
EVIDENCE_TYPES = tuple(kind.value for kind in EvidenceType)

_TRUE_SIDE = frozenset({VerdictLabel.TRUE, VerdictLabel.MOSTLY_TRUE})
_FALSE_SIDE = frozenset({VerdictLabel.MOSTLY_FALSE, VerdictLabel.FALSE})


def collapse_verdict(verdict: "VerdictLabel | str") -> Optional[BinaryLabel]:
    """Collapse a five-point verdict to a side; half-true collapses to None."""
    label = VerdictLabel(verdict)
    if label in _TRUE_SIDE:
        return BinaryLabel.TRUE_SIDE
    if label in _FALSE_SIDE:
        return BinaryLabel.FALSE_SIDE
    return None


# --------------------------------------------------------------------------
# Letter identifiers


def letter_id(index: int) -> str:
    """Sentence identifier for a 0-based position: A..Z, then AA, AB, ...

    >>> letter_id(0), letter_id(25), letter_id(26)
    ('A', 'Z', 'AA')
    """
    if index < 0:
        raise ValueError(f"index must be non-negative, got {index}")
    chars = []
    n = index
    while True:
        n, rem = divmod(n, 26)
        chars.append(chr(ord("A") + rem))
        if n == 0:
            break
        n -= 1
    return "".join(reversed(chars))


def letter_index(letter: str) -> int:
    """Inverse of :func:`letter_id`."""
    if not letter or any(c < "A" or c > "Z" for c in letter):
        raise ValueError(f"not a letter identifier: {letter!r}")
    n = 0
    for c in letter:
        n = n * 26 + (ord(c) - ord("A") + 1)
    return n - 1


def letter_sort_key(letter: str) -> tuple[int, str]:
    """Sort key placing letter identifiers in document order (A < Z < AA)."""
    return (len(letter), letter)


def is_letter_id(value: str) -> bool:
    return bool(value) and all("A" <= c <= "Z" for c in value)


# --------------------------------------------------------------------------
# Records


@dataclass(frozen=True)
class SourceEntry:
    """One entry from an article's cited-sources list."""

    name: str
    url: Optional[str] = None
    normalized_url: Optional[str] = None

    def to_dict(self) -> dict:
        return {"name": self.name, "url": self.url, "normalized_url": self.normalized_url}

    @staticmethod
    def from_dict(data: dict) -> "SourceEntry":
        return SourceEntry(
            name=data.get("name", ""),
            url=data.get("url"),
            normalized_url=data.get("normalized_url"),
        )


@dataclass(frozen=True)
class ArticleRecord:
    """A crawled fact-check article plus its claim and metadata."""

    canonical_url: str
    claim_text: str
    verdict: str
    crawl_timestamp: str = ""
    tags: tuple = ()
    author_ids: tuple = ()
    speaker_id: Optional[str] = None
    sources: tuple = ()
    body_html: Optional[str] = None
    body_text: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "canonical_url": self.canonical_url,
            "claim_text": self.claim_text,
            "verdict": self.verdict,
            "crawl_timestamp": self.crawl_timestamp,
            "tags": list(self.tags),
            "author_ids": list(self.author_ids),
            "speaker_id": self.speaker_id,
            "sources": [s.to_dict() for s in self.sources],
            "body_html": self.body_html,
            "body_text": self.body_text,
        }

    @staticmethod
    def from_dict(data: dict) -> "ArticleRecord":
        return ArticleRecord(
            canonical_url=data.get("canonical_url", ""),
            claim_text=data.get("claim_text", ""),
            verdict=data.get("verdict", ""),
            crawl_timestamp=data.get("crawl_timestamp", ""),
            tags=tuple(data.get("tags") or ()),
            author_ids=tuple(data.get("author_ids") or ()),
            speaker_id=data.get("speaker_id"),
            sources=tuple(SourceEntry.from_dict(s) for s in data.get("sources") or ()),
            body_html=data.get("body_html"),
            body_text=data.get("body_text"),
        )


@dataclass(frozen=True)
class SentenceUnit:
    """One segmented sentence of an article, addressable by letter."""

    article_url: str
    letter_id: str
    text: str
    hyperlink_urls: tuple = ()
    is_verdict_sentence: bool = False

    def to_dict(self) -> dict:
        return {
            "article_url": self.article_url,
            "letter_id": self.letter_id,
            "text": self.text,
            "hyperlink_urls": list(self.hyperlink_urls),
            "is_verdict_sentence": self.is_verdict_sentence,
        }

    @staticmethod
    def from_dict(data: dict) -> "SentenceUnit":
        return SentenceUnit(
            article_url=data.get("article_url", ""),
            letter_id=data.get("letter_id", ""),
            text=data.get("text", ""),
            hyperlink_urls=tuple(data.get("hyperlink_urls") or ()),
            is_verdict_sentence=bool(data.get("is_verdict_sentence", False)),
        )


@dataclass(frozen=True)
class Anchor:
    """A sentence-level link that matched an entry in the sources list."""

    article_url: str
    letter_id: str
    matched_source: SourceEntry
    hyperlink_url: str

    def to_dict(self) -> dict:
        return {
            "article_url": self.article_url,
            "letter_id": self.letter_id,
            "matched_source": self.matched_source.to_dict(),
            "hyperlink_url": self.hyperlink_url,
        }

    @staticmethod
    def from_dict(data: dict) -> "Anchor":
        return Anchor(
            article_url=data.get("article_url", ""),
            letter_id=data.get("letter_id", ""),
            matched_source=SourceEntry.from_dict(data.get("matched_source") or {}),
            hyperlink_url=data.get("hyperlink_url", ""),
        )


VALID_MODES = ("A", "B", "C")


@dataclass(frozen=True)
class Premise:
    """An evidence unit produced by one of the extraction modes."""

    article_url: str
    mode: str
    premise_id: str
    letter_id: str
    text: str
    evidence_type: Optional[str] = None
    model_id: Optional[str] = None

    def __post_init__(self) -> None:
        if self.mode not in VALID_MODES:
            raise ValueError(f"unknown extraction mode: {self.mode!r}")
        if self.evidence_type is not None and self.evidence_type not in EVIDENCE_TYPES:
            raise ValueError(f"unknown evidence type: {self.evidence_type!r}")

    def to_dict(self) -> dict:
        return {
            "article_url": self.article_url,
            "mode": self.mode,
            "premise_id": self.premise_id,
            "letter_id": self.letter_id,
            "text": self.text,
            "evidence_type": self.evidence_type,
            "model_id": self.model_id,
        }

    @staticmethod
    def from_dict(data: dict) -> "Premise":
        return Premise(
            article_url=data.get("article_url", ""),
            mode=data.get("mode", ""),
            premise_id=data.get("premise_id", ""),
            letter_id=data.get("letter_id", ""),
            text=data.get("text", ""),
            evidence_type=data.get("evidence_type"),
            model_id=data.get("model_id"),
        )


def make_premise_id(article_url: str, mode: str, letter: str, seq: Optional[int] = None) -> str:
    """Stable premise identifier: sha1(url)[:12] + mode + letter [+ seq]."""
    digest = hashlib.sha1(article_url.encode("utf-8")).hexdigest()[:12]
    pid = f"{digest}:{mode}:{letter}"
    if seq is not None:
        pid = f"{pid}:{seq}"
    return pid


@dataclass(frozen=True)
class EvaluationRun:
    """One scored run: per-item records plus the aggregates computed from them."""

    run_id: str
    task: str
    mode: str
    config_digest: str
    per_item: tuple = ()
    aggregates: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# Corpus validation


@dataclass(frozen=True)
class ValidationIssue:
    canonical_url: str
    kind: str
    message: str


def validate_corpus(records: Iterable[ArticleRecord]) -> list[ValidationIssue]:
    """Check structural invariants; returns one issue per violation."""
    issues: list[ValidationIssue] = []
    seen: set[str] = set()
    for record in records:
        url = record.canonical_url
        if not url:
            issues.append(ValidationIssue(url, "empty-url", "canonical_url is empty"))
        elif url in seen:
            issues.append(ValidationIssue(url, "duplicate-url", "canonical_url appears more than once"))
        else:
            seen.add(url)
        if not record.claim_text.strip():
            issues.append(ValidationIssue(url, "empty-claim", "claim_text is empty"))
        if not (record.body_html or record.body_text):
            issues.append(ValidationIssue(url, "missing-body", "neither body_html nor body_text present"))
        if record.verdict not in FIVE_CLASS_LABELS:
            issues.append(
                ValidationIssue(url, "unknown-verdict", f"verdict {record.verdict!r} is not a known label")
            )
        for source in record.sources:
            if not source.name.strip():
                issues.append(ValidationIssue(url, "empty-source-name", "source entry has an empty name"))
    return issues


# --------------------------------------------------------------------------
# JSONL persistence


def dumps_line(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False)


def write_jsonl(path: "Path | str", rows: Iterable[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(dumps_line(row))
            handle.write("\n")


def read_jsonl(path: "Path | str") -> Iterator[dict]:
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                yield json.loads(line)


def write_articles(path: "Path | str", records: Iterable[ArticleRecord]) -> None:
    write_jsonl(path, (r.to_dict() for r in records))


def read_articles(path: "Path | str") -> list[ArticleRecord]:
    return [ArticleRecord.from_dict(d) for d in read_jsonl(path)]


def write_units(path: "Path | str", units: Iterable[SentenceUnit]) -> None:
    write_jsonl(path, (u.to_dict() for u in units))


def read_units(path: "Path | str") -> list[SentenceUnit]:
    return [SentenceUnit.from_dict(d) for d in read_jsonl(path)]


def write_anchors(path: "Path | str", anchors: Iterable[Anchor]) -> None:
    write_jsonl(path, (a.to_dict() for a in anchors))


def read_anchors(path: "Path | str") -> list[Anchor]:
    return [Anchor.from_dict(d) for d in read_jsonl(path)]


def write_premises(path: "Path | str", premises: Iterable[Premise]) -> None:
    write_jsonl(path, (p.to_dict() for p in premises))


def read_premises(path: "Path | str") -> list[Premise]:
    return [Premise.from_dict(d) for d in read_jsonl(path)]


def write_run(path: "Path | str", run: EvaluationRun) -> None:
    """Persist a run as a header line, item lines, then an aggregates line."""
    rows: list[dict] = [
        {
            "record": "run",
            "run_id": run.run_id,
            "task": run.task,
            "mode": run.mode,
            "config_digest": run.config_digest,
        }
    ]
    for item in run.per_item:
        rows.append({"record": "item", **item})
    rows.append({"record": "aggregates", **run.aggregates})
    write_jsonl(path, rows)


def read_run(path: "Path | str") -> EvaluationRun:
    header: Optional[dict] = None
    items: list[dict] = []
    aggregates: dict = {}
    for row in read_jsonl(path):
        kind = row.pop("record", None)
        if kind == "run":
            header = row
        elif kind == "item":
            items.append(row)
        elif kind == "aggregates":
            aggregates = row
        else:
            raise ValueError(f"unknown record kind in run file: {kind!r}")
    if header is None:
        raise ValueError(f"run file has no header line: {path}")
    return EvaluationRun(
        run_id=header.get("run_id", ""),
        task=header.get("task", ""),
        mode=header.get("mode", ""),
        config_digest=header.get("config_digest", ""),
        per_item=tuple(items),
        aggregates=aggregates,
    )
