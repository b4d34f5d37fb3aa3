"""HTML body normalization: block extraction with in-text hyperlink spans.

The parser walks the document once, keeping text from block-level elements
(paragraphs, list items, block quotes, headings) and discarding script,
style, navigation, and figure-caption content.  Whitespace is collapsed as
text accumulates so that hyperlink spans can be recorded directly in the
coordinates of the final block text.
"""
from __future__ import annotations

from dataclasses import dataclass
from html.parser import HTMLParser

BLOCK_TAGS = frozenset({"p", "li", "blockquote", "h1", "h2", "h3", "h4", "h5", "h6"})
SUPPRESS_TAGS = frozenset({"script", "style", "nav", "figcaption"})
MIN_BLOCK_CHARS = 3


class EmptyDocument(ValueError):
    """Raised when normalization leaves no usable text blocks."""


@dataclass(frozen=True)
class LinkSpan:
    """A hyperlink occupying [start, end) of its block's text."""

    href: str
    start: int
    end: int


@dataclass(frozen=True)
class TextBlock:
    text: str
    links: tuple = ()


@dataclass(frozen=True)
class NormalizedDocument:
    article_url: str
    blocks: tuple = ()


class _BlockParser(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.blocks: list[TextBlock] = []
        self._suppress_depth = 0
        self._in_block = False
        self._chars: list[str] = []
        self._pending_space = False
        self._spans: list[LinkSpan] = []
        self._open_href: "str | None" = None
        self._open_start = 0

    # -- position bookkeeping ------------------------------------------------

    def _next_position(self) -> int:
        # where the next non-space character will land
        pos = len(self._chars)
        if self._pending_space and pos > 0:
            pos += 1
        return pos

    def _append_text(self, data: str) -> None:
        for ch in data:
            if ch.isspace():
                self._pending_space = True
                continue
            if self._pending_space and self._chars:
                self._chars.append(" ")
            self._pending_space = False
            self._chars.append(ch)

    # -- block lifecycle -----------------------------------------------------

    def _open_block(self) -> None:
        if self._in_block:
            self._flush_block()
        self._in_block = True
        self._chars = []
        self._pending_space = False
        self._spans = []
        # a link opened outside or across blocks does not carry over
        self._open_href = None

    def _close_link(self) -> None:
        if self._open_href is None:
            return
        end = len(self._chars)
        if end > self._open_start:
            self._spans.append(LinkSpan(self._open_href, self._open_start, end))
        self._open_href = None

    def _flush_block(self) -> None:
        if not self._in_block:
            return
        self._close_link()
        text = "".join(self._chars)
        self._in_block = False
        self._chars = []
        self._pending_space = False
        spans, self._spans = self._spans, []
        if len(text) >= MIN_BLOCK_CHARS:
            self.blocks.append(TextBlock(text=text, links=tuple(spans)))

    # -- parser callbacks ----------------------------------------------------

    def handle_starttag(self, tag: str, attrs: list) -> None:
        if tag in SUPPRESS_TAGS:
            self._suppress_depth += 1
            return
        if self._suppress_depth:
            return
        if tag in BLOCK_TAGS:
            self._open_block()
        elif tag == "a" and self._in_block:
            self._close_link()
            href = dict(attrs).get("href") or ""
            if href:
                self._open_href = href
                self._open_start = self._next_position()
        elif tag == "br" and self._in_block:
            self._pending_space = True

    def handle_endtag(self, tag: str) -> None:
        if tag in SUPPRESS_TAGS:
            self._suppress_depth = max(0, self._suppress_depth - 1)
            return
        if self._suppress_depth:
            return
        if tag in BLOCK_TAGS:
            self._flush_block()
        elif tag == "a" and self._in_block:
            self._close_link()

    def handle_data(self, data: str) -> None:
        if self._suppress_depth or not self._in_block:
            return
        self._append_text(data)

    def close(self) -> None:
        super().close()
        self._flush_block()


def normalize_html(body_html: str, article_url: str = "") -> NormalizedDocument:
    """Parse an HTML body into ordered text blocks with hyperlink spans.

    Raises EmptyDocument when nothing usable survives.
    """
    parser = _BlockParser()
    parser.feed(body_html or "")
    parser.close()
    if not parser.blocks:
        raise EmptyDocument(f"no text blocks in document: {article_url or '<unknown>'}")
    return NormalizedDocument(article_url=article_url, blocks=tuple(parser.blocks))


def normalize_text(body_text: str, article_url: str = "") -> NormalizedDocument:
    """Build a document from pre-extracted plain text, split on blank lines."""
    blocks = []
    for chunk in (body_text or "").split("\n\n"):
        text = " ".join(chunk.split())
        if len(text) >= MIN_BLOCK_CHARS:
            blocks.append(TextBlock(text=text))
    if not blocks:
        raise EmptyDocument(f"no text blocks in document: {article_url or '<unknown>'}")
    return NormalizedDocument(article_url=article_url, blocks=tuple(blocks))
