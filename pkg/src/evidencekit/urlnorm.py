"""URL normalization for matching in-article hyperlinks against source lists."""
from __future__ import annotations

from urllib.parse import parse_qsl, urlencode, urlsplit

TRACKING_KEYS = frozenset({"fbclid", "gclid"})
TRACKING_PREFIXES = ("utm_",)


def _is_tracking_param(key: str) -> bool:
    lowered = key.lower()
    return lowered in TRACKING_KEYS or lowered.startswith(TRACKING_PREFIXES)


def normalize_url(url: str) -> str:
    """Canonical comparison form of a URL.

    Lowercases the host and drops the scheme, fragment, trailing slash, and
    tracking parameters (utm_*, fbclid, gclid).  The remaining query string
    is preserved.  Bare URLs without a scheme are accepted.
    """
    url = (url or "").strip()
    if not url:
        return ""
    parts = urlsplit(url)
    if not parts.scheme and not parts.netloc:
        # "example.org/path" parses as a bare path; re-split as network form
        parts = urlsplit("//" + url)
    host = (parts.hostname or "").lower()
    if parts.port is not None and parts.port not in (80, 443):
        host = f"{host}:{parts.port}"
    path = parts.path.rstrip("/")
    kept = [(k, v) for k, v in parse_qsl(parts.query, keep_blank_values=True) if not _is_tracking_param(k)]
    query = urlencode(kept)
    return host + path + (f"?{query}" if query else "")


def host_path(url: str) -> str:
    """Normalized URL with the query stripped, for the looser matching pass."""
    return normalize_url(url).split("?", 1)[0]


def urls_match(href: str, source_url: str) -> bool:
    """True when two URLs match under full normalization or by host+path."""
    left, right = normalize_url(href), normalize_url(source_url)
    if not left or not right:
        return False
    if left == right:
        return True
    return host_path(href) == host_path(source_url)
