"""Schema-validated text generation with retries, rate caps, and a stub backend.

Backends expose `complete(request, system_prompt, user_prompt) -> str` and a
`model_id`.  The module-level :func:`generate` drives the retry loop: it
extracts the first balanced JSON payload from the raw response, validates it
against the request's schema, and re-asks with a corrective instruction when
validation fails.
"""
from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Optional

import requests

from .corpus import EVIDENCE_TYPES, is_letter_id

logger = logging.getLogger(__name__)

SCHEMA_IDS = ("decontextualize_v1", "open_extract_v1", "verify_v1")


class TransportError(Exception):
    """A single backend call failed (network, HTTP status, bad envelope)."""


class TransportFailure(Exception):
    """All attempts failed at the transport level."""

    def __init__(self, message: str, raw_text: Optional[str], attempts: int):
        super().__init__(message)
        self.raw_text = raw_text
        self.attempts = attempts


class SchemaFailure(Exception):
    """No attempt produced a payload that validates against the schema."""

    def __init__(self, message: str, raw_text: Optional[str], attempts: int):
        super().__init__(message)
        self.raw_text = raw_text
        self.attempts = attempts


class SchemaValidationError(ValueError):
    """One response failed validation (internal, drives a retry)."""


class BackendConfigError(ValueError):
    """The backend cannot be constructed from the given settings."""


@dataclass(frozen=True)
class SchemaContext:
    """Request-specific bounds the validators enforce."""

    allowed_letters: Optional[frozenset] = None
    min_items: int = 1
    max_items: Optional[int] = None
    allowed_labels: Optional[tuple] = None


@dataclass(frozen=True)
class GenerationRequest:
    system_prompt: str
    user_prompt: str
    schema_id: str
    temperature: float = 0.0
    max_retries: int = 2
    context: Optional[SchemaContext] = None


@dataclass(frozen=True)
class GenerationResult:
    raw_text: str
    parsed: Any
    attempts: int
    model_id: str
    latency_ms: float


# --------------------------------------------------------------------------
# JSON payload extraction


def _scan_balanced(text: str, start: int) -> Optional[int]:
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch in "{[":
            depth += 1
        elif ch in "}]":
            depth -= 1
            if depth == 0:
                return i + 1
            if depth < 0:
                return None
    return None


def extract_json(text: str) -> Any:
    """First balanced top-level JSON object or array in `text`, or None."""
    idx = 0
    while idx < len(text):
        if text[idx] in "{[":
            end = _scan_balanced(text, idx)
            if end is not None:
                try:
                    return json.loads(text[idx:end])
                except json.JSONDecodeError:
                    pass
        idx += 1
    return None


# --------------------------------------------------------------------------
# Validators


def _validate_extraction_item(value: Any, allowed_letters: Optional[frozenset]) -> dict:
    if not isinstance(value, dict):
        raise SchemaValidationError("expected a JSON object per premise")
    letter = value.get("letter")
    if not isinstance(letter, str) or not is_letter_id(letter):
        raise SchemaValidationError(f"letter must be an uppercase letter id, got {letter!r}")
    if allowed_letters is not None and letter not in allowed_letters:
        raise SchemaValidationError(f"letter {letter} does not occur in the article")
    text = value.get("decontextualized")
    if not isinstance(text, str) or not text.strip():
        raise SchemaValidationError("decontextualized must be a non-empty string")
    category = value.get("category")
    if category not in EVIDENCE_TYPES:
        raise SchemaValidationError(f"category must be one of {', '.join(EVIDENCE_TYPES)}")
    return {"letter": letter, "decontextualized": text.strip(), "category": category}


def validate_payload(schema_id: str, payload: Any, context: Optional[SchemaContext]) -> Any:
    """Validate and normalize a parsed payload; raises SchemaValidationError."""
    ctx = context or SchemaContext()
    if schema_id == "decontextualize_v1":
        return _validate_extraction_item(payload, ctx.allowed_letters)
    if schema_id == "open_extract_v1":
        if not isinstance(payload, list):
            raise SchemaValidationError("expected a JSON array of premises")
        floor = max(1, ctx.min_items)
        if len(payload) < floor:
            raise SchemaValidationError(f"expected at least {floor} premises, got {len(payload)}")
        if ctx.max_items is not None and len(payload) > ctx.max_items:
            raise SchemaValidationError(f"expected at most {ctx.max_items} premises, got {len(payload)}")
        return [_validate_extraction_item(item, ctx.allowed_letters) for item in payload]
    if schema_id == "verify_v1":
        if not isinstance(payload, dict):
            raise SchemaValidationError("expected a JSON object")
        verdict = payload.get("verdict")
        if not isinstance(verdict, str) or not verdict:
            raise SchemaValidationError("verdict must be a non-empty string")
        if ctx.allowed_labels is not None and verdict not in ctx.allowed_labels:
            raise SchemaValidationError(f"verdict must be one of {', '.join(ctx.allowed_labels)}")
        justification = payload.get("justification")
        if not isinstance(justification, str):
            raise SchemaValidationError("justification must be a string")
        cited = payload.get("cited_ids")
        if not isinstance(cited, list) or not all(isinstance(c, str) for c in cited):
            raise SchemaValidationError("cited_ids must be a list of strings")
        return {"verdict": verdict, "justification": justification, "cited_ids": list(cited)}
    raise ValueError(f"unknown schema id: {schema_id!r}")


# --------------------------------------------------------------------------
# Retry loop


def generate(request: GenerationRequest, backend: Any) -> GenerationResult:
    """Run one schema-validated generation with up to max_retries re-asks."""
    if request.schema_id not in SCHEMA_IDS:
        raise ValueError(f"unknown schema id: {request.schema_id!r}")
    total = request.max_retries + 1
    user_prompt = request.user_prompt
    last_raw: Optional[str] = None
    attempts = 0
    while attempts < total:
        attempts += 1
        started = time.monotonic()
        try:
            raw = backend.complete(request, request.system_prompt, user_prompt)
        except TransportError as exc:
            logger.warning("transport error on attempt %d: %s", attempts, exc)
            if attempts >= total:
                raise TransportFailure(str(exc), last_raw, attempts) from exc
            continue
        latency_ms = (time.monotonic() - started) * 1000.0
        last_raw = raw
        payload = extract_json(raw)
        if payload is None:
            error = "no JSON payload found in response"
        else:
            try:
                parsed = validate_payload(request.schema_id, payload, request.context)
                return GenerationResult(
                    raw_text=raw,
                    parsed=parsed,
                    attempts=attempts,
                    model_id=getattr(backend, "model_id", "unknown"),
                    latency_ms=latency_ms,
                )
            except SchemaValidationError as exc:
                error = str(exc)
        logger.warning("invalid response on attempt %d: %s", attempts, error)
        if attempts >= total:
            raise SchemaFailure(error, last_raw, attempts)
        user_prompt = (
            request.user_prompt
            + f"\n\nYour previous response was rejected ({error}). "
            "Return only a JSON payload that matches the requested schema."
        )
    raise SchemaFailure("no attempts were made", last_raw, attempts)


# --------------------------------------------------------------------------
# Backends


_CLAIM_LINE = re.compile(r"^Claim: (.*)$", re.MULTILINE)
_TARGET_LETTER_LINE = re.compile(r"^Target letter: (.*)$", re.MULTILINE)
_TARGET_SENTENCE_LINE = re.compile(r"^Target sentence: (.*)$", re.MULTILINE)
_LABELED_LINE = re.compile(r"^([A-Z]+): (.*)$", re.MULTILINE)
_EXTRACT_BOUNDS = re.compile(r"Extract (\d+)–(\d+)")
_ALLOWED_LABELS_LINE = re.compile(r"^Allowed labels: (.*)$", re.MULTILINE)


class StubBackend:
    """Deterministic offline backend used for tests and dry runs.

    It parses the prompt formats this package emits and answers with
    minimal schema-conforming payloads: decontextualization prepends the
    claim's first five words to the target sentence, open extraction copies
    the first `min_n` labeled sentences, and verification picks the first
    allowed label while citing every shown premise.
    """

    model_id = "stub"

    def complete(self, request: GenerationRequest, system_prompt: str, user_prompt: str) -> str:
        if request.schema_id == "decontextualize_v1":
            return self._decontextualize(user_prompt)
        if request.schema_id == "open_extract_v1":
            return self._open_extract(system_prompt, user_prompt)
        if request.schema_id == "verify_v1":
            return self._verify(system_prompt, user_prompt)
        raise TransportError(f"stub cannot serve schema {request.schema_id!r}")

    @staticmethod
    def _claim_prefix(user_prompt: str) -> str:
        match = _CLAIM_LINE.search(user_prompt)
        words = match.group(1).split() if match else []
        return " ".join(words[:5])

    def _decontextualize(self, user_prompt: str) -> str:
        letter_match = _TARGET_LETTER_LINE.search(user_prompt)
        sentence_match = _TARGET_SENTENCE_LINE.search(user_prompt)
        letter = letter_match.group(1).strip() if letter_match else "A"
        sentence = sentence_match.group(1) if sentence_match else ""
        prefix = self._claim_prefix(user_prompt)
        text = f"{prefix}, {sentence}" if prefix else sentence
        return json.dumps(
            {"letter": letter, "decontextualized": text, "category": "CONTEXT"},
            ensure_ascii=False,
        )

    def _open_extract(self, system_prompt: str, user_prompt: str) -> str:
        bounds = _EXTRACT_BOUNDS.search(system_prompt)
        min_n = int(bounds.group(1)) if bounds else 1
        prefix = self._claim_prefix(user_prompt)
        items = []
        for letter, sentence in _LABELED_LINE.findall(user_prompt)[:min_n]:
            text = f"{prefix}, {sentence}" if prefix else sentence
            items.append({"letter": letter, "decontextualized": text, "category": "CONTEXT"})
        return json.dumps(items, ensure_ascii=False)

    def _verify(self, system_prompt: str, user_prompt: str) -> str:
        labels_match = _ALLOWED_LABELS_LINE.search(system_prompt)
        labels = [l.strip() for l in labels_match.group(1).split(",")] if labels_match else []
        verdict = labels[0] if labels else ""
        cited = [letter for letter, _ in _LABELED_LINE.findall(user_prompt)]
        return json.dumps(
            {"verdict": verdict, "justification": "stub ruling from shown premises", "cited_ids": cited},
            ensure_ascii=False,
        )


class HTTPBackend:
    """Chat-style HTTP backend.

    Sends {model, temperature, messages} and accepts either a chat response
    ({"choices": [{"message": {"content": ...}}]}) or a bare {"text": ...}.
    The bearer token is read from the environment variable named by
    `auth_env`; tokens never appear in configuration files.
    """

    def __init__(
        self,
        base_url: str,
        model_id: str,
        timeout_ms: int = 30000,
        auth_env: Optional[str] = None,
        session: Optional[requests.Session] = None,
    ):
        if not base_url:
            raise BackendConfigError("backend base_url is required")
        self.base_url = base_url
        self.model_id = model_id
        self.timeout_s = timeout_ms / 1000.0
        self._headers = {"Content-Type": "application/json"}
        if auth_env:
            token = os.environ.get(auth_env)
            if not token:
                raise BackendConfigError(f"environment variable {auth_env} is not set")
            self._headers["Authorization"] = f"Bearer {token}"
        self._session = session or requests.Session()

    def complete(self, request: GenerationRequest, system_prompt: str, user_prompt: str) -> str:
        body = {
            "model": self.model_id,
            "temperature": request.temperature,
            "messages": [
                {"role": "system", "content": system_prompt},
                {"role": "user", "content": user_prompt},
            ],
        }
        try:
            response = self._session.post(
                self.base_url, json=body, headers=self._headers, timeout=self.timeout_s
            )
            response.raise_for_status()
            data = response.json()
        except (requests.RequestException, ValueError) as exc:
            raise TransportError(str(exc)) from exc
        try:
            if "choices" in data:
                return data["choices"][0]["message"]["content"]
            return data["text"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"unexpected response envelope: {exc}") from exc


class Gateway:
    """Backend wrapper enforcing an in-flight cap and a per-second rate."""

    def __init__(self, backend: Any, max_inflight: int = 4, rate_per_s: float = 0.0):
        if max_inflight < 1:
            raise BackendConfigError("max_inflight must be at least 1")
        self._backend = backend
        self._semaphore = threading.BoundedSemaphore(max_inflight)
        self._interval = 1.0 / rate_per_s if rate_per_s > 0 else 0.0
        self._pace_lock = threading.Lock()
        self._next_start = 0.0

    @property
    def model_id(self) -> str:
        return getattr(self._backend, "model_id", "unknown")

    def _pace(self) -> None:
        if not self._interval:
            return
        with self._pace_lock:
            now = time.monotonic()
            wait = max(0.0, self._next_start - now)
            self._next_start = max(now, self._next_start) + self._interval
        if wait:
            time.sleep(wait)

    def complete(self, request: GenerationRequest, system_prompt: str, user_prompt: str) -> str:
        self._pace()
        with self._semaphore:
            return self._backend.complete(request, system_prompt, user_prompt)

    def generate(self, request: GenerationRequest) -> GenerationResult:
        return generate(request, self)
