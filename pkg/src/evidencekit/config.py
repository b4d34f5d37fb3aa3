"""Flat key=value configuration with override merging and a stable digest."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional


class ConfigError(ValueError):
    """The configuration cannot be parsed or resolved."""


DEFAULTS = {
    "corpus_dir": "corpus",
    "out_dir": "out",
    "ingest.leak_patterns": "",
    "ingest.abbreviations": "",
    "backend.base_url": "",
    "backend.model_id": "stub",
    "backend.timeout_ms": "30000",
    "backend.max_inflight": "4",
    "backend.rate_per_s": "0",
    "backend.auth_env": "",
    "backend.max_retries": "2",
    "entailment.base_url": "lexical://",
    "entailment.timeout_ms": "30000",
    "entailment.batch_size": "16",
    "entailment.max_retries": "2",
    "retrieval.k1": "1.5",
    "retrieval.b": "0.75",
    "retrieval.mrr_k": "10",
    "retrieval.ndcg_ks": "3,10",
    "retrieval.recall_ks": "1,3,10",
    "verification.labels": "five",
    "extract.failure_threshold": "0.5",
    "extract.workers": "1",
    "run_seed": "0",
}

LABEL_SCHEMES = ("binary", "five")


def parse_config_file(path: "Path | str") -> dict:
    """Parse `key = value` lines; blanks and # comments are skipped."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values: dict = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
        key, value = stripped.split("=", 1)
        values[key.strip()] = value.strip()
    return values


@dataclass(frozen=True)
class PipelineConfig:
    corpus_dir: Path
    out_dir: Path
    leak_patterns_path: Optional[Path]
    abbreviations_path: Optional[Path]
    backend_base_url: str
    backend_model_id: str
    backend_timeout_ms: int
    backend_max_inflight: int
    backend_rate_per_s: float
    backend_auth_env: str
    backend_max_retries: int
    entailment_base_url: str
    entailment_timeout_ms: int
    entailment_batch_size: int
    entailment_max_retries: int
    retrieval_k1: float
    retrieval_b: float
    retrieval_mrr_k: int
    retrieval_ndcg_ks: tuple
    retrieval_recall_ks: tuple
    verification_labels: str
    extract_failure_threshold: float
    extract_workers: int
    run_seed: int
    digest: str
    resolved: tuple

    @property
    def digest8(self) -> str:
        return self.digest[:8]


def _to_int(values: dict, key: str) -> int:
    try:
        return int(values[key])
    except ValueError as exc:
        raise ConfigError(f"{key} must be an integer, got {values[key]!r}") from exc


def _to_float(values: dict, key: str) -> float:
    try:
        return float(values[key])
    except ValueError as exc:
        raise ConfigError(f"{key} must be a number, got {values[key]!r}") from exc


def _to_int_tuple(values: dict, key: str) -> tuple:
    raw = values[key]
    try:
        items = tuple(int(part.strip()) for part in raw.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"{key} must be comma-separated integers, got {raw!r}") from exc
    if not items:
        raise ConfigError(f"{key} must list at least one cutoff")
    return items


def config_digest(values: dict) -> str:
    """sha256 over sorted key=value lines of the fully resolved mapping."""
    canonical = "\n".join(f"{key}={values[key]}" for key in sorted(values))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(path: "Path | str | None" = None, overrides: "dict | None" = None) -> PipelineConfig:
    """Resolve defaults, then the config file, then explicit overrides."""
    values = dict(DEFAULTS)
    for layer in (parse_config_file(path) if path else {}, overrides or {}):
        for key, value in layer.items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown configuration key: {key!r}")
            values[key] = str(value)

    labels = values["verification.labels"]
    if labels not in LABEL_SCHEMES:
        raise ConfigError(f"verification.labels must be one of {LABEL_SCHEMES}, got {labels!r}")
    threshold = _to_float(values, "extract.failure_threshold")
    if not 0.0 <= threshold <= 1.0:
        raise ConfigError("extract.failure_threshold must be within [0, 1]")
    workers = _to_int(values, "extract.workers")
    if workers < 1:
        raise ConfigError("extract.workers must be at least 1")

    return PipelineConfig(
        corpus_dir=Path(values["corpus_dir"]),
        out_dir=Path(values["out_dir"]),
        leak_patterns_path=Path(values["ingest.leak_patterns"]) if values["ingest.leak_patterns"] else None,
        abbreviations_path=Path(values["ingest.abbreviations"]) if values["ingest.abbreviations"] else None,
        backend_base_url=values["backend.base_url"],
        backend_model_id=values["backend.model_id"],
        backend_timeout_ms=_to_int(values, "backend.timeout_ms"),
        backend_max_inflight=_to_int(values, "backend.max_inflight"),
        backend_rate_per_s=_to_float(values, "backend.rate_per_s"),
        backend_auth_env=values["backend.auth_env"],
        backend_max_retries=_to_int(values, "backend.max_retries"),
        entailment_base_url=values["entailment.base_url"],
        entailment_timeout_ms=_to_int(values, "entailment.timeout_ms"),
        entailment_batch_size=_to_int(values, "entailment.batch_size"),
        entailment_max_retries=_to_int(values, "entailment.max_retries"),
        retrieval_k1=_to_float(values, "retrieval.k1"),
        retrieval_b=_to_float(values, "retrieval.b"),
        retrieval_mrr_k=_to_int(values, "retrieval.mrr_k"),
        retrieval_ndcg_ks=_to_int_tuple(values, "retrieval.ndcg_ks"),
        retrieval_recall_ks=_to_int_tuple(values, "retrieval.recall_ks"),
        verification_labels=labels,
        extract_failure_threshold=threshold,
        extract_workers=workers,
        run_seed=_to_int(values, "run_seed"),
        digest=config_digest(values),
        resolved=tuple(sorted(values.items())),
    )
