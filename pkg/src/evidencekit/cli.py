"""Command-line pipeline: ingest, extract, score, and report."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .config import ConfigError, PipelineConfig, load_config
from .corpus import (
    BINARY_CLASS_LABELS,
    FIVE_CLASS_LABELS,
    EvaluationRun,
    collapse_verdict,
    letter_sort_key,
    read_anchors,
    read_articles,
    read_premises,
    read_run,
    read_units,
    validate_corpus,
    write_anchors,
    write_premises,
    write_run,
    write_units,
)
from .extraction import LabeledArticle, mode_a, mode_b, mode_c, overlap_report
from .faithfulness import EmptyDataset, dfs_corpus, entailment_backend_from_url
from .gateway import (
    BackendConfigError,
    Gateway,
    HTTPBackend,
    SchemaFailure,
    StubBackend,
    TransportFailure,
)
from .htmlnorm import EmptyDocument
from .ingest import ingest_article, load_leak_patterns
from .retrieval import (
    EmptyCorpus,
    EmptyGold,
    QuerySpec,
    build_index,
    evaluate_retrieval,
    gold_premises_by_article,
)
from .segment import load_word_list
from .verification import EmptyGiven, coverage_aggregate, macro_f1, verify_one

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_PARTIAL = 2


class InputError(ValueError):
    """Missing or unusable pipeline inputs."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors by default; keep 2 reserved for
    # partial pipeline failures and report usage problems as input errors.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="path to a key=value configuration file")
    common.add_argument("--corpus-dir", help="directory containing articles.jsonl")
    common.add_argument("--out-dir", help="directory for pipeline outputs")

    parser = _Parser(prog="evidencekit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_ingest = sub.add_parser("ingest", parents=[common], help="segment articles and extract anchors")
    p_ingest.add_argument("--leak-patterns", help="file of ruling phrases, one per line")
    p_ingest.add_argument("--abbreviations", help="file of sentence-splitting guards, one per line")

    p_extract = sub.add_parser("extract", parents=[common], help="produce premises for one mode")
    p_extract.add_argument("--mode", required=True, choices=["A", "B", "C"])
    p_extract.add_argument("--workers", type=int, help="articles processed in parallel")
    p_extract.add_argument("--backend-url", help="generation backend (stub:// or http(s)://)")

    p_score = sub.add_parser("score", parents=[common], help="evaluate premises for one task")
    p_score.add_argument("--task", required=True, choices=["dfs", "retrieval", "verification"])
    p_score.add_argument("--mode", required=True, choices=["A", "B", "C"])
    p_score.add_argument("--labels", choices=["binary", "five"])
    p_score.add_argument("--k1", type=float, help="BM25 k1")
    p_score.add_argument("--b", type=float, help="BM25 b")
    p_score.add_argument("--mrr-k", type=int, help="MRR cutoff")
    p_score.add_argument("--ndcg-ks", help="comma-separated nDCG cutoffs")
    p_score.add_argument("--recall-ks", help="comma-separated recall cutoffs")
    p_score.add_argument("--backend-url", help="generation backend (stub:// or http(s)://)")
    p_score.add_argument("--entailment-url", help="entailment backend (lexical://, constant://X, http(s)://)")

    p_report = sub.add_parser("report", parents=[common], help="tabulate and render finished runs")
    p_report.add_argument("--run", action="append", required=True, help="run id (repeatable)")
    return parser


_FLAG_TO_KEY = {
    "corpus_dir": "corpus_dir",
    "out_dir": "out_dir",
    "leak_patterns": "ingest.leak_patterns",
    "abbreviations": "ingest.abbreviations",
    "workers": "extract.workers",
    "backend_url": "backend.base_url",
    "entailment_url": "entailment.base_url",
    "labels": "verification.labels",
    "k1": "retrieval.k1",
    "b": "retrieval.b",
    "mrr_k": "retrieval.mrr_k",
    "ndcg_ks": "retrieval.ndcg_ks",
    "recall_ks": "retrieval.recall_ks",
}


def _overrides(args: argparse.Namespace) -> dict:
    overrides = {}
    for attr, key in _FLAG_TO_KEY.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = str(value)
    return overrides


def _generation_backend(cfg: PipelineConfig):
    url = cfg.backend_base_url
    if not url:
        raise BackendConfigError(
            "backend.base_url is required for this command (use stub:// for the offline stub)"
        )
    if url == "stub" or url.startswith("stub://"):
        return StubBackend()
    if url.startswith(("http://", "https://")):
        return HTTPBackend(
            base_url=url,
            model_id=cfg.backend_model_id,
            timeout_ms=cfg.backend_timeout_ms,
            auth_env=cfg.backend_auth_env or None,
        )
    raise BackendConfigError(f"unsupported backend.base_url scheme: {url!r}")


def _print_aggregates(aggregates: dict) -> None:
    for key, value in aggregates.items():
        if value is None:
            shown = "-"
        elif isinstance(value, float):
            shown = f"{value:.4f}"
        else:
            shown = str(value)
        print(f"  {key:<20} {shown}")


# --------------------------------------------------------------------------
# ingest


def cmd_ingest(cfg: PipelineConfig) -> int:
    articles_path = cfg.corpus_dir / "articles.jsonl"
    if not articles_path.is_file():
        raise InputError(f"corpus file not found: {articles_path}")
    records = read_articles(articles_path)
    if not records:
        raise InputError(f"corpus is empty: {articles_path}")
    issues = validate_corpus(records)
    if issues:
        for issue in issues:
            logger.error("corpus %s: %s: %s", issue.canonical_url or "<missing url>", issue.kind, issue.message)
        raise InputError(f"corpus failed validation with {len(issues)} issue(s)")

    patterns = load_leak_patterns(cfg.leak_patterns_path)
    abbreviations = (
        frozenset(load_word_list(cfg.abbreviations_path)) if cfg.abbreviations_path else None
    )

    units_out = []
    anchors_out = []
    kept = 0
    excluded_no_anchor = 0
    excluded_empty = 0
    verdict_counts: dict = {}
    for record in records:
        try:
            units, anchors = ingest_article(record, patterns, abbreviations)
        except EmptyDocument:
            logger.warning("excluding %s: body yields no text", record.canonical_url)
            excluded_empty += 1
            continue
        if not anchors:
            excluded_no_anchor += 1
            continue
        kept += 1
        units_out.extend(units)
        anchors_out.extend(anchors)
        verdict_counts[record.verdict] = verdict_counts.get(record.verdict, 0) + 1

    out_dir = cfg.out_dir
    write_units(out_dir / "units.jsonl", units_out)
    write_anchors(out_dir / "anchors.jsonl", anchors_out)
    stats = {
        "n_articles_input": len(records),
        "n_articles_kept": kept,
        "n_excluded_empty_body": excluded_empty,
        "n_excluded_no_anchor": excluded_no_anchor,
        "n_units": len(units_out),
        "n_anchors": len(anchors_out),
        "n_verdict_sentences": sum(1 for u in units_out if u.is_verdict_sentence),
        "verdict_distribution": {
            label: count for label, count in sorted(verdict_counts.items())
        },
    }
    stats_path = out_dir / "stats.json"
    stats_path.parent.mkdir(parents=True, exist_ok=True)
    stats_path.write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    print(
        f"ingest: kept {kept}/{len(records)} articles, "
        f"{len(units_out)} units, {len(anchors_out)} anchors"
    )
    print(
        f"  excluded: {excluded_no_anchor} without anchors, {excluded_empty} with empty bodies"
    )
    print(f"  wrote {out_dir / 'units.jsonl'}, {out_dir / 'anchors.jsonl'}, {stats_path}")
    return EXIT_OK


# --------------------------------------------------------------------------
# extract


def _grouped(items: list, key) -> dict:
    groups: dict = {}
    for item in items:
        groups.setdefault(key(item), []).append(item)
    return groups


def cmd_extract(cfg: PipelineConfig, mode: str) -> int:
    units_path = cfg.out_dir / "units.jsonl"
    anchors_path = cfg.out_dir / "anchors.jsonl"
    if not units_path.is_file() or not anchors_path.is_file():
        raise InputError(f"no ingest outputs under {cfg.out_dir}; run ingest first")
    articles_path = cfg.corpus_dir / "articles.jsonl"
    if not articles_path.is_file():
        raise InputError(f"corpus file not found: {articles_path}")

    units = read_units(units_path)
    anchors = read_anchors(anchors_path)
    records = {r.canonical_url: r for r in read_articles(articles_path)}
    units_by_url = _grouped(units, lambda u: u.article_url)
    anchors_by_url = _grouped(anchors, lambda a: a.article_url)
    order = list(units_by_url)
    missing = [url for url in order if url not in records]
    if missing:
        raise InputError(f"{len(missing)} ingested article(s) missing from the corpus, e.g. {missing[0]}")

    gateway = None
    if mode in ("B", "C"):
        gateway = Gateway(
            _generation_backend(cfg),
            max_inflight=cfg.backend_max_inflight,
            rate_per_s=cfg.backend_rate_per_s,
        )

    failures = []

    def process(url: str) -> tuple:
        article_units = units_by_url[url]
        article_anchors = anchors_by_url.get(url, [])
        claim = records[url].claim_text
        if mode == "A":
            return url, mode_a(article_anchors, article_units), False
        labeled = LabeledArticle.from_units(article_units, claim)
        if mode == "B":
            premises = mode_b(labeled, article_anchors, gateway, on_failure=failures.append)
            failed = bool(article_anchors) and not premises
            return url, premises, failed
        n_anchors = len({a.letter_id for a in article_anchors})
        if n_anchors < 1:
            return url, [], True
        try:
            return url, mode_c(labeled, n_anchors, gateway, on_failure=failures.append), False
        except (SchemaFailure, TransportFailure):
            return url, [], True

    if cfg.extract_workers > 1 and mode in ("B", "C"):
        with ThreadPoolExecutor(max_workers=cfg.extract_workers) as pool:
            results = list(pool.map(process, order))
    else:
        results = [process(url) for url in order]

    new_premises = [p for _, premises, _ in results for p in premises]
    failed_articles = sum(1 for _, _, failed in results if failed)

    premises_path = cfg.out_dir / "premises.jsonl"
    existing = read_premises(premises_path) if premises_path.is_file() else []
    merged = [p for p in existing if p.mode != mode] + new_premises
    merged.sort(key=lambda p: (p.article_url, p.mode, letter_sort_key(p.letter_id), p.premise_id))
    write_premises(premises_path, merged)

    failures.sort(key=lambda f: (f.article_url, f.letter_id, f.kind))
    log_path = cfg.out_dir / "logs" / f"extraction_failures_{mode}.jsonl"
    log_path.parent.mkdir(parents=True, exist_ok=True)
    with log_path.open("w", encoding="utf-8") as handle:
        for failure in failures:
            handle.write(json.dumps(failure.to_dict(), ensure_ascii=False) + "\n")

    print(
        f"extract {mode}: {len(new_premises)} premises across "
        f"{len(order) - failed_articles}/{len(order)} articles; {len(failures)} failed generations"
    )
    if mode == "C":
        a_premises = [p for p in merged if p.mode == "A"]
        if a_premises:
            share = overlap_report(a_premises, new_premises)
            print(f"  mode C letters overlapping mode A: {share:.1%}")
    print(f"  wrote {premises_path} and {log_path}")

    if order and failed_articles / len(order) > cfg.extract_failure_threshold:
        logger.error(
            "%d/%d articles failed extraction (threshold %.0f%%)",
            failed_articles,
            len(order),
            cfg.extract_failure_threshold * 100,
        )
        return EXIT_PARTIAL
    return EXIT_OK


# --------------------------------------------------------------------------
# score


def _score_dfs(cfg: PipelineConfig, premises: list, run_id: str) -> EvaluationRun:
    units = read_units(cfg.out_dir / "units.jsonl")
    unit_text = {(u.article_url, u.letter_id): u.text for u in units}
    pairs = []
    ids = []
    for premise in premises:
        source = unit_text.get((premise.article_url, premise.letter_id))
        if source is None:
            raise InputError(
                f"premise {premise.premise_id} cites {premise.letter_id} "
                "which is not among the ingested units"
            )
        pairs.append((premise.text, source))
        ids.append(premise.premise_id)
    scorer = entailment_backend_from_url(
        cfg.entailment_base_url,
        timeout_ms=cfg.entailment_timeout_ms,
        batch_size=cfg.entailment_batch_size,
        max_retries=cfg.entailment_max_retries,
    )
    failures = []
    mean_entail, mean_dfs, scored = dfs_corpus(
        pairs, scorer, ids, on_failure=lambda pid, kind: failures.append((pid, kind))
    )
    aggregates = {
        "mean_entail": mean_entail,
        "mean_dfs": mean_dfs,
        "n_scored": len(scored),
        "n_failed": len(failures),
    }
    return EvaluationRun(
        run_id=run_id,
        task="dfs",
        mode=premises[0].mode,
        config_digest=cfg.digest,
        per_item=tuple(sp.to_dict() for sp in scored),
        aggregates=aggregates,
    )


def _score_retrieval(cfg: PipelineConfig, premises: list, records: dict, run_id: str) -> EvaluationRun:
    index = build_index(premises, k1=cfg.retrieval_k1, b=cfg.retrieval_b)
    gold = gold_premises_by_article(premises)
    queries = []
    for url in sorted(gold):
        record = records.get(url)
        if record is None:
            raise InputError(f"article {url} missing from the corpus")
        queries.append(QuerySpec(article_url=url, query_text=record.claim_text, gold_ids=gold[url]))
    aggregates, per_query = evaluate_retrieval(
        index,
        queries,
        mrr_k=cfg.retrieval_mrr_k,
        ndcg_ks=cfg.retrieval_ndcg_ks,
        recall_ks=cfg.retrieval_recall_ks,
    )
    return EvaluationRun(
        run_id=run_id,
        task="retrieval",
        mode=index.mode,
        config_digest=cfg.digest,
        per_item=tuple(per_query),
        aggregates=aggregates,
    )


def _score_verification(
    cfg: PipelineConfig, premises: list, records: dict, scheme: str, run_id: str
) -> EvaluationRun:
    label_set = BINARY_CLASS_LABELS if scheme == "binary" else FIVE_CLASS_LABELS
    gateway = Gateway(
        _generation_backend(cfg),
        max_inflight=cfg.backend_max_inflight,
        rate_per_s=cfg.backend_rate_per_s,
    )
    groups = _grouped(premises, lambda p: p.article_url)
    results = []
    for url in sorted(groups):
        record = records.get(url)
        if record is None:
            raise InputError(f"article {url} missing from the corpus")
        if scheme == "binary":
            side = collapse_verdict(record.verdict)
            if side is None:
                continue  # the middle rating has no side
            gold = side.value
        else:
            gold = record.verdict
        results.append(
            verify_one(
                record.claim_text,
                groups[url],
                label_set,
                gateway,
                gold=gold,
                mode=premises[0].mode,
            )
        )
    if not results:
        raise InputError("no articles eligible under this label scheme")
    coverage = coverage_aggregate(results)
    aggregates = {
        "macro_f1": macro_f1(results, label_set),
        "coverage": coverage,
        "n": len(results),
        "n_parse_failed": sum(1 for r in results if not r.parse_ok),
        "n_hallucinated_ids": sum(r.n_hallucinated for r in results),
    }
    return EvaluationRun(
        run_id=run_id,
        task="verification",
        mode=premises[0].mode,
        config_digest=cfg.digest,
        per_item=tuple(r.to_dict() for r in results),
        aggregates=aggregates,
    )


def cmd_score(cfg: PipelineConfig, task: str, mode: str, labels: "str | None") -> int:
    premises_path = cfg.out_dir / "premises.jsonl"
    if not premises_path.is_file():
        raise InputError(f"no premises at {premises_path}; run extract first")
    premises = [p for p in read_premises(premises_path) if p.mode == mode]
    if not premises:
        raise InputError(f"no mode {mode} premises at {premises_path}; run extract --mode {mode}")
    articles_path = cfg.corpus_dir / "articles.jsonl"
    if not articles_path.is_file():
        raise InputError(f"corpus file not found: {articles_path}")
    records = {r.canonical_url: r for r in read_articles(articles_path)}

    if task == "dfs":
        if mode == "A":
            raise InputError(
                "faithfulness scoring applies to generated premises (modes B and C); "
                "mode A copies score zero by construction"
            )
        run = _score_dfs(cfg, premises, run_id=f"dfs-{mode}-{cfg.digest8}")
    elif task == "retrieval":
        run = _score_retrieval(cfg, premises, records, run_id=f"retrieval-{mode}-{cfg.digest8}")
    else:
        scheme = labels or cfg.verification_labels
        run = _score_verification(
            cfg, premises, records, scheme, run_id=f"verification-{mode}-{scheme}-{cfg.digest8}"
        )

    run_path = cfg.out_dir / "runs" / f"{run.run_id}.jsonl"
    write_run(run_path, run)
    print(f"score {task} (mode {mode}): {len(run.per_item)} items")
    _print_aggregates(run.aggregates)
    print(f"  wrote {run_path}")
    return EXIT_OK


# --------------------------------------------------------------------------
# report


def cmd_report(cfg: PipelineConfig, run_ids: list) -> int:
    runs = []
    for run_id in run_ids:
        run_path = cfg.out_dir / "runs" / f"{run_id}.jsonl"
        if not run_path.is_file():
            raise InputError(f"run not found: {run_path}")
        runs.append(read_run(run_path))
    tasks = {run.task for run in runs}
    if len(tasks) > 1:
        raise InputError(f"runs mix tasks {sorted(tasks)}; report one task at a time")
    digests = {run.config_digest for run in runs}
    if len(digests) > 1:
        raise InputError("runs were produced under different configurations; refusing to combine")

    from .report import format_table, write_report  # defers the plotting import

    print(format_table(runs))
    name = runs[0].run_id if len(runs) == 1 else f"{runs[0].task}-compare-{runs[0].config_digest[:8]}"
    paths = write_report(runs, cfg.out_dir / "reports", name)
    print("wrote " + ", ".join(str(path) for path in sorted(paths.values())))
    return EXIT_OK


# --------------------------------------------------------------------------


def main(argv: "list | None" = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, _overrides(args))
        if args.command == "ingest":
            return cmd_ingest(cfg)
        if args.command == "extract":
            return cmd_extract(cfg, args.mode)
        if args.command == "score":
            return cmd_score(cfg, args.task, args.mode, args.labels)
        return cmd_report(cfg, args.run)
    except (
        ConfigError,
        BackendConfigError,
        InputError,
        EmptyCorpus,
        EmptyGold,
        EmptyDataset,
        EmptyGiven,
        EmptyDocument,
    ) as exc:
        logger.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
