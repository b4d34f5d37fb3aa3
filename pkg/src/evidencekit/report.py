"""Run reporting: aligned tables, TSV exports, and rendered figures."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .corpus import EvaluationRun

# Aggregate keys that are counts rather than scores.
COUNT_KEYS = frozenset({"n", "n_queries", "n_scored", "n_failed", "n_parse_failed", "n_hallucinated_ids"})


def metric_names(runs: list) -> list:
    """Union of aggregate keys in first-appearance order, scores before counts."""
    scores: list = []
    counts: list = []
    for run in runs:
        for key in run.aggregates:
            bucket = counts if key in COUNT_KEYS else scores
            if key not in bucket:
                bucket.append(key)
    return scores + counts


def _format_value(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def format_table(runs: list) -> str:
    """Aligned text table: one row per run, one column per aggregate."""
    names = metric_names(runs)
    header = ["run_id", "mode"] + names
    rows = [header]
    for run in runs:
        rows.append(
            [run.run_id, run.mode] + [_format_value(run.aggregates.get(name)) for name in names]
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = []
    for idx, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip())
        if idx == 0:
            lines.append("  ".join("-" * width for width in widths))
    return "\n".join(lines)


def write_tsv(runs: list, path: "Path | str") -> None:
    """Tab-delimited aggregate export, one row per run."""
    names = metric_names(runs)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        handle.write("\t".join(["run_id", "task", "mode"] + names) + "\n")
        for run in runs:
            cells = [run.run_id, run.task, run.mode]
            for name in names:
                value = run.aggregates.get(name)
                if value is None:
                    cells.append("")
                elif isinstance(value, float):
                    cells.append(f"{value:.6f}")
                else:
                    cells.append(str(value))
            handle.write("\t".join(cells) + "\n")


def _score_metrics(runs: list) -> list:
    return [name for name in metric_names(runs) if name not in COUNT_KEYS]


def render_figure(runs: list, path: "Path | str") -> None:
    """Render aggregate scores as grouped bars; DFS runs add a histogram."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    task = runs[0].task
    names = _score_metrics(runs)

    single_dfs = task == "dfs" and len(runs) == 1
    if single_dfs:
        fig, (ax, ax_hist) = plt.subplots(1, 2, figsize=(10, 4))
    else:
        fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(names) * max(1, len(runs))), 4))

    width = 0.8 / max(1, len(runs))
    positions = range(len(names))
    for run_idx, run in enumerate(runs):
        offsets = [p + run_idx * width for p in positions]
        heights = [run.aggregates.get(name) or 0.0 for name in names]
        ax.bar(offsets, heights, width=width, label=f"{run.mode or run.run_id}")
    ax.set_xticks([p + width * (len(runs) - 1) / 2 for p in positions])
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("score")
    ax.set_title(f"{task} aggregates")
    if len(runs) > 1:
        ax.legend()

    if single_dfs:
        values = [item.get("dfs", 0.0) for item in runs[0].per_item]
        ax_hist.hist(values, bins=20, range=(0.0, 1.0), color="#4878a8", edgecolor="white")
        ax_hist.set_xlabel("per-premise score")
        ax_hist.set_ylabel("premises")
        ax_hist.set_title("score distribution")

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(runs: list, out_dir: "Path | str", name: str) -> dict:
    """Write the text, TSV, and figure artifacts; returns their paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "table": out_dir / f"{name}.txt",
        "tsv": out_dir / f"{name}.tsv",
        "figure": out_dir / f"{name}.png",
    }
    paths["table"].write_text(format_table(runs) + "\n", encoding="utf-8")
    write_tsv(runs, paths["tsv"])
    render_figure(runs, paths["figure"])
    return paths
