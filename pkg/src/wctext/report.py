"""Result rendering: text tables, delimited records and figures.

Every report is written in two forms, a human-readable UTF-8 table and a
machine-readable one (TSV plus JSON-lines records); figures are rendered
next to them. JSONL schemas:

    run record      {"record": "run", "run": int, "seed": int,
                     "best_epoch": int, "val_accuracy": float,
                     "test_accuracy": float, "wall_time_s": float,
                     "num_epochs": int}
    summary record  {"record": "summary", "mean_test_accuracy": float,
                     "std_test_accuracy": float, "runs": int,
                     "model_config": {...}, "train_config": {...}}
    sweep record    {"record": "sweep_cell", "n_lo": int, "n_hi": int,
                     "mean_test_accuracy": float,
                     "std_test_accuracy": float, "runs": int}
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .training import RunSummary, SweepResult


def format_summary_line(model: str, summary: RunSummary) -> str:
    n = len(summary.reports)
    return (
        f"{model} test accuracy: {100 * summary.mean:.2f}"
        f"±{100 * summary.std:.2f} ({n} run{'s' if n != 1 else ''})"
    )


def format_sweep_grid(result: SweepResult, corner: str = "") -> str:
    """Upper-triangular grid of 1-decimal percentages, one row per n_lo."""
    ns = result.n_values
    width = max(5, len(corner) + 1)
    lines = [corner.ljust(width) + "".join(f"{n:>6}" for n in ns)]
    for lo in ns:
        row = [f"{lo}".ljust(width)]
        for hi in ns:
            cell = result.cells.get((lo, hi))
            row.append(f"{100 * cell.mean:>6.1f}" if cell is not None else " " * 6)
        lines.append("".join(row).rstrip())
    return "\n".join(lines) + "\n"


def sweep_records(result: SweepResult) -> list[dict]:
    records = []
    for (lo, hi), cell in sorted(result.cells.items()):
        records.append(
            {
                "record": "sweep_cell",
                "n_lo": lo,
                "n_hi": hi,
                "mean_test_accuracy": cell.mean,
                "std_test_accuracy": cell.std,
                "runs": len(cell.reports),
            }
        )
    return records


def run_records(summary: RunSummary) -> list[dict]:
    records = []
    for i, report in enumerate(summary.reports):
        records.append(
            {
                "record": "run",
                "run": i,
                "seed": report.seed,
                "best_epoch": report.best_epoch,
                "val_accuracy": report.val_accuracy,
                "test_accuracy": report.test_accuracy,
                "wall_time_s": report.wall_time_s,
                "num_epochs": len(report.epochs),
            }
        )
    first = summary.reports[0]
    records.append(
        {
            "record": "summary",
            "mean_test_accuracy": summary.mean,
            "std_test_accuracy": summary.std,
            "runs": len(summary.reports),
            "model_config": dataclasses.asdict(first.model_config),
            "train_config": dataclasses.asdict(first.train_config),
        }
    )
    return records


def write_jsonl(path: Path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")


def write_epoch_tsv(path: Path, summary: RunSummary) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("run\tseed\tepoch\ttrain_loss\tval_accuracy\tval_loss\n")
        for i, report in enumerate(summary.reports):
            for es in report.epochs:
                fh.write(
                    f"{i}\t{report.seed}\t{es.epoch}\t{es.train_loss!r}"
                    f"\t{es.val_accuracy!r}\t{es.val_loss!r}\n"
                )


def write_sweep_tsv(path: Path, result: SweepResult) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("n_lo\tn_hi\tmean_test_accuracy\tstd_test_accuracy\truns\n")
        for (lo, hi), cell in sorted(result.cells.items()):
            fh.write(f"{lo}\t{hi}\t{cell.mean!r}\t{cell.std!r}\t{len(cell.reports)}\n")


def render_training_curves(summary: RunSummary, path: Path) -> None:
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(9, 3.5))
    for i, report in enumerate(summary.reports):
        epochs = [es.epoch for es in report.epochs]
        ax_loss.plot(epochs, [es.train_loss for es in report.epochs], label=f"run {i}")
        ax_acc.plot(epochs, [es.val_accuracy for es in report.epochs], label=f"run {i}")
        ax_acc.axvline(report.best_epoch, color="gray", alpha=0.3, linestyle=":")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("train loss")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("val accuracy")
    if len(summary.reports) <= 10:
        ax_acc.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_sweep_heatmap(result: SweepResult, path: Path) -> None:
    ns = result.n_values
    grid = np.full((len(ns), len(ns)), np.nan)
    for (lo, hi), cell in result.cells.items():
        grid[ns.index(lo), ns.index(hi)] = 100 * cell.mean
    fig, ax = plt.subplots(figsize=(4.5, 4))
    im = ax.imshow(grid, cmap="viridis")
    ax.set_xticks(range(len(ns)), [str(n) for n in ns])
    ax.set_yticks(range(len(ns)), [str(n) for n in ns])
    ax.set_xlabel("n_hi")
    ax.set_ylabel("n_lo")
    for i in range(len(ns)):
        for j in range(len(ns)):
            if not np.isnan(grid[i, j]):
                ax.text(j, i, f"{grid[i, j]:.1f}", ha="center", va="center", color="white")
    fig.colorbar(im, ax=ax, label="test accuracy (%)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_train_outputs(out_dir: Path, model: str, summary: RunSummary) -> list[Path]:
    """The train report bundle: summary line, TSV, JSONL and curve figure."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [
        out_dir / "summary.txt",
        out_dir / "epochs.tsv",
        out_dir / "runs.jsonl",
        out_dir / "curves.png",
    ]
    paths[0].write_text(format_summary_line(model, summary) + "\n", encoding="utf-8")
    write_epoch_tsv(paths[1], summary)
    write_jsonl(paths[2], run_records(summary))
    render_training_curves(summary, paths[3])
    return paths


def write_sweep_outputs(out_dir: Path, result: SweepResult, corner: str = "") -> list[Path]:
    """The sweep report bundle: grid text, TSV, JSONL and heatmap figure."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [
        out_dir / "sweep_grid.txt",
        out_dir / "sweep.tsv",
        out_dir / "sweep.jsonl",
        out_dir / "sweep_heatmap.png",
    ]
    paths[0].write_text(format_sweep_grid(result, corner), encoding="utf-8")
    write_sweep_tsv(paths[1], result)
    write_jsonl(paths[2], sweep_records(result))
    render_sweep_heatmap(result, paths[3])
    return paths
