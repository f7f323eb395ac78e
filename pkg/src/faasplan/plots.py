"""Figures rendered next to the delimited outputs.

Everything draws through the Agg backend so runs are headless and the
emitted PNGs are reproducible byte-for-byte for identical inputs.
"""
from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .predictor import EpochMetrics
from .provisioner import OracleCell


def _finish(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def save_metric_curves(
    histories: Mapping[str, Sequence[EpochMetrics]], path: Path
) -> Path:
    """Held-out accuracy and macro-F1 per epoch, one line per function."""
    fig, (ax_acc, ax_f1) = plt.subplots(1, 2, figsize=(10, 4), sharex=True)
    for fn_id in sorted(histories):
        history = histories[fn_id]
        epochs = [m.epoch for m in history]
        ax_acc.plot(epochs, [m.accuracy for m in history], label=fn_id)
        ax_f1.plot(epochs, [m.macro_f1 for m in history], label=fn_id)
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("held-out accuracy")
    ax_f1.set_xlabel("epoch")
    ax_f1.set_ylabel("held-out macro F1")
    ax_acc.legend(fontsize=8)
    fig.tight_layout()
    return _finish(fig, path)


def save_loss_comparison(
    rows: Sequence[Tuple[str, str, float, float]], path: Path
) -> Path:
    """Grouped bars of final accuracy per function and loss kind.

    Rows are (function_id, loss_kind, accuracy, macro_f1).
    """
    functions = sorted({r[0] for r in rows})
    kinds = sorted({r[1] for r in rows})
    by_key = {(r[0], r[1]): r[2] for r in rows}
    width = 0.8 / max(len(kinds), 1)
    fig, ax = plt.subplots(figsize=(8, 4))
    for j, kind in enumerate(kinds):
        xs = [i + j * width for i in range(len(functions))]
        ax.bar(xs, [by_key[(f, kind)] for f in functions], width=width, label=kind)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(functions))])
    ax.set_xticklabels(functions, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("held-out accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    fig.tight_layout()
    return _finish(fig, path)


def save_config_tables(cells: Sequence[OracleCell], path: Path) -> Path:
    """Throughput and cost for every simulated configuration of one stage."""
    labels = [
        f"{c.configuration.container.mem_mb}MB x{c.configuration.replicas}" for c in cells
    ]
    colors = ["tab:green" if c.slo_met else "tab:red" for c in cells]
    xs = range(len(cells))
    fig, (ax_thr, ax_cost) = plt.subplots(2, 1, figsize=(10, 6), sharex=True)
    ax_thr.bar(xs, [c.throughput for c in cells], color=colors)
    ax_thr.set_ylabel("throughput (req/s)")
    ax_cost.bar(xs, [c.monthly_cost for c in cells], color=colors)
    ax_cost.set_ylabel("monthly cost")
    ax_cost.set_xticks(list(xs))
    ax_cost.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
    fig.tight_layout()
    return _finish(fig, path)


def save_ged_ps_scatter(points: Sequence[Tuple[float, float]], path: Path) -> Path:
    """Performance similarity against graph edit distance, one dot per trial."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.scatter([p[0] for p in points], [p[1] for p in points], s=14, alpha=0.6)
    ax.set_xlabel("graph edit distance (approx)")
    ax.set_ylabel("performance similarity (%)")
    ax.set_ylim(0, 105)
    fig.tight_layout()
    return _finish(fig, path)
