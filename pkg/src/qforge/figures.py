"""Matplotlib renderings of the stats and evaluation reports.

Every function writes one PNG next to the delimited output and returns the
path. Rendering is headless (Agg) and the PNG metadata is pinned so repeat
runs produce byte-identical files.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .evaluate import BucketResult, EvalReport  # noqa: E402
from .folds import SET_NAMES, StatsReport  # noqa: E402

# Overrides matplotlib's default Software tag, which embeds the library
# version and would break byte-level reproducibility across upgrades.
_PNG_METADATA = {"Software": "qforge"}
_BAR_COLOR = "#4878a8"
_ACCENT_COLOR = "#b05050"


def _finish(fig, path: str | Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format="png", metadata=_PNG_METADATA)
    plt.close(fig)
    return out


def plot_set_counts(stats: StatsReport, path: str | Path) -> Path:
    """Mean per-fold size of each output set, with population-std error bars."""
    names = [name for name in SET_NAMES if name in stats.mean_counts]
    means = [stats.mean_counts[name] for name in names]
    stds = [stats.std_counts[name] for name in names]
    fig, ax = plt.subplots(figsize=(7, 4), dpi=100)
    xs = range(len(names))
    ax.bar(xs, means, yerr=stds, capsize=4, color=_BAR_COLOR)
    ax.set_xticks(list(xs))
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylabel("samples per fold (mean +/- std)")
    ax.set_title("Output set sizes across folds")
    fig.tight_layout()
    return _finish(fig, path)


def plot_answer_histogram(
    histogram: Mapping[str, int], path: str | Path, top: int = 30
) -> Path:
    """Most frequent answer nodes; ties broken by label so output is stable."""
    ranked = sorted(histogram.items(), key=lambda kv: (-kv[1], kv[0]))[:top]
    labels = [label for label, _ in ranked]
    counts = [count for _, count in ranked]
    fig, ax = plt.subplots(figsize=(7, max(3, 0.25 * len(ranked) + 1)), dpi=100)
    ys = range(len(ranked))
    ax.barh(list(ys), counts, color=_BAR_COLOR)
    ax.set_yticks(list(ys))
    ax.set_yticklabels(labels, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("occurrences in corpus")
    ax.set_title(f"Top {len(ranked)} answer nodes")
    fig.tight_layout()
    return _finish(fig, path)


def plot_kind_accuracy(report: EvalReport, path: str | Path) -> Path:
    kinds = sorted(report.per_kind)
    fig, ax = plt.subplots(figsize=(5, 4), dpi=100)
    values = []
    for kind in kinds:
        acc = report.kind_accuracy(kind)
        values.append(0.0 if acc is None else 100 * acc)
    xs = range(len(kinds))
    ax.bar(xs, values, color=_BAR_COLOR)
    ax.axhline(100 * report.accuracy, color=_ACCENT_COLOR, linestyle="--", label="overall")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(kinds)
    ax.set_ylim(0, 100)
    ax.set_ylabel("accuracy (%)")
    ax.set_title("Accuracy by variant kind")
    ax.legend()
    fig.tight_layout()
    return _finish(fig, path)


def plot_bucket_accuracy(buckets: Sequence[BucketResult], path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4), dpi=100)
    labels = [b.label for b in buckets]
    values = [100 * b.accuracy if b.total else 0.0 for b in buckets]
    totals = [b.total for b in buckets]
    xs = range(len(buckets))
    bars = ax.bar(xs, values, color=_BAR_COLOR)
    for bar, total in zip(bars, totals):
        ax.annotate(
            f"n={total}",
            (bar.get_x() + bar.get_width() / 2, bar.get_height()),
            ha="center",
            va="bottom",
            fontsize=8,
        )
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels)
    ax.set_ylim(0, 105)
    ax.set_xlabel("answer occurrences in training corpus")
    ax.set_ylabel("accuracy (%)")
    ax.set_title("Accuracy by answer rarity")
    fig.tight_layout()
    return _finish(fig, path)
