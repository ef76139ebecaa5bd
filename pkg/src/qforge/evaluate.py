"""Scoring of external prediction files plus per-kind and rarity breakdowns."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .folds import ConfigValueError, mean_std
from .kg import normalize_label
from .runio import read_jsonl


class DuplicatePredictionError(ValueError):
    pass


@dataclass(frozen=True)
class GoldEntry:
    """One scored item: a sample in one fold's test set."""

    sample_id: str
    answers: tuple[str, ...]  # answer node labels, already normalized
    kind: str | None = None  # FixQ | FixA | None for standard sets
    fold: int | None = None


def load_predictions(path: str | Path) -> dict[str, str]:
    predictions: dict[str, str] = {}
    for record in read_jsonl(path):
        sample_id = str(record["sample_id"])
        if sample_id in predictions:
            raise DuplicatePredictionError(f"duplicate prediction for sample {sample_id!r}")
        predictions[sample_id] = str(record["answer"])
    return predictions


def is_correct(predicted: str | None, gold: GoldEntry) -> bool:
    """Exact string match of the normalized prediction to any gold node label.

    Missing predictions count as wrong; no edit-distance softening on the
    prediction side.
    """
    if predicted is None:
        return False
    return normalize_label(predicted) in gold.answers


@dataclass
class BucketResult:
    label: str
    low: int
    high: int | None  # None = open-ended
    correct: int = 0
    total: int = 0
    occurrence_sum: int = 0

    @property
    def accuracy(self) -> float | None:
        return self.correct / self.total if self.total else None


@dataclass
class EvalReport:
    correct: int
    total: int
    per_fold: dict[int, tuple[int, int]]
    per_kind: dict[str, tuple[int, int]]
    buckets: list[BucketResult] = field(default_factory=list)

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0

    def fold_accuracies(self) -> dict[int, float]:
        return {fold: c / t for fold, (c, t) in sorted(self.per_fold.items()) if t}

    def fold_mean_std(self) -> tuple[float, float]:
        return mean_std(list(self.fold_accuracies().values()))

    def kind_accuracy(self, kind: str) -> float | None:
        """None (never 0) when no scored sample has this kind."""
        c, t = self.per_kind.get(kind, (0, 0))
        return c / t if t else None

    def to_jsonable(self) -> dict:
        mean, std = self.fold_mean_std()
        return {
            "correct": self.correct,
            "total": self.total,
            "accuracy": self.accuracy,
            "per_fold": {
                str(fold): {"correct": c, "total": t, "accuracy": c / t if t else None}
                for fold, (c, t) in sorted(self.per_fold.items())
            },
            "fold_mean": mean,
            "fold_std": std,
            "std_convention": "population",
            "per_kind": {
                kind: {"correct": c, "total": t, "accuracy": c / t if t else None}
                for kind, (c, t) in sorted(self.per_kind.items())
            },
            "buckets": [
                {
                    "label": b.label,
                    "low": b.low,
                    "high": b.high,
                    "correct": b.correct,
                    "total": b.total,
                    "accuracy": b.accuracy,
                    "occurrence_sum": b.occurrence_sum,
                }
                for b in self.buckets
            ],
        }

    def format_table(self) -> str:
        mean, std = self.fold_mean_std()
        lines = [
            "accuracy (population std over folds)",
            f"{'overall':<16}{100 * self.accuracy:>8.2f}%   ({self.correct}/{self.total})",
            f"{'fold mean':<16}{100 * mean:>8.2f}% +/- {100 * std:.2f}",
        ]
        for fold, acc in self.fold_accuracies().items():
            c, t = self.per_fold[fold]
            lines.append(f"{f'fold {fold}':<16}{100 * acc:>8.2f}%   ({c}/{t})")
        for kind, (c, t) in sorted(self.per_kind.items()):
            acc = f"{100 * c / t:>8.2f}%" if t else "     n/a"
            lines.append(f"{kind:<16}{acc}   ({c}/{t})")
        for bucket in self.buckets:
            acc = f"{100 * bucket.accuracy:>8.2f}%" if bucket.total else "     n/a"
            lines.append(f"{'occ ' + bucket.label:<16}{acc}   ({bucket.correct}/{bucket.total})")
        return "\n".join(lines)


def score(predictions: Mapping[str, str], gold_set: Sequence[GoldEntry]) -> EvalReport:
    """Score every gold entry; duplicates in the gold set are distinct items."""
    correct = 0
    per_fold: dict[int, list[int]] = {}
    per_kind: dict[str, list[int]] = {}
    for gold in gold_set:
        ok = is_correct(predictions.get(gold.sample_id), gold)
        correct += ok
        if gold.fold is not None:
            slot = per_fold.setdefault(gold.fold, [0, 0])
            slot[0] += ok
            slot[1] += 1
        if gold.kind is not None:
            slot = per_kind.setdefault(gold.kind, [0, 0])
            slot[0] += ok
            slot[1] += 1
    return EvalReport(
        correct=correct,
        total=len(gold_set),
        per_fold={fold: (c, t) for fold, (c, t) in per_fold.items()},
        per_kind={kind: (c, t) for kind, (c, t) in per_kind.items()},
    )


def breakdown_by_kind(
    predictions: Mapping[str, str], gold_set: Sequence[GoldEntry]
) -> dict[str, float | None]:
    report = score(predictions, gold_set)
    kinds = {g.kind for g in gold_set if g.kind is not None}
    return {kind: report.kind_accuracy(kind) for kind in sorted(kinds)}


def make_buckets(bucket_edges: Sequence[int]) -> list[BucketResult]:
    edges = list(bucket_edges)
    if len(edges) < 1 or edges[0] != 0:
        raise ConfigValueError(f"bucket edges must start at 0, got {edges}")
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ConfigValueError(f"bucket edges must be strictly increasing, got {edges}")
    buckets = [
        BucketResult(label=f"{low}-{high}", low=low, high=high)
        for low, high in zip(edges, edges[1:])
    ]
    buckets.append(BucketResult(label=f"{edges[-1]}+", low=edges[-1], high=None))
    return buckets


def bucket_by_answer_occurrence(
    predictions: Mapping[str, str],
    gold_set: Sequence[GoldEntry],
    occurrence_counts: Mapping[str, int],
    bucket_edges: Sequence[int],
) -> list[BucketResult]:
    """Group scored samples by how often their answer occurs in the corpus.

    Buckets are half-open [low, high); the last bucket is open-ended. A
    sample's occurrence count is its primary answer's corpus frequency
    (0 when the answer never occurs).
    """
    buckets = make_buckets(bucket_edges)
    for gold in gold_set:
        occurrence = occurrence_counts.get(gold.answers[0], 0)
        bucket = next(
            b for b in buckets if occurrence >= b.low and (b.high is None or occurrence < b.high)
        )
        bucket.total += 1
        bucket.occurrence_sum += occurrence
        bucket.correct += is_correct(predictions.get(gold.sample_id), gold)
    return buckets


def evaluate(
    predictions: Mapping[str, str],
    gold_set: Sequence[GoldEntry],
    occurrence_counts: Mapping[str, int] | None = None,
    bucket_edges: Sequence[int] | None = None,
) -> EvalReport:
    report = score(predictions, gold_set)
    if occurrence_counts is not None and bucket_edges is not None:
        report.buckets = bucket_by_answer_occurrence(
            predictions, gold_set, occurrence_counts, bucket_edges
        )
    return report
