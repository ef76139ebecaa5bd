"""Fold management, leakage-safe set construction, augmentation, statistics."""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

from .corpus import QaSample
from .runio import read_json
from .templates import QuestionTemplate
from .variants import KIND_FIX_A, KIND_FIX_Q, AdversarialSample

SET_STANDARD_TRAIN = "standard_train"
SET_STANDARD_TEST = "standard_test"
SET_ORIGINATING = "originating"
SET_ADVERSARIAL_TEST = "adversarial_test"
SET_AUGMENTATION = "augmentation"

SET_NAMES = (
    SET_STANDARD_TRAIN,
    SET_STANDARD_TEST,
    SET_ORIGINATING,
    SET_ADVERSARIAL_TEST,
    SET_AUGMENTATION,
)


class FoldError(ValueError):
    pass


class ConfigValueError(ValueError):
    pass


@dataclass(frozen=True)
class FoldSpec:
    fold_index: int
    train_image_ids: frozenset[str]
    test_image_ids: frozenset[str]

    def __post_init__(self):
        overlap = self.train_image_ids & self.test_image_ids
        if overlap:
            raise FoldError(
                f"fold {self.fold_index}: train/test images overlap: {sorted(overlap)[:5]}"
            )

    def membership(self, image_id: str) -> str:
        if image_id in self.train_image_ids:
            return "train"
        if image_id in self.test_image_ids:
            return "test"
        raise FoldError(f"fold {self.fold_index}: image {image_id!r} is in neither split")


def load_folds(path: str | Path) -> list[FoldSpec]:
    raw = read_json(path)
    folds = [
        FoldSpec(
            fold_index=int(entry["fold"]),
            train_image_ids=frozenset(str(i) for i in entry["train_images"]),
            test_image_ids=frozenset(str(i) for i in entry["test_images"]),
        )
        for entry in raw
    ]
    folds.sort(key=lambda f: f.fold_index)
    return folds


def check_fold_coverage(folds: Sequence[FoldSpec], samples: Sequence[QaSample]) -> None:
    """Every corpus image must belong to one side of every fold."""
    for fold in folds:
        covered = fold.train_image_ids | fold.test_image_ids
        missing = {s.image_id for s in samples} - covered
        if missing:
            raise FoldError(
                f"fold {fold.fold_index}: corpus images not covered: {sorted(missing)[:5]}"
            )


def partition_templates(
    fold: FoldSpec,
    templates: Sequence[QuestionTemplate],
    samples_by_id: Mapping[str, QaSample],
) -> tuple[list[QuestionTemplate], list[QuestionTemplate]]:
    """Split templates by where their source sample's image falls in the fold."""
    train: list[QuestionTemplate] = []
    test: list[QuestionTemplate] = []
    for template in templates:
        source = samples_by_id.get(template.source_sample_id)
        if source is None:
            raise FoldError(
                f"template {template.id}: source sample {template.source_sample_id!r} unknown"
            )
        side = fold.membership(source.image_id)
        (train if side == "train" else test).append(template)
    return train, test


def build_adversarial_test(
    fold: FoldSpec,
    verified_samples: Sequence[AdversarialSample],
    templates: Sequence[QuestionTemplate],
    samples_by_id: Mapping[str, QaSample],
) -> list[AdversarialSample]:
    """Accepted samples whose template is a test template for this fold."""
    _, test_templates = partition_templates(fold, templates, samples_by_id)
    test_ids = {t.id for t in test_templates}
    return [s for s in verified_samples if s.template_id in test_ids]


def build_augmentation(
    fold: FoldSpec,
    verified_samples: Sequence[AdversarialSample],
    templates: Sequence[QuestionTemplate],
    samples_by_id: Mapping[str, QaSample],
) -> list[AdversarialSample]:
    """Accepted samples whose template is a train template for this fold."""
    train_templates, _ = partition_templates(fold, templates, samples_by_id)
    train_ids = {t.id for t in train_templates}
    return [s for s in verified_samples if s.template_id in train_ids]


@dataclass
class FoldSets:
    fold_index: int
    standard_train: list[QaSample]
    standard_test: list[QaSample]
    originating: list[QaSample]
    adversarial_test: list[AdversarialSample]
    augmentation: list[AdversarialSample]

    def counts(self) -> dict[str, int]:
        adversarial_kinds = Counter(s.kind for s in self.adversarial_test)
        return {
            SET_STANDARD_TRAIN: len(self.standard_train),
            SET_STANDARD_TEST: len(self.standard_test),
            SET_ORIGINATING: len(self.originating),
            SET_ADVERSARIAL_TEST: len(self.adversarial_test),
            f"{SET_ADVERSARIAL_TEST}_fix_a": adversarial_kinds.get(KIND_FIX_A, 0),
            f"{SET_ADVERSARIAL_TEST}_fix_q": adversarial_kinds.get(KIND_FIX_Q, 0),
            SET_AUGMENTATION: len(self.augmentation),
        }


@dataclass
class DatasetBundle:
    folds: list[FoldSets] = field(default_factory=list)


def build_bundle(
    samples: Sequence[QaSample],
    folds: Sequence[FoldSpec],
    verified_samples: Sequence[AdversarialSample],
    templates: Sequence[QuestionTemplate],
) -> DatasetBundle:
    """Derive every per-fold set from the corpus, folds, and accepted samples.

    Adversarial test and augmentation partition the accepted samples by the
    fold's template split; the originating set collects the test questions
    that seeded at least one adversarial test sample.
    """
    check_fold_coverage(folds, samples)
    samples_by_id = {s.id: s for s in samples}
    bundle = DatasetBundle()
    for fold in folds:
        standard_train = [s for s in samples if fold.membership(s.image_id) == "train"]
        standard_test = [s for s in samples if fold.membership(s.image_id) == "test"]
        adversarial = build_adversarial_test(fold, verified_samples, templates, samples_by_id)
        augmentation = build_augmentation(fold, verified_samples, templates, samples_by_id)
        origin_ids = {s.originating_sample_id for s in adversarial}
        originating = [s for s in standard_test if s.id in origin_ids]
        bundle.folds.append(
            FoldSets(
                fold_index=fold.fold_index,
                standard_train=standard_train,
                standard_test=standard_test,
                originating=originating,
                adversarial_test=adversarial,
                augmentation=augmentation,
            )
        )
    return bundle


def check_leakage(bundle: DatasetBundle) -> list[str]:
    """Template-id leakage violations between adversarial test and train-side sets."""
    violations = []
    for fold in bundle.folds:
        test_template_ids = {s.template_id for s in fold.adversarial_test}
        train_template_ids = {s.template_id for s in fold.augmentation}
        shared = test_template_ids & train_template_ids
        if shared:
            violations.append(
                f"fold {fold.fold_index}: templates in both adversarial test and augmentation: {sorted(shared)[:5]}"
            )
        origin_ids = {s.id for s in fold.originating}
        test_ids = {s.id for s in fold.standard_test}
        if not origin_ids <= test_ids:
            violations.append(f"fold {fold.fold_index}: originating set escapes the standard test set")
    return violations


def apply_augmentation(
    standard_train: Sequence[QaSample],
    augmentation_set: Sequence[AdversarialSample],
    seed: int,
    replace_prob: float = 0.5,
) -> Iterator[QaSample | AdversarialSample]:
    """Emit the training stream with seeded random variant replacement.

    Each sample that has variants is replaced, with probability replace_prob,
    by one of its variants chosen uniformly; everything else passes through.
    Identical seeds yield identical streams.
    """
    if not 0.0 <= replace_prob <= 1.0:
        raise ConfigValueError(f"replace_prob must be in [0, 1], got {replace_prob}")
    variants_by_origin: dict[str, list[AdversarialSample]] = {}
    for variant in augmentation_set:
        variants_by_origin.setdefault(variant.originating_sample_id, []).append(variant)
    for choices in variants_by_origin.values():
        choices.sort(key=lambda s: s.id)
    rng = random.Random(seed)
    for sample in standard_train:
        choices = variants_by_origin.get(sample.id)
        if choices and rng.random() < replace_prob:
            yield rng.choice(choices)
        else:
            yield sample


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Mean and population standard deviation (the +/- convention in reports)."""
    if not values:
        return 0.0, 0.0
    mean = sum(values) / len(values)
    variance = sum((v - mean) ** 2 for v in values) / len(values)
    return mean, math.sqrt(variance)


@dataclass
class StatsReport:
    per_fold_counts: list[dict[str, int]]
    mean_counts: dict[str, float]
    std_counts: dict[str, float]
    answer_histogram: dict[str, int]
    answers_total: int
    answers_below_three: int
    distinct_corpus_triplets: int
    distinct_adversarial_triplets: int
    new_triplets_covered: int
    relation_counts: dict[str, int]

    def to_jsonable(self) -> dict:
        return {
            "per_fold_counts": self.per_fold_counts,
            "mean_counts": self.mean_counts,
            "std_counts": self.std_counts,
            "answer_histogram": dict(sorted(self.answer_histogram.items())),
            "answers_total": self.answers_total,
            "answers_below_three": self.answers_below_three,
            "distinct_corpus_triplets": self.distinct_corpus_triplets,
            "distinct_adversarial_triplets": self.distinct_adversarial_triplets,
            "new_triplets_covered": self.new_triplets_covered,
            "relation_counts": dict(sorted(self.relation_counts.items())),
        }

    def format_table(self) -> str:
        names = list(self.mean_counts)
        width = max(len(n) for n in names) + 2
        lines = [f"{'set':<{width}}{'mean':>10}{'std':>10}"]
        for name in names:
            lines.append(
                f"{name:<{width}}{self.mean_counts[name]:>10.1f}{self.std_counts[name]:>10.1f}"
            )
        lines.append("")
        lines.append(f"answers occurring < 3 times: {self.answers_below_three}/{self.answers_total}")
        lines.append(f"distinct corpus triplets: {self.distinct_corpus_triplets}")
        lines.append(
            f"distinct adversarial triplets: {self.distinct_adversarial_triplets}"
            f" ({self.new_triplets_covered} not in the corpus)"
        )
        return "\n".join(lines)


def compute_stats(bundle: DatasetBundle, corpus: Sequence[QaSample]) -> StatsReport:
    """Per-set counts with 5-fold mean/std plus corpus imbalance diagnostics."""
    per_fold = [fold.counts() for fold in bundle.folds]
    names = list(per_fold[0]) if per_fold else []
    mean_counts: dict[str, float] = {}
    std_counts: dict[str, float] = {}
    for name in names:
        mean, std = mean_std([counts[name] for counts in per_fold])
        mean_counts[name] = mean
        std_counts[name] = std

    histogram = Counter(s.answer_node for s in corpus)
    corpus_triplets = {s.fact for s in corpus}
    adversarial_triplets = {
        s.triplet for fold in bundle.folds for s in fold.adversarial_test + fold.augmentation
    }
    relation_counts = Counter(fact[1] for fact in corpus_triplets)
    relation_counts.update(triplet[1] for triplet in adversarial_triplets - corpus_triplets)

    return StatsReport(
        per_fold_counts=per_fold,
        mean_counts=mean_counts,
        std_counts=std_counts,
        answer_histogram=dict(histogram),
        answers_total=len(histogram),
        answers_below_three=sum(1 for count in histogram.values() if count < 3),
        distinct_corpus_triplets=len(corpus_triplets),
        distinct_adversarial_triplets=len(adversarial_triplets),
        new_triplets_covered=len(adversarial_triplets - corpus_triplets),
        relation_counts=dict(relation_counts),
    )
