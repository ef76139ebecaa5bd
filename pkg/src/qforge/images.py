"""Balanced image assignment: eligible-image lookup and fewest-count selection."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .kg import normalize_label
from .runio import read_json
from .variants import KIND_FIX_Q, AdversarialSample

DROP_NO_IMAGE = "no-image"


@dataclass
class ImageCatalog:
    """image id -> normalized object labels present in the image."""

    objects: dict[str, frozenset[str]]

    @classmethod
    def from_mapping(cls, mapping: dict[str, Iterable[str]]) -> "ImageCatalog":
        return cls(
            objects={
                str(image_id): frozenset(normalize_label(str(label)) for label in labels)
                for image_id, labels in mapping.items()
            }
        )

    @classmethod
    def load(cls, path: str | Path) -> "ImageCatalog":
        return cls.from_mapping(read_json(path))

    def __contains__(self, image_id: str) -> bool:
        return image_id in self.objects


@dataclass
class AssignmentLedger:
    counts: dict[str, int] = field(default_factory=dict)
    log: list[tuple[str, str]] = field(default_factory=list)  # (sample id, image id)

    @classmethod
    def for_catalog(cls, catalog: ImageCatalog) -> "AssignmentLedger":
        return cls(counts={image_id: 0 for image_id in catalog.objects})

    def to_jsonable(self) -> dict:
        return {
            "counts": dict(sorted(self.counts.items())),
            "log": [list(entry) for entry in self.log],
        }


def eligible_images(
    catalog: ImageCatalog, object_label: str, exclude: Iterable[str] = ()
) -> set[str]:
    label = normalize_label(object_label)
    excluded = set(exclude)
    return {
        image_id
        for image_id, labels in catalog.objects.items()
        if label in labels and image_id not in excluded
    }


def assign_image(
    sample: AdversarialSample, catalog: ImageCatalog, ledger: AssignmentLedger
) -> str | None:
    """Assign the least-loaded eligible image; None when no image qualifies.

    Eligibility uses the primary answer node's label. FixQ samples never
    receive their originating image. Ties break to the smallest image id.
    """
    exclude = {sample.originating_image_id} if sample.kind == KIND_FIX_Q else set()
    eligible = eligible_images(catalog, sample.answer_nodes[0], exclude)
    if not eligible:
        return None
    chosen = min(eligible, key=lambda image_id: (ledger.counts.get(image_id, 0), image_id))
    ledger.counts[chosen] = ledger.counts.get(chosen, 0) + 1
    ledger.log.append((sample.id, chosen))
    sample.image_id = chosen
    return chosen


def assign_all(
    samples: Sequence[AdversarialSample], catalog: ImageCatalog, ledger: AssignmentLedger | None = None
) -> tuple[AssignmentLedger, dict]:
    """Assign images in canonical sample-id order; returns (ledger, run report).

    Dropped samples keep image_id None and are counted per reason so the
    generation funnel stays auditable.
    """
    if ledger is None:
        ledger = AssignmentLedger.for_catalog(catalog)
    dropped: dict[str, list[str]] = {}
    assigned = 0
    for sample in sorted(samples, key=lambda s: s.id):
        if assign_image(sample, catalog, ledger) is None:
            dropped.setdefault(DROP_NO_IMAGE, []).append(sample.id)
        else:
            assigned += 1
    report = {
        "assigned": assigned,
        "dropped": {reason: len(ids) for reason, ids in sorted(dropped.items())},
        "dropped_sample_ids": {reason: ids for reason, ids in sorted(dropped.items())},
        "ledger": ledger.to_jsonable(),
    }
    return ledger, report
