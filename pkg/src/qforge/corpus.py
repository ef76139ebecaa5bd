"""Grounded QA corpus records and their JSON-lines loader."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .kg import KgIndex, nearest_node, normalize_label
from .runio import read_jsonl


class CorpusError(ValueError):
    pass


@dataclass
class QaSample:
    """One original question grounded by a KG triplet."""

    id: str
    question_text: str
    answer_string: str
    answer_node: str
    fact: tuple[str, str, str]
    image_id: str

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "question": self.question_text,
            "answer": self.answer_string,
            "answer_node": self.answer_node,
            "fact": list(self.fact),
            "image_id": self.image_id,
        }

    @classmethod
    def from_record(cls, record: dict) -> "QaSample":
        """Rehydrate a record this package wrote; answer_node must be present.
        Use sample_from_record for external corpora that may omit it."""
        return cls(
            id=str(record["id"]),
            question_text=str(record["question"]),
            answer_string=str(record["answer"]),
            answer_node=str(record["answer_node"]),
            fact=tuple(record["fact"]),
            image_id=str(record["image_id"]),
        )


def sample_from_record(record: dict, index: KgIndex) -> QaSample:
    fact_raw = record["fact"]
    fact = (
        normalize_label(str(fact_raw[0])),
        str(fact_raw[1]).strip(),
        normalize_label(str(fact_raw[2])),
    )
    answer = str(record["answer"])
    answer_node = record.get("answer_node")
    if not answer_node:
        answer_node = nearest_node(index, answer).id
    return QaSample(
        id=str(record["id"]),
        question_text=str(record["question"]),
        answer_string=answer,
        answer_node=normalize_label(str(answer_node)),
        fact=fact,
        image_id=str(record["image_id"]),
    )


def load_corpus(
    path: str | Path, index: KgIndex, on_missing_fact: str = "skip"
) -> tuple[list[QaSample], list[dict]]:
    """Load QA samples, resolving answer nodes against the index.

    Samples whose fact is absent from the filtered index are either skipped
    (returned in the second list with a reason) or raise, per on_missing_fact.
    Duplicate sample ids always raise.
    """
    if on_missing_fact not in ("skip", "error"):
        raise ValueError(f"on_missing_fact must be 'skip' or 'error', got {on_missing_fact!r}")
    samples: list[QaSample] = []
    skipped: list[dict] = []
    seen_ids: set[str] = set()
    for record in read_jsonl(path):
        sample = sample_from_record(record, index)
        if sample.id in seen_ids:
            raise CorpusError(f"duplicate sample id {sample.id!r} in {path}")
        seen_ids.add(sample.id)
        if index.lookup(sample.fact) is None:
            if on_missing_fact == "error":
                raise CorpusError(f"sample {sample.id}: fact {sample.fact} not in index")
            skipped.append({"id": sample.id, "reason": "fact-not-indexed", "fact": list(sample.fact)})
            continue
        samples.append(sample)
    return samples, skipped
