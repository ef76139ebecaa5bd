"""FixA / FixQ adversarial sample generation from verified templates."""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Sequence

from .kg import KgIndex, KgTriplet, siblings_fixed_head, siblings_fixed_tail
from .templates import QuestionTemplate, apply_inflection

KIND_FIX_A = "FixA"
KIND_FIX_Q = "FixQ"

SELECTION_TRUNCATE = "truncate"
SELECTION_RANDOM = "random"
SELECTION_MODES = (SELECTION_TRUNCATE, SELECTION_RANDOM)

STATUS_PENDING = "pending"
STATUS_NEEDS_REVIEW = "needs-review"


@dataclass
class AdversarialSample:
    id: str
    kind: str
    question_text: str
    answer_nodes: list[str]
    triplet: tuple[str, str, str]
    template_id: str
    originating_sample_id: str
    originating_image_id: str
    image_id: str | None = None
    review_status: str = STATUS_PENDING
    review_reason: str | None = None

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "question": self.question_text,
            "answers": list(self.answer_nodes),
            "triplet": list(self.triplet),
            "template_id": self.template_id,
            "originating_sample_id": self.originating_sample_id,
            "originating_image_id": self.originating_image_id,
            "image_id": self.image_id,
            "review_status": self.review_status,
            "review_reason": self.review_reason,
        }

    @classmethod
    def from_record(cls, record: dict) -> "AdversarialSample":
        return cls(
            id=record["id"],
            kind=record["kind"],
            question_text=record["question"],
            answer_nodes=list(record["answers"]),
            triplet=tuple(record["triplet"]),
            template_id=record["template_id"],
            originating_sample_id=record["originating_sample_id"],
            originating_image_id=record["originating_image_id"],
            image_id=record.get("image_id"),
            review_status=record.get("review_status", STATUS_PENDING),
            review_reason=record.get("review_reason"),
        )


def sample_id_for(template_id: str, kind: str, triplet: tuple[str, str, str]) -> str:
    """Stable id; regeneration with identical inputs reproduces it."""
    digest = hashlib.sha1("|".join((template_id, kind) + triplet).encode("utf-8")).hexdigest()
    return f"adv-{digest[:16]}"


def render_question(template: QuestionTemplate, node_label: str) -> tuple[str, bool]:
    """Substitute the node into the slot under the template's inflection.

    Returns (text, fallback): fallback is True when the recorded transform
    did not apply and the label was inserted verbatim (sample needs review).
    """
    surface = apply_inflection(template.slot_inflection, node_label)
    fallback = surface is None
    if fallback:
        surface = node_label
    return template.text.replace(template.slot_token, surface, 1), fallback


def _select(siblings: Sequence[KgTriplet], cap: int, selection: str, rng: random.Random | None) -> list[KgTriplet]:
    if cap < 0:
        raise ValueError(f"cap must be >= 0, got {cap}")
    if len(siblings) <= cap:
        return list(siblings)
    if selection == SELECTION_TRUNCATE:
        return list(siblings[:cap])
    if selection == SELECTION_RANDOM:
        if rng is None:
            raise ValueError("random selection requires a seeded rng")
        chosen = rng.sample(list(siblings), cap)
        chosen.sort(key=lambda t: t.key)
        return chosen
    raise ValueError(f"unknown selection mode {selection!r}")


def generate_fix_a(
    template: QuestionTemplate,
    index: KgIndex,
    cap: int = 5,
    selection: str = SELECTION_TRUNCATE,
    rng: random.Random | None = None,
) -> list[AdversarialSample]:
    """Same answer, reworded question: vary the slot node among siblings.

    Inverted templates cannot hold the answer fixed while varying the slot
    and generate nothing.
    """
    if template.inverted:
        return []
    answer_node = template.fixed_node
    original_slot = template.source_triplet[0 if template.slot_role == "head" else 2]
    if template.answer_role == "head":
        siblings = siblings_fixed_head(index, answer_node, template.relation, exclude_tail=original_slot)
    else:
        siblings = siblings_fixed_tail(index, answer_node, template.relation, exclude_head=original_slot)
    originating = template.originating_question()
    samples = []
    for sibling in _select(siblings, cap, selection, rng):
        slot_node = sibling.head if template.slot_role == "head" else sibling.tail
        question, fallback = render_question(template, slot_node)
        if question == originating:
            continue
        samples.append(
            AdversarialSample(
                id=sample_id_for(template.id, KIND_FIX_A, sibling.key),
                kind=KIND_FIX_A,
                question_text=question,
                answer_nodes=[answer_node],
                triplet=sibling.key,
                template_id=template.id,
                originating_sample_id=template.source_sample_id,
                originating_image_id=template.source_image_id,
                review_status=STATUS_NEEDS_REVIEW if fallback else STATUS_PENDING,
                review_reason="inflection-fallback" if fallback else None,
            )
        )
    return samples


def generate_fix_q(
    template: QuestionTemplate,
    index: KgIndex,
    cap: int = 5,
    selection: str = SELECTION_TRUNCATE,
    rng: random.Random | None = None,
) -> list[AdversarialSample]:
    """Same question, different answer: vary the answer-role node.

    The slot node stays at its originating value, so the question text is the
    originating question verbatim. Each sample still needs an image that
    contains the new answer and differs from the originating image.
    """
    if template.inverted:
        return []
    slot_node = template.source_triplet[0 if template.slot_role == "head" else 2]
    original_answer = template.fixed_node
    if template.answer_role == "head":
        siblings = siblings_fixed_tail(index, slot_node, template.relation, exclude_head=original_answer)
    else:
        siblings = siblings_fixed_head(index, slot_node, template.relation, exclude_tail=original_answer)
    question = template.originating_question()
    samples = []
    for sibling in _select(siblings, cap, selection, rng):
        answer_node = sibling.head if template.answer_role == "head" else sibling.tail
        samples.append(
            AdversarialSample(
                id=sample_id_for(template.id, KIND_FIX_Q, sibling.key),
                kind=KIND_FIX_Q,
                question_text=question,
                answer_nodes=[answer_node],
                triplet=sibling.key,
                template_id=template.id,
                originating_sample_id=template.source_sample_id,
                originating_image_id=template.source_image_id,
            )
        )
    return samples


def generate_all(
    templates: Sequence[QuestionTemplate],
    index: KgIndex,
    fix_a_cap: int = 5,
    fix_q_cap: int = 5,
    selection: str = SELECTION_TRUNCATE,
    seed: int | None = None,
) -> list[AdversarialSample]:
    """Generate both kinds for every template, in canonical order.

    Canonical order is (template id, kind, triplet key) regardless of
    scheduling, so parallel per-template generation would reduce identically.
    """
    rng = random.Random(seed) if seed is not None else None
    out: list[AdversarialSample] = []
    for template in sorted(templates, key=lambda t: t.id):
        out.extend(generate_fix_a(template, index, fix_a_cap, selection, rng))
        out.extend(generate_fix_q(template, index, fix_q_cap, selection, rng))
    out.sort(key=lambda s: (s.template_id, s.kind, s.triplet))
    return out
