"""Slot-template extraction from grounded questions, filtering, and dedup."""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Iterable

from .corpus import QaSample
from .kg import KgIndex, levenshtein, stem_token

HEAD_TOKEN = "<h>"
TAIL_TOKEN = "<t>"

INFLECTION_IDENTITY = "identity"
INFLECTION_PLURAL = "plural"
INFLECTION_GERUND = "gerund"
INFLECTION_STEM = "stem"

TRANSFERABLE_OK = "auto-ok"
TRANSFERABLE_FLAGGED = "flagged"
TRANSFERABLE_REJECTED = "rejected"

_VOWELS = "aeiou"

# Questions anchored to a particular scene or to object positions do not
# transfer to other images; matches route the template to human review.
_NON_TRANSFERABLE_PATTERNS = [
    re.compile(p, re.IGNORECASE)
    for p in (
        r"\b(lower|upper|bottom|top)[\s-](left|right)\b",
        r"\b(left|right|top|bottom)\s+(of|side|corner|half|part)\b",
        r"\b(corner|side|edge|center|centre|middle|background|foreground)\s+of\s+(the|this|that)\s+(image|picture|photo)\b",
        r"\bplace shown\b",
        r"\b(scene|place|room|area|location)\s+(shown|depicted|pictured)\b",
        r"\b(this|that)\s+(place|scene|room|location)\b",
        r"\bnext to the\b",
        r"\bbehind the\b",
        r"\bin front of the\b",
    )
]


class TemplateExtractionError(ValueError):
    """Sample cannot be templated automatically; route to review."""

    def __init__(self, sample_id: str, reason: str):
        super().__init__(f"sample {sample_id}: {reason}")
        self.sample_id = sample_id
        self.reason = reason


class AmbiguousSpanError(TemplateExtractionError):
    def __init__(self, sample_id: str):
        super().__init__(sample_id, "head and tail surface forms overlap in the question")
        self.reason = "ambiguous-spans"


def pluralize(label: str) -> str | None:
    """Pluralize the final token; None when the rule does not apply."""
    tokens = label.split()
    last = tokens[-1]
    if not last.isalpha() or last.endswith("s"):
        return None
    if last.endswith(("x", "z", "ch", "sh")):
        inflected = last + "es"
    elif last.endswith("y") and len(last) > 1 and last[-2] not in _VOWELS:
        inflected = last[:-1] + "ies"
    else:
        inflected = last + "s"
    return " ".join(tokens[:-1] + [inflected])


def gerundize(label: str) -> str | None:
    """Gerundize the first token (the verb of a verb-object label)."""
    tokens = label.split()
    verb = tokens[0]
    if not verb.isalpha() or len(verb) < 2 or verb.endswith("ing"):
        return None
    if verb.endswith("ie"):
        inflected = verb[:-2] + "ying"
    elif verb.endswith("e") and not verb.endswith(("ee", "oe", "ye")):
        inflected = verb[:-1] + "ing"
    elif (
        len(verb) >= 3
        and verb[-1] not in _VOWELS + "wxy"
        and verb[-2] in _VOWELS
        and verb[-3] not in _VOWELS
    ):
        inflected = verb + verb[-1] + "ing"
    else:
        inflected = verb + "ing"
    return " ".join([inflected] + tokens[1:])


def apply_inflection(tag: str, label: str) -> str | None:
    """Surface form of `label` under the transform; None when inapplicable.

    The stem tag records how a span was matched; it has no generative form.
    """
    if tag == INFLECTION_IDENTITY:
        return label
    if tag == INFLECTION_PLURAL:
        return pluralize(label)
    if tag == INFLECTION_GERUND:
        return gerundize(label)
    if tag == INFLECTION_STEM:
        return None
    raise ValueError(f"unknown inflection tag {tag!r}")


@dataclass(frozen=True)
class SlotSpan:
    start: int
    end: int
    slot_kind: str  # "head" | "tail"
    inflection: str
    surface: str  # exact question substring


@dataclass
class QuestionTemplate:
    id: str
    text: str  # contains exactly one <h> or <t>
    relation: str
    fixed_node: str
    answer_role: str  # "head" | "tail"
    slot_role: str  # "head" | "tail"
    slot_inflection: str
    original_surface: str
    source_sample_id: str
    source_triplet: tuple[str, str, str]
    source_image_id: str
    transferable: str = TRANSFERABLE_OK
    review_status: str = "pending"

    @property
    def slot_token(self) -> str:
        return HEAD_TOKEN if self.slot_role == "head" else TAIL_TOKEN

    @property
    def inverted(self) -> bool:
        """True when the slot holds the answer entity (review-only template)."""
        return self.answer_role == self.slot_role

    def originating_question(self) -> str:
        return self.text.replace(self.slot_token, self.original_surface, 1)

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "relation": self.relation,
            "fixed_node": self.fixed_node,
            "answer_role": self.answer_role,
            "slot_role": self.slot_role,
            "slot_inflection": self.slot_inflection,
            "original_surface": self.original_surface,
            "source_sample_id": self.source_sample_id,
            "source_triplet": list(self.source_triplet),
            "source_image_id": self.source_image_id,
            "transferable": self.transferable,
            "review_status": self.review_status,
        }

    @classmethod
    def from_record(cls, record: dict) -> "QuestionTemplate":
        return cls(
            id=record["id"],
            text=record["text"],
            relation=record["relation"],
            fixed_node=record["fixed_node"],
            answer_role=record["answer_role"],
            slot_role=record["slot_role"],
            slot_inflection=record["slot_inflection"],
            original_surface=record["original_surface"],
            source_sample_id=record["source_sample_id"],
            source_triplet=tuple(record["source_triplet"]),
            source_image_id=record["source_image_id"],
            transferable=record.get("transferable", TRANSFERABLE_OK),
            review_status=record.get("review_status", "pending"),
        )


def placeholder_count(text: str) -> int:
    return text.count(HEAD_TOKEN) + text.count(TAIL_TOKEN)


def _find_surface(question: str, surface: str) -> tuple[int, int] | None:
    # Token-boundary match, case-insensitive; the span keeps original casing.
    pattern = r"(?<![a-z0-9])" + re.escape(surface) + r"(?![a-z0-9])"
    m = re.search(pattern, question, re.IGNORECASE)
    return (m.start(), m.end()) if m else None


def _question_tokens(question: str) -> list[tuple[int, int, str]]:
    return [(m.start(), m.end(), m.group()) for m in re.finditer(r"[a-zA-Z0-9']+", question)]


def _stem_window_match(question: str, label: str) -> tuple[int, int] | None:
    label_stems = [stem_token(t) for t in label.split()]
    tokens = _question_tokens(question)
    n = len(label_stems)
    if n == 0 or len(tokens) < n:
        return None
    for i in range(len(tokens) - n + 1):
        window = tokens[i : i + n]
        if [stem_token(t[2]) for t in window] == label_stems:
            return (window[0][0], window[-1][1])
    return None


def _best_span(question: str, label: str, role: str) -> SlotSpan | None:
    """Longest matching inflected surface of `label`; stem window as fallback."""
    candidates: list[tuple[str, str]] = [(label, INFLECTION_IDENTITY)]
    plural = pluralize(label)
    if plural:
        candidates.append((plural, INFLECTION_PLURAL))
    gerund = gerundize(label)
    if gerund:
        candidates.append((gerund, INFLECTION_GERUND))
    candidates.sort(key=lambda c: len(c[0]), reverse=True)
    for surface, tag in candidates:
        span = _find_surface(question, surface)
        if span:
            return SlotSpan(span[0], span[1], role, tag, question[span[0] : span[1]])
    span = _stem_window_match(question, label)
    if span:
        return SlotSpan(span[0], span[1], role, INFLECTION_STEM, question[span[0] : span[1]])
    return None


def _spans_overlap(a: SlotSpan, b: SlotSpan) -> bool:
    return a.start < b.end and b.start < a.end


def extract_template(sample: QaSample, index: KgIndex) -> QuestionTemplate | None:
    """Template the sample by slotting a fact entity found in the question.

    Prefers slotting the non-answer entity. When only the answer entity
    appears, the template is emitted inverted and flagged for review. Returns
    None when neither entity (under any inflection) occurs in the question.
    """
    head, relation, tail = sample.fact
    if index.lookup(sample.fact) is None:
        raise TemplateExtractionError(sample.id, f"fact {sample.fact} not in index")
    if sample.answer_node == head:
        answer_role = "head"
    elif sample.answer_node == tail:
        answer_role = "tail"
    else:
        raise TemplateExtractionError(sample.id, "answer-not-in-fact")

    spans = {
        "head": _best_span(sample.question_text, head, "head"),
        "tail": _best_span(sample.question_text, tail, "tail"),
    }
    non_answer_role = "tail" if answer_role == "head" else "head"
    if spans["head"] and spans["tail"] and _spans_overlap(spans["head"], spans["tail"]):
        raise AmbiguousSpanError(sample.id)

    if spans[non_answer_role]:
        slot_role = non_answer_role
        transferable = TRANSFERABLE_OK
    elif spans[answer_role]:
        slot_role = answer_role
        transferable = TRANSFERABLE_FLAGGED
    else:
        return None

    span = spans[slot_role]
    assert span is not None
    token = HEAD_TOKEN if slot_role == "head" else TAIL_TOKEN
    text = sample.question_text[: span.start] + token + sample.question_text[span.end :]
    fixed_role = "tail" if slot_role == "head" else "head"
    return QuestionTemplate(
        id=f"tpl-{sample.id}",
        text=text,
        relation=relation,
        fixed_node=head if fixed_role == "head" else tail,
        answer_role=answer_role,
        slot_role=slot_role,
        slot_inflection=span.inflection,
        original_surface=span.surface,
        source_sample_id=sample.id,
        source_triplet=sample.fact,
        source_image_id=sample.image_id,
        transferable=transferable,
    )


def flag_non_transferable(template: QuestionTemplate) -> QuestionTemplate:
    """Flag templates whose wording pins them to a specific scene or layout."""
    if template.transferable == TRANSFERABLE_FLAGGED:
        return template
    for pattern in _NON_TRANSFERABLE_PATTERNS:
        if pattern.search(template.text):
            return replace(template, transferable=TRANSFERABLE_FLAGGED)
    return template


def template_similarity(a: str, b: str) -> float:
    """1 - normalized edit distance over slot-neutralized template text."""
    na = a.replace(HEAD_TOKEN, "<x>").replace(TAIL_TOKEN, "<x>")
    nb = b.replace(HEAD_TOKEN, "<x>").replace(TAIL_TOKEN, "<x>")
    longest = max(len(na), len(nb))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(na, nb) / longest


def dedupe_templates(
    templates: Iterable[QuestionTemplate], threshold: float = 0.9
) -> list[QuestionTemplate]:
    """Keep one representative per similarity cluster.

    Greedy single-linkage over templates in id order; a template joins the
    first cluster containing any member at similarity >= threshold. The
    representative is the cluster's lowest id, so output is independent of
    input order.
    """
    ordered = sorted(templates, key=lambda t: t.id)
    clusters: list[list[QuestionTemplate]] = []
    for template in ordered:
        placed = False
        for cluster in clusters:
            if any(template_similarity(template.text, member.text) >= threshold for member in cluster):
                cluster.append(template)
                placed = True
                break
        if not placed:
            clusters.append([template])
    return [cluster[0] for cluster in clusters]
