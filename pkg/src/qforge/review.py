"""Two-annotator verification workflow: verdict log, consensus, HTTP service.

Verdicts are appended to a JSON-lines log and never mutated. Item statuses
are a pure function of the latest verdict per (annotator, item), so replaying
the log from scratch always reproduces the same state. Flagging an item as
inappropriate blocklists its triplet and rejects every sibling item built
from that triplet.
"""

# No postponed annotations here: the endpoint closures in create_app annotate
# parameters with lazily imported fastapi types, which FastAPI must receive as
# objects, not strings it cannot resolve against module globals.
import dataclasses
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .kg import KgTriplet, render_surface
from .runio import jsonl_line, read_jsonl
from .templates import HEAD_TOKEN, TAIL_TOKEN, QuestionTemplate
from .variants import KIND_FIX_A, KIND_FIX_Q, AdversarialSample

logger = logging.getLogger(__name__)

DECISION_ACCEPT = "accept"
DECISION_REJECT = "reject"
DECISION_EDIT = "edit"
DECISION_FLAG = "flag_inappropriate"
DECISIONS = (DECISION_ACCEPT, DECISION_REJECT, DECISION_EDIT, DECISION_FLAG)

STATUS_PENDING = "pending"
STATUS_ACCEPTED = "accepted"
STATUS_REJECTED = "rejected"
STATUS_CONFLICT = "conflict"

ITEM_TEMPLATE = "template"
ITEM_SAMPLE = "sample"

REJECT_REASONS = (
    "counter-intuitive",
    "wrong-image",
    "non-transferable",
    "inappropriate",
    "privacy",
)


class UnknownItemError(KeyError):
    pass


class UnknownAnnotatorError(ValueError):
    pass


class VerdictValidationError(ValueError):
    pass


@dataclass(frozen=True)
class Verdict:
    annotator: str
    item_id: str
    decision: str
    new_text: str | None = None
    reason: str | None = None
    ts: float = 0.0  # audit only; statuses never depend on it

    def to_record(self) -> dict:
        record = {
            "annotator": self.annotator,
            "item_id": self.item_id,
            "decision": self.decision,
            "ts": self.ts,
        }
        if self.new_text is not None:
            record["new_text"] = self.new_text
        if self.reason is not None:
            record["reason"] = self.reason
        return record

    @classmethod
    def from_record(cls, record: dict) -> "Verdict":
        return cls(
            annotator=str(record["annotator"]),
            item_id=str(record["item_id"]),
            decision=str(record["decision"]),
            new_text=record.get("new_text"),
            reason=record.get("reason"),
            ts=float(record.get("ts", 0.0)),
        )


@dataclass
class ReviewItem:
    item_id: str
    item_kind: str  # template | sample
    triplet: tuple[str, str, str]
    payload: dict
    status: str = STATUS_PENDING
    final_text: str | None = None
    verdicts: dict[str, Verdict] = field(default_factory=dict)  # latest per annotator

    def to_jsonable(self, include_verdicts: bool = True) -> dict:
        record = {
            "item_id": self.item_id,
            "item_kind": self.item_kind,
            "triplet": list(self.triplet),
            "payload": self.payload,
            "status": self.status,
            "final_text": self.final_text,
        }
        if include_verdicts:
            record["verdicts"] = {
                annotator: {
                    "decision": v.decision,
                    "new_text": v.new_text,
                    "reason": v.reason,
                }
                for annotator, v in sorted(self.verdicts.items())
            }
        return record


def item_from_template(template: QuestionTemplate) -> ReviewItem:
    triplet = template.source_triplet
    surface = render_surface(KgTriplet(*triplet))
    return ReviewItem(
        item_id=template.id,
        item_kind=ITEM_TEMPLATE,
        triplet=triplet,
        payload={
            "question": template.text,
            "surface": surface,
            "image_id": template.source_image_id,
            "slot_token": template.slot_token,
            "answer_role": template.answer_role,
            "transferable": template.transferable,
        },
    )


def item_from_sample(
    sample: AdversarialSample, originating_question: str | None = None
) -> ReviewItem:
    triplet = sample.triplet
    surface = render_surface(KgTriplet(*triplet))
    return ReviewItem(
        item_id=sample.id,
        item_kind=ITEM_SAMPLE,
        triplet=triplet,
        payload={
            "question": sample.question_text,
            "answers": list(sample.answer_nodes),
            "surface": surface,
            "image_id": sample.image_id,
            "kind": sample.kind,
            "originating_question": originating_question,
            "review_reason": sample.review_reason,
        },
    )


def _validate_edit(item: ReviewItem, new_text: str) -> None:
    if not new_text or not new_text.strip():
        raise VerdictValidationError("edit text must be nonempty")
    if item.item_kind == ITEM_TEMPLATE:
        slot = item.payload["slot_token"]
        other = TAIL_TOKEN if slot == HEAD_TOKEN else HEAD_TOKEN
        if new_text.count(slot) != 1 or other in new_text:
            raise VerdictValidationError(
                f"template edit must contain the slot token {slot} exactly once"
            )
        return
    kind = item.payload.get("kind")
    if new_text == item.payload["question"]:
        raise VerdictValidationError("edit text is identical to the current text; use accept")
    if kind == KIND_FIX_Q:
        # The question is the fixed half of this variant; only the image or
        # answer side may be disputed, never the wording.
        raise VerdictValidationError("question text is fixed for this variant kind")
    if kind == KIND_FIX_A and new_text == item.payload.get("originating_question"):
        raise VerdictValidationError(
            "reworded question must differ from the originating question"
        )


class ReviewStore:
    """In-memory item registry over an append-only verdict log.

    Writes are serialized by a lock; every append recomputes all statuses
    from the latest-verdict state, which keeps the flag cascade consistent
    without incremental bookkeeping.
    """

    def __init__(self, log_path: str | Path, annotators: Sequence[str] = ("a1", "a2")):
        if len(set(annotators)) < 2:
            raise ValueError("need at least two distinct annotators for consensus")
        self.log_path = Path(log_path)
        self.annotators = tuple(annotators)
        self.items: dict[str, ReviewItem] = {}
        self._lock = threading.Lock()
        self._log_count = 0

    # -- registration ----------------------------------------------------

    def add_item(self, item: ReviewItem) -> None:
        if item.item_id in self.items:
            raise ValueError(f"duplicate review item {item.item_id!r}")
        self.items[item.item_id] = item

    def add_templates(self, templates: Iterable[QuestionTemplate], flagged_only: bool = True):
        for template in templates:
            if flagged_only and template.transferable == "auto-ok":
                continue
            self.add_item(item_from_template(template))

    def add_samples(
        self,
        samples: Iterable[AdversarialSample],
        originating_questions: dict[str, str] | None = None,
    ):
        """originating_questions maps template id to the source question text,
        needed to validate edits on reworded-question variants."""
        lookup = originating_questions or {}
        for sample in samples:
            self.add_item(item_from_sample(sample, lookup.get(sample.template_id)))

    def replay(self) -> int:
        """Load the existing log, if any. Returns the number of verdicts kept."""
        if not self.log_path.exists():
            return 0
        kept = 0
        for record in read_jsonl(self.log_path):
            verdict = Verdict.from_record(record)
            item = self.items.get(verdict.item_id)
            if item is None:
                logger.warning("verdict for unknown item %s skipped", verdict.item_id)
                continue
            item.verdicts[verdict.annotator] = verdict
            kept += 1
        self._log_count = kept
        self._recompute()
        return kept

    # -- verdicts ---------------------------------------------------------

    def submit(self, verdict: Verdict) -> ReviewItem:
        item = self.items.get(verdict.item_id)
        if item is None:
            raise UnknownItemError(verdict.item_id)
        if verdict.annotator not in self.annotators:
            raise UnknownAnnotatorError(f"annotator {verdict.annotator!r} is not registered")
        if verdict.decision not in DECISIONS:
            raise VerdictValidationError(f"unknown decision {verdict.decision!r}")
        if verdict.decision == DECISION_EDIT:
            if verdict.new_text is None:
                raise VerdictValidationError("edit requires new_text")
            _validate_edit(item, verdict.new_text)
        elif verdict.new_text is not None:
            raise VerdictValidationError("new_text is only valid with an edit")
        if verdict.reason is not None and verdict.reason not in REJECT_REASONS:
            raise VerdictValidationError(f"unknown reason {verdict.reason!r}")
        if verdict.ts == 0.0:
            verdict = dataclasses.replace(verdict, ts=time.time())
        with self._lock:
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(jsonl_line(verdict.to_record()) + "\n")
            self._log_count += 1
            item.verdicts[verdict.annotator] = verdict
            self._recompute()
        return item

    # -- status resolution -------------------------------------------------

    def _flagged_triplets(self) -> set[tuple[str, str, str]]:
        return {
            item.triplet
            for item in self.items.values()
            if any(v.decision == DECISION_FLAG for v in item.verdicts.values())
        }

    def _recompute(self) -> None:
        flagged = self._flagged_triplets()
        for item in self.items.values():
            item.status, item.final_text = _resolve(item, flagged)

    # -- queries ------------------------------------------------------------

    def queue(self, kind: str | None = None, status: str | None = None) -> list[ReviewItem]:
        """Unresolved items by default; flagged templates sort before samples."""
        wanted = {STATUS_PENDING, STATUS_CONFLICT} if status is None else {status}
        items = [
            item
            for item in self.items.values()
            if item.status in wanted and (kind is None or item.item_kind == kind)
        ]
        items.sort(key=lambda i: (i.item_kind != ITEM_TEMPLATE, i.item_id))
        return items

    def get(self, item_id: str) -> ReviewItem:
        item = self.items.get(item_id)
        if item is None:
            raise UnknownItemError(item_id)
        return item

    def status_counts(self) -> dict[str, int]:
        counts = {s: 0 for s in (STATUS_PENDING, STATUS_ACCEPTED, STATUS_REJECTED, STATUS_CONFLICT)}
        for item in self.items.values():
            counts[item.status] += 1
        return counts

    def progress(self) -> dict:
        counts = self.status_counts()
        total = len(self.items)
        per_annotator = {}
        for annotator in self.annotators:
            judged = [i for i in self.items.values() if annotator in i.verdicts]
            breakdown = {d: 0 for d in DECISIONS}
            for item in judged:
                breakdown[item.verdicts[annotator].decision] += 1
            per_annotator[annotator] = {"judged": len(judged), "decisions": breakdown}
        by_kind: dict[str, dict[str, int]] = {}
        for item in self.items.values():
            kind = item.payload.get("kind") or item.item_kind
            by_kind.setdefault(kind, {s: 0 for s in counts})[item.status] += 1
        return {
            "generated": total,
            "statuses": counts,
            "acceptance_rate": counts[STATUS_ACCEPTED] / total if total else None,
            "per_annotator": per_annotator,
            "by_kind": by_kind,
            "log_entries": self._log_count,
        }

    def export_resolved(self) -> dict:
        """Accepted items with final text, new blocklist keys, funnel counts."""
        accepted_templates = []
        accepted_samples = []
        for item in sorted(self.items.values(), key=lambda i: i.item_id):
            if item.status != STATUS_ACCEPTED:
                continue
            record = dict(item.payload)
            record["item_id"] = item.item_id
            record["question"] = item.final_text
            if item.item_kind == ITEM_TEMPLATE:
                accepted_templates.append(record)
            else:
                accepted_samples.append(record)
        counts = self.status_counts()
        total = len(self.items)
        return {
            "accepted_templates": accepted_templates,
            "accepted_samples": accepted_samples,
            "blocklist_additions": [list(key) for key in sorted(self._flagged_triplets())],
            "funnel": {
                "generated": total,
                "accepted": counts[STATUS_ACCEPTED],
                "rejected": counts[STATUS_REJECTED],
                "conflict": counts[STATUS_CONFLICT],
                "pending": counts[STATUS_PENDING],
                "acceptance_rate": counts[STATUS_ACCEPTED] / total if total else None,
            },
        }


def _resolve(
    item: ReviewItem, flagged_triplets: set[tuple[str, str, str]]
) -> tuple[str, str | None]:
    """Status plus final text from the item's latest verdicts.

    Precedence: triplet flagged anywhere -> rejected (cascade); any reject ->
    rejected; two accepts or two identical edits -> accepted; accept+edit or
    differing edits -> conflict; anything less -> pending.
    """
    original = item.payload["question"]
    if item.triplet in flagged_triplets:
        return STATUS_REJECTED, None
    decisions = list(item.verdicts.values())
    if any(v.decision == DECISION_REJECT for v in decisions):
        return STATUS_REJECTED, None
    accepts = sum(v.decision == DECISION_ACCEPT for v in decisions)
    edits = [v.new_text for v in decisions if v.decision == DECISION_EDIT]
    if accepts and edits:
        return STATUS_CONFLICT, None
    if len(set(edits)) > 1:
        return STATUS_CONFLICT, None
    if accepts >= 2:
        return STATUS_ACCEPTED, original
    if len(edits) >= 2:
        return STATUS_ACCEPTED, edits[0]
    return STATUS_PENDING, None


# -- HTTP service -----------------------------------------------------------


def create_app(store: ReviewStore, static_dir: str | Path | None = None):
    """FastAPI app exposing the review workflow under /api/v1.

    When static_dir exists it is mounted at the root so the service can hand
    out the browser UI bundle alongside the API.
    """
    from fastapi import FastAPI, HTTPException, Request
    from fastapi.responses import JSONResponse

    app = FastAPI(title="qforge review", docs_url=None, redoc_url=None)

    @app.get("/api/v1/queue")
    def get_queue(kind: str | None = None, status: str | None = None) -> JSONResponse:
        if kind is not None and kind not in (ITEM_TEMPLATE, ITEM_SAMPLE):
            raise HTTPException(status_code=400, detail=f"unknown kind {kind!r}")
        items = store.queue(kind=kind, status=status)
        return JSONResponse({"items": [i.to_jsonable() for i in items], "count": len(items)})

    @app.get("/api/v1/item/{item_id}")
    def get_item(item_id: str) -> JSONResponse:
        try:
            item = store.get(item_id)
        except UnknownItemError:
            raise HTTPException(status_code=404, detail=f"unknown item {item_id!r}")
        return JSONResponse(item.to_jsonable())

    @app.post("/api/v1/verdict")
    async def post_verdict(request: Request) -> JSONResponse:
        body = await request.json()
        annotator = body.get("annotator") or request.headers.get("x-annotator-id")
        if not annotator:
            raise HTTPException(status_code=400, detail="annotator missing")
        verdict = Verdict(
            annotator=str(annotator),
            item_id=str(body.get("item_id", "")),
            decision=str(body.get("decision", "")),
            new_text=body.get("new_text"),
            reason=body.get("reason"),
        )
        try:
            item = store.submit(verdict)
        except UnknownItemError as exc:
            raise HTTPException(status_code=404, detail=f"unknown item {exc.args[0]!r}")
        except (UnknownAnnotatorError, VerdictValidationError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return JSONResponse(item.to_jsonable())

    @app.get("/api/v1/progress")
    def get_progress() -> JSONResponse:
        return JSONResponse(store.progress())

    @app.get("/api/v1/export")
    def get_export() -> JSONResponse:
        return JSONResponse(store.export_resolved())

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
