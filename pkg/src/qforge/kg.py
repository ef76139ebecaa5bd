"""Triplet knowledge graph: loading, sibling queries, and nearest-node search.

Node identifiers are the normalized surface labels themselves; all matching
elsewhere in the package runs on the same normalization.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

logger = logging.getLogger(__name__)

DEFAULT_RELATIONS: tuple[str, ...] = (
    "/r/RelatedTo",
    "/r/IsA",
    "/r/PartOf",
    "/r/HasA",
    "/r/UsedFor",
    "/r/CapableOf",
    "/r/AtLocation",
    "/r/Desires",
    "/r/MadeOf",
)

# Synthesized surface form: "[<head>] <gloss> [<tail>]".
RELATION_GLOSSES: dict[str, str] = {
    "/r/RelatedTo": "related to",
    "/r/IsA": "is a",
    "/r/PartOf": "part of",
    "/r/HasA": "has",
    "/r/UsedFor": "used for",
    "/r/CapableOf": "capable of",
    "/r/AtLocation": "at location",
    "/r/Desires": "desires",
    "/r/MadeOf": "made of",
}

_WS = re.compile(r"\s+")
_VOWELS = "aeiou"


class KgParseError(ValueError):
    """Malformed row in a triplet or blocklist file."""

    def __init__(self, path: str | Path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class EmptyIndexError(ValueError):
    pass


def normalize_label(text: str) -> str:
    """Lowercase, trim, and collapse internal whitespace. Idempotent."""
    return _WS.sub(" ", text.strip().lower())


def stem_token(token: str) -> str:
    """Crude suffix-stripping stem used only as a matching fallback."""
    t = token.lower()
    for suffix in ("ing", "ed", "es", "s"):
        if t.endswith(suffix) and len(t) - len(suffix) >= 2:
            t = t[: -len(suffix)]
            break
    if len(t) >= 3 and t[-1] == t[-2] and t[-1] not in _VOWELS:
        t = t[:-1]
    if t.endswith("e") and len(t) >= 3:
        t = t[:-1]
    return t


def lemma_of(label: str) -> str:
    return " ".join(stem_token(tok) for tok in label.split())


@dataclass(frozen=True)
class KgNode:
    id: str
    label: str
    lemma: str

    @classmethod
    def from_label(cls, raw: str) -> "KgNode":
        label = normalize_label(raw)
        return cls(id=label, label=label, lemma=lemma_of(label))


@dataclass(frozen=True)
class KgTriplet:
    head: str
    relation: str
    tail: str
    surface_text: str | None = None
    blocked: bool = False

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.head, self.relation, self.tail)


def triplet_key_str(key: tuple[str, str, str]) -> str:
    return "|".join(key)


@dataclass
class KgIndex:
    """Immutable after load; safe for concurrent readers."""

    nodes: dict[str, KgNode] = field(default_factory=dict)
    triplets: list[KgTriplet] = field(default_factory=list)
    by_head_rel: dict[tuple[str, str], list[KgTriplet]] = field(default_factory=dict)
    by_tail_rel: dict[tuple[str, str], list[KgTriplet]] = field(default_factory=dict)
    node_labels: list[str] = field(default_factory=list)
    blocked_count: int = 0

    def lookup(self, key: tuple[str, str, str]) -> KgTriplet | None:
        for t in self.by_head_rel.get((key[0], key[1]), ()):
            if t.tail == key[2]:
                return t
        return None

    def to_jsonable(self) -> dict:
        return {
            "nodes": [n.label for n in map(self.nodes.get, self.node_labels)],
            "triplets": [
                {"head": t.head, "relation": t.relation, "tail": t.tail, "surface_text": t.surface_text}
                for t in self.triplets
            ],
            "blocked_count": self.blocked_count,
        }


def _parse_key_row(path: str | Path, line_no: int, parts: list[str]) -> tuple[str, str, str]:
    if len(parts) < 3:
        raise KgParseError(path, line_no, f"expected at least 3 tab-separated fields, got {len(parts)}")
    head = normalize_label(parts[0])
    relation = parts[1].strip()
    tail = normalize_label(parts[2])
    if not head or not relation or not tail:
        raise KgParseError(path, line_no, "empty head, relation, or tail")
    return head, relation, tail


def load_blocklist(path: str | Path) -> set[tuple[str, str, str]]:
    """Blocklist rows are `head \\t relation \\t tail`; `#` comments ignored."""
    keys: set[tuple[str, str, str]] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip("\n")
            if not stripped.strip() or stripped.lstrip().startswith("#"):
                continue
            keys.add(_parse_key_row(path, line_no, stripped.split("\t")))
    return keys


def load_kg(
    triplet_file: str | Path,
    whitelist: Iterable[str] | None = None,
    blocklist: str | Path | set[tuple[str, str, str]] | None = None,
) -> KgIndex:
    """Load a triplet TSV into a deduplicated, whitelist-filtered index.

    Rows are `head \\t relation \\t tail [\\t surface_text]`; lines starting
    with `#` are comments. Duplicate (head, relation, tail) keys keep the
    first occurrence. Blocklisted triplets are counted and dropped.
    """
    allowed = frozenset(whitelist) if whitelist is not None else frozenset(DEFAULT_RELATIONS)
    if isinstance(blocklist, (str, Path)):
        blocked_keys = load_blocklist(blocklist)
    else:
        blocked_keys = set(blocklist or ())

    index = KgIndex()
    seen: set[tuple[str, str, str]] = set()
    with open(triplet_file, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip("\n")
            if not stripped.strip() or stripped.lstrip().startswith("#"):
                continue
            parts = stripped.split("\t")
            head, relation, tail = _parse_key_row(triplet_file, line_no, parts)
            if relation not in allowed:
                continue
            key = (head, relation, tail)
            if key in seen:
                continue
            seen.add(key)
            if key in blocked_keys:
                index.blocked_count += 1
                continue
            surface = parts[3].strip() if len(parts) > 3 and parts[3].strip() else None
            triplet = KgTriplet(head=head, relation=relation, tail=tail, surface_text=surface)
            index.triplets.append(triplet)
            for label in (head, tail):
                if label not in index.nodes:
                    index.nodes[label] = KgNode.from_label(label)
            index.by_head_rel.setdefault((head, relation), []).append(triplet)
            index.by_tail_rel.setdefault((tail, relation), []).append(triplet)

    index.triplets.sort(key=lambda t: t.key)
    for bucket in index.by_head_rel.values():
        bucket.sort(key=lambda t: t.tail)
    for bucket in index.by_tail_rel.values():
        bucket.sort(key=lambda t: t.head)
    index.node_labels = sorted(index.nodes)
    if not index.triplets:
        logger.warning("knowledge graph %s is empty after filtering", triplet_file)
    return index


def siblings_fixed_head(index: KgIndex, head: str, relation: str, exclude_tail: str) -> list[KgTriplet]:
    """Triplets sharing (head, relation), excluding the given tail; tail-ascending."""
    head = normalize_label(head)
    exclude_tail = normalize_label(exclude_tail)
    return [
        t
        for t in index.by_head_rel.get((head, relation), ())
        if t.tail != exclude_tail and not t.blocked
    ]


def siblings_fixed_tail(index: KgIndex, tail: str, relation: str, exclude_head: str) -> list[KgTriplet]:
    """Triplets sharing (tail, relation), excluding the given head; head-ascending."""
    tail = normalize_label(tail)
    exclude_head = normalize_label(exclude_head)
    return [
        t
        for t in index.by_tail_rel.get((tail, relation), ())
        if t.head != exclude_head and not t.blocked
    ]


def levenshtein(a: str, b: str, cutoff: int | None = None) -> int:
    """Unit-cost edit distance (insert/delete/substitute).

    With `cutoff`, any true distance above it may be reported as cutoff + 1;
    values <= cutoff are always exact.
    """
    if a == b:
        return 0
    la, lb = len(a), len(b)
    if la == 0 or lb == 0:
        return la or lb
    if cutoff is not None and abs(la - lb) > cutoff:
        return cutoff + 1
    if la > lb:
        a, b, la, lb = b, a, lb, la
    prev = list(range(la + 1))
    cur = [0] * (la + 1)
    for j in range(1, lb + 1):
        cur[0] = j
        bj = b[j - 1]
        row_min = j
        for i in range(1, la + 1):
            v = prev[i - 1] + (a[i - 1] != bj)
            d = prev[i] + 1
            if d < v:
                v = d
            e = cur[i - 1] + 1
            if e < v:
                v = e
            cur[i] = v
            if v < row_min:
                row_min = v
        if cutoff is not None and row_min > cutoff:
            return cutoff + 1
        prev, cur = cur, prev
    return prev[la]


def nearest_node(index: KgIndex, answer: str) -> KgNode:
    """Node whose label minimizes edit distance to the normalized answer.

    Ties break to the lexicographically smallest label: candidates are
    scanned in sorted label order and only a strictly smaller distance
    replaces the incumbent.
    """
    if not index.node_labels:
        raise EmptyIndexError("cannot resolve an answer against an empty index")
    query = normalize_label(answer)
    best_label: str | None = None
    best = -1
    for label in index.node_labels:
        if best_label is not None:
            if abs(len(label) - len(query)) >= best:
                continue
            d = levenshtein(query, label, cutoff=best - 1)
            if d >= best:
                continue
        else:
            d = levenshtein(query, label)
        best_label, best = label, d
        if best == 0:
            break
    assert best_label is not None
    return index.nodes[best_label]


def render_surface(triplet: KgTriplet) -> str:
    """Stored surface text if present, else `[head] <gloss> [tail]`."""
    if triplet.surface_text:
        return triplet.surface_text
    gloss = RELATION_GLOSSES.get(triplet.relation)
    if gloss is None:
        gloss = _fallback_gloss(triplet.relation)
    return f"[{triplet.head}] {gloss} [{triplet.tail}]"


def _fallback_gloss(relation: str) -> str:
    # "/r/SomeName" -> "some name"; keeps rendering total for custom whitelists.
    name = relation.rsplit("/", 1)[-1]
    spaced = re.sub(r"(?<=[a-z0-9])(?=[A-Z])", " ", name)
    return spaced.lower()
