"""Shared fixtures: tiny hand-built inputs plus a seeded synthetic workspace."""

from __future__ import annotations

import json
import random
from pathlib import Path

import pytest

from qforge.kg import load_kg

HEADS = [
    "bottle", "jar", "knife", "spoon", "kettle", "basket", "lamp", "towel",
    "ladder", "bucket", "candle", "mirror", "hammer", "pillow", "wallet",
    "helmet", "guitar", "teapot", "oven", "broom", "razor", "funnel",
    "magnet", "stapler", "whistle", "tripod", "anchor", "shovel", "net", "pan",
]
VERBS = ["store", "hold", "cut", "scoop", "wash", "carry", "open", "mix", "heat", "light"]
NOUNS = ["liquid", "bread", "sauce", "grain", "cloth", "rope", "paint", "soup", "seeds", "fuel"]

QUESTION_PATTERNS = {
    "/r/UsedFor": [
        ("what is used for {t} in this image?", "gerund"),
        ("name the object someone would pick for {t}.", "gerund"),
        ("which item shown here helps with {t} the most?", "gerund"),
        ("if you needed a tool for {t}, what would you grab from this picture?", "gerund"),
    ],
    "/r/CapableOf": [
        ("which object here can {t}?", "identity"),
        ("what in the photo is able to {t} on its own?", "identity"),
        ("point out the thing that could {t} if needed.", "identity"),
    ],
    "/r/AtLocation": [
        ("what would you expect to see near the {t}?", "identity"),
        ("which of these objects usually lives at the {t}?", "identity"),
        ("name something kept by the {t} in this scene.", "identity"),
    ],
}

LOCATIONS = ["sink", "stove", "shed", "porch", "pantry", "garage", "bench", "dock"]


def write_kg(path: Path, rows) -> Path:
    lines = ["# head\trelation\ttail[\tsurface]"]
    for row in rows:
        lines.append("\t".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_jsonl_file(path: Path, records) -> Path:
    path.write_text(
        "".join(json.dumps(r, sort_keys=True) + "\n" for r in records), encoding="utf-8"
    )
    return path


def write_json_file(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def make_workspace(
    root: Path,
    n_samples: int = 60,
    n_images: int = 12,
    n_folds: int = 3,
    seed: int = 11,
    sibling_range: tuple[int, int] = (1, 4),
) -> dict:
    """Seeded synthetic corpus: facts, questions embedding an inflected tail,
    an image catalog over the answer objects, and image folds."""
    root.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    tails = [f"{v} {n}" for v in VERBS for n in NOUNS]
    kg_rows: set[tuple[str, str, str]] = set()
    corpus = []
    relations = list(QUESTION_PATTERNS)

    for i in range(n_samples):
        relation = relations[i % len(relations)]
        head = rng.choice(HEADS)
        tail = rng.choice(LOCATIONS) if relation == "/r/AtLocation" else rng.choice(tails)
        kg_rows.add((head, relation, tail))
        pattern, inflection = rng.choice(QUESTION_PATTERNS[relation])
        if inflection == "gerund":
            verb, rest = tail.split(" ", 1)
            surface = {
                "store": "storing", "hold": "holding", "cut": "cutting",
                "scoop": "scooping", "wash": "washing", "carry": "carrying",
                "open": "opening", "mix": "mixing", "heat": "heating", "light": "lighting",
            }[verb] + " " + rest
        else:
            surface = tail
        corpus.append(
            {
                "id": f"s{i:03d}",
                "question": pattern.format(t=surface),
                "answer": head,
                "answer_node": head,
                "fact": [head, relation, tail],
                "image_id": f"img{rng.randrange(n_images):03d}",
            }
        )
        # sibling pool for both variant directions
        for _ in range(rng.randint(*sibling_range)):
            other_tail = rng.choice(LOCATIONS) if relation == "/r/AtLocation" else rng.choice(tails)
            if other_tail != tail:
                kg_rows.add((head, relation, other_tail))
        for _ in range(rng.randint(*sibling_range)):
            other_head = rng.choice(HEADS)
            if other_head != head:
                kg_rows.add((other_head, relation, tail))

    image_ids = [f"img{i:03d}" for i in range(n_images)]
    catalog = {}
    for image_id in image_ids:
        catalog[image_id] = sorted(rng.sample(HEADS, k=max(3, len(HEADS) // 3)))
    # every object must be somewhere, or assignment would starve
    for head in HEADS:
        if not any(head in objs for objs in catalog.values()):
            target = rng.choice(image_ids)
            catalog[target] = sorted(set(catalog[target]) | {head})

    shuffled = image_ids[:]
    rng.shuffle(shuffled)
    folds = []
    for k in range(n_folds):
        test = sorted(shuffled[k::n_folds])
        train = sorted(set(image_ids) - set(test))
        folds.append({"fold": k, "train_images": train, "test_images": test})

    paths = {
        "kg": write_kg(root / "kg.tsv", sorted(kg_rows)),
        "corpus": write_jsonl_file(root / "corpus.jsonl", corpus),
        "catalog": write_json_file(root / "catalog.json", catalog),
        "folds": write_json_file(root / "folds.json", folds),
        "outdir": root / "out",
    }
    paths["cli"] = [
        "--kg", str(paths["kg"]),
        "--corpus", str(paths["corpus"]),
        "--catalog", str(paths["catalog"]),
        "--folds", str(paths["folds"]),
        "--outdir", str(paths["outdir"]),
    ]
    return paths


@pytest.fixture
def workspace(tmp_path):
    return make_workspace(tmp_path)


BOTTLE_KG_ROWS = [
    ("bottle", "/r/UsedFor", "store liquid"),
    ("bottle", "/r/UsedFor", "hold water"),
    ("jar", "/r/UsedFor", "store liquid"),
    ("tank", "/r/UsedFor", "store liquid"),
    ("car", "/r/HasA", "4 wheels"),
    ("spoon", "/r/UsedFor", "scoop food"),
]


@pytest.fixture
def bottle_paths(tmp_path):
    """The minimal worked example: one question about storing liquid."""
    corpus = [
        {
            "id": "q1",
            "question": "what is used for storing liquid in this image?",
            "answer": "bottle",
            "answer_node": "bottle",
            "fact": ["bottle", "/r/UsedFor", "store liquid"],
            "image_id": "img1",
        }
    ]
    catalog = {
        "img1": ["bottle", "table"],
        "img2": ["bottle"],
        "img3": ["jar", "bottle"],
        "img4": ["tank", "jar"],
    }
    folds = [
        {"fold": 0, "train_images": ["img1", "img2"], "test_images": ["img3", "img4"]},
        {"fold": 1, "train_images": ["img3", "img4"], "test_images": ["img1", "img2"]},
    ]
    return {
        "kg": write_kg(tmp_path / "kg.tsv", BOTTLE_KG_ROWS),
        "corpus": write_jsonl_file(tmp_path / "corpus.jsonl", corpus),
        "catalog": write_json_file(tmp_path / "catalog.json", catalog),
        "folds": write_json_file(tmp_path / "folds.json", folds),
        "outdir": tmp_path / "out",
    }


@pytest.fixture
def bottle_index(bottle_paths):
    return load_kg(bottle_paths["kg"])
