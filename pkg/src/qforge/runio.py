"""JSON/JSONL serialization, hashing, and atomic stage-directory writes."""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
from pathlib import Path
from typing import Any, Iterable, Iterator


def dumps_canonical(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def write_json(path: Path | str, obj: Any) -> None:
    Path(path).write_text(dumps_canonical(obj), encoding="utf-8")


def read_json(path: Path | str) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def jsonl_line(record: dict) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False)


def write_jsonl(path: Path | str, records: Iterable[dict]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(jsonl_line(rec) + "\n")
            n += 1
    return n


def read_jsonl(path: Path | str) -> Iterator[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_text(text: str) -> str:
    return sha256_bytes(text.encode("utf-8"))


def sha256_file(path: Path | str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class StageWriter:
    """Collects a stage's artifacts in a temp dir, renames into place on success.

    A failed stage leaves any previous output untouched.
    """

    def __init__(self, outdir: Path | str, stage: str):
        self.outdir = Path(outdir)
        self.stage = stage
        self.final_dir = self.outdir / stage
        self.outdir.mkdir(parents=True, exist_ok=True)
        self._tmp = Path(tempfile.mkdtemp(prefix=f".tmp-{stage}-", dir=self.outdir))

    def path(self, name: str) -> Path:
        p = self._tmp / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def commit(self, manifest: dict) -> Path:
        outputs = {}
        for p in sorted(self._tmp.rglob("*")):
            if p.is_file():
                outputs[str(p.relative_to(self._tmp))] = sha256_file(p)
        manifest = dict(manifest, stage=self.stage, outputs=outputs)
        (self._tmp / "manifest.json").write_text(dumps_canonical(manifest), encoding="utf-8")
        if self.final_dir.exists():
            shutil.rmtree(self.final_dir)
        os.replace(self._tmp, self.final_dir)
        return self.final_dir

    def abort(self) -> None:
        shutil.rmtree(self._tmp, ignore_errors=True)
