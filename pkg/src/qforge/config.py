"""Pipeline configuration: one dataclass shared by the CLI and the stages."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .evaluate import make_buckets
from .folds import ConfigValueError
from .kg import DEFAULT_RELATIONS
from .runio import dumps_canonical, read_json, sha256_text
from .variants import SELECTION_MODES

# Fields holding input paths; validated for existence per stage.
PATH_FIELDS = ("kg", "corpus", "catalog", "folds", "blocklist")


@dataclass(frozen=True)
class PipelineConfig:
    kg: str | None = None
    corpus: str | None = None
    catalog: str | None = None
    folds: str | None = None
    blocklist: str | None = None
    outdir: str = "out"
    whitelist: tuple[str, ...] | None = None  # None = the default relation set
    fix_a_cap: int = 5
    fix_q_cap: int = 5
    dedupe_threshold: float = 0.9
    seed: int = 0
    replace_prob: float = 0.5
    bucket_edges: tuple[int, ...] = (0, 10, 50)
    selection: str = "truncate"
    annotators: tuple[str, ...] = ("a1", "a2")
    image_base_url: str = ""

    @property
    def relations(self) -> tuple[str, ...]:
        return self.whitelist if self.whitelist is not None else DEFAULT_RELATIONS

    def to_jsonable(self) -> dict:
        record = dataclasses.asdict(self)
        record["whitelist"] = list(self.whitelist) if self.whitelist is not None else None
        record["bucket_edges"] = list(self.bucket_edges)
        record["annotators"] = list(self.annotators)
        return record

    def config_hash(self) -> str:
        return sha256_text(dumps_canonical(self.to_jsonable()))

    def merged(self, overrides: Mapping[str, object]) -> "PipelineConfig":
        """New config with every non-None override applied."""
        known = {f.name for f in dataclasses.fields(self)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise ConfigValueError(f"unknown config keys: {', '.join(unknown)}")
        cleaned = {k: _coerce(k, v) for k, v in overrides.items() if v is not None}
        return dataclasses.replace(self, **cleaned)

    def validate(self, required_paths: Sequence[str] = ()) -> None:
        """Check invariants; required_paths name fields that must point at
        existing files for the stage about to run."""
        for name in required_paths:
            value = getattr(self, name)
            if value is None:
                raise ConfigValueError(f"config field {name!r} is required for this stage")
        for name in PATH_FIELDS:
            value = getattr(self, name)
            if value is not None and not Path(value).exists():
                raise ConfigValueError(f"{name} path does not exist: {value}")
        if self.fix_a_cap < 0 or self.fix_q_cap < 0:
            raise ConfigValueError("variant caps must be >= 0")
        if not 0.0 <= self.dedupe_threshold <= 1.0:
            raise ConfigValueError(f"dedupe_threshold must be in [0, 1], got {self.dedupe_threshold}")
        if not 0.0 <= self.replace_prob <= 1.0:
            raise ConfigValueError(f"replace_prob must be in [0, 1], got {self.replace_prob}")
        if self.selection not in SELECTION_MODES:
            raise ConfigValueError(
                f"selection must be one of {', '.join(SELECTION_MODES)}, got {self.selection!r}"
            )
        if len(set(self.annotators)) < 2:
            raise ConfigValueError("at least two distinct annotators are required")
        make_buckets(self.bucket_edges)  # raises on bad edges


def _coerce(key: str, value: object) -> object:
    if key in ("whitelist", "annotators") and isinstance(value, list):
        return tuple(str(v) for v in value)
    if key == "bucket_edges" and isinstance(value, (list, tuple)):
        return tuple(int(v) for v in value)
    return value


def load_config(path: str | Path | None, overrides: Mapping[str, object] | None = None) -> PipelineConfig:
    """Config file (JSON object of field names) plus flag overrides."""
    config = PipelineConfig()
    if path is not None:
        data = read_json(path)
        if not isinstance(data, dict):
            raise ConfigValueError(f"config file must hold a JSON object: {path}")
        config = config.merged(data)
    if overrides:
        config = config.merged(overrides)
    return config
