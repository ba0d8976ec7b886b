"""Run configuration: JSON documents, schedule construction, content hashing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

from ..povm import FAMILIES
from ..qcore import STATE_PRIORS

ALGORITHMS = ("standard", "abqt", "naqst")
MAX_TOTAL_COPIES = 10**7
SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass
class RunConfig:
    """Resolved configuration of one experiment run.

    ``schedule`` wins when given; otherwise ``copies`` is split into
    ``steps`` geometric batches for standard/naqst runs and into
    fixed-size ``batch`` chunks for abqt runs.
    """

    algorithm: str = "abqt"
    family: str = "sic"
    adaptive: bool = False
    n_bank: int = 100
    copies: int | None = None
    steps: int = 12
    batch: int = 100
    schedule: list[int] | None = None
    trials: int = 1
    seed: int = 0
    n_qubits: int = 2
    prior: str = "mixed-hs"
    n_resample: int = 16
    n_steps: int = 4
    n_candidates: int = 40
    mh_steps: int = 10
    step_scale: float = 0.1
    orientation: str = "fixed"  # standard-QST only: fixed | random
    checkpoint: str | None = None
    out: str | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.prior not in STATE_PRIORS:
            raise ConfigError(f"unknown prior {self.prior!r}; expected one of {STATE_PRIORS}")
        if self.orientation not in ("fixed", "random"):
            raise ConfigError("orientation must be 'fixed' or 'random'")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        for name in ("n_bank", "steps", "batch", "n_resample", "n_steps", "n_candidates", "n_qubits"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.mh_steps < 0:
            raise ConfigError("mh_steps must be nonnegative")
        if self.schedule is not None:
            self.schedule = [int(m) for m in self.schedule]
            if not self.schedule or any(m < 1 for m in self.schedule):
                raise ConfigError("schedule entries must be positive integers")
        total = sum(self.resolved_schedule())
        if total > MAX_TOTAL_COPIES:
            raise ConfigError(f"schedule totals {total} copies; limit is {MAX_TOTAL_COPIES}")

    def resolved_schedule(self) -> list[int]:
        if self.schedule is not None:
            return list(self.schedule)
        if self.copies is None:
            return [50 * 2**t for t in range(self.steps)]
        if self.algorithm == "abqt":
            return fixed_batches(self.copies, self.batch)
        return geometric_schedule(self.copies, self.steps)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["resolved_schedule"] = self.resolved_schedule()
        return doc

    def replace(self, **changes) -> "RunConfig":
        doc = asdict(self)
        doc.update(changes)
        return RunConfig(**doc)


def geometric_schedule(total: int, steps: int, ratio: float = 2.0) -> list[int]:
    """Split ``total`` copies into ``steps`` batches growing by ``ratio``.

    Batches are at least 1 and sum exactly to ``total``; the remainder from
    rounding lands on the last batch.
    """
    if total < steps:
        raise ConfigError(f"cannot split {total} copies into {steps} positive batches")
    raw = [ratio**t for t in range(steps)]
    scale = total / sum(raw)
    out = [max(1, int(round(r * scale))) for r in raw]
    out[-1] += total - sum(out)
    if out[-1] < 1:
        raise ConfigError("schedule rounding produced a non-positive final batch")
    return out


def fixed_batches(total: int, batch: int) -> list[int]:
    """Split ``total`` copies into fixed-size batches (last one may be short)."""
    if total < 1:
        raise ConfigError("total copies must be positive")
    out = [batch] * (total // batch)
    if total % batch:
        out.append(total % batch)
    return out


def canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: RunConfig) -> str:
    """Content hash of the fully resolved configuration."""
    return hashlib.sha256(canonical_json(cfg.to_dict()).encode()).hexdigest()[:12]


def load_config_file(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")
    return doc


def build_config(file_doc: dict | None = None, **overrides) -> RunConfig:
    """Merge config-file values and explicit overrides; overrides win."""
    known = {f.name for f in fields(RunConfig)}
    merged: dict = {}
    for source in (file_doc or {}, {k: v for k, v in overrides.items() if v is not None}):
        for key, value in source.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            merged[key] = value
    return RunConfig(**merged)
