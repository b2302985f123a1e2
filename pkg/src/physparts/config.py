"""Estimation configuration: contact threshold, candidate counts, seeds, weights.

Loads from JSON or TOML; unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

try:
    import tomllib  # py311+
except ImportError:  # pragma: no cover - depends on interpreter version
    import tomli as tomllib

from .errors import MissingFile, SchemaViolation


@dataclass(frozen=True)
class EstimationConfig:
    tau: float = 0.02               # contact distance threshold, normalized units
    m: int = 12                     # in-plane axis candidates
    k_max: int = 4                  # k-means upper bound for pivot clustering
    seed: int = 0
    samples: int = 10000            # surface samples per part
    weight_alignment: float = 0.5
    weight_edge_support: float = 0.3
    weight_extent: float = 0.2

    def __post_init__(self):
        if self.tau <= 0:
            raise SchemaViolation("tau", f"must be > 0, got {self.tau}")
        if self.m < 1:
            raise SchemaViolation("m", f"must be >= 1, got {self.m}")
        if self.k_max < 1:
            raise SchemaViolation("k_max", f"must be >= 1, got {self.k_max}")
        if self.samples < 1:
            raise SchemaViolation("samples", f"must be >= 1, got {self.samples}")

    def to_dict(self) -> dict:
        return asdict(self)


def config_from_dict(data: dict) -> EstimationConfig:
    known = {f.name for f in fields(EstimationConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise SchemaViolation(unknown[0], "unknown config key")
    return EstimationConfig(**data)


def load_config(path) -> EstimationConfig:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"{path} does not exist")
    if path.suffix.lower() == ".toml":
        with open(path, "rb") as fh:
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise SchemaViolation(str(path), f"invalid TOML: {exc}") from None
    else:
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SchemaViolation(str(path), f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise SchemaViolation(str(path), "config must be a table/object")
    return config_from_dict(data)
