"""Run configuration: schema, file loading, flag overrides, hashing.

The config file is JSON with a ``version`` key. Unknown keys are rejected
so typos fail loudly. Precedence is flag > file > default. Full-scale
dimensions (768 token / 384 hidden / 768 decoder) are reachable through
the same fields; the defaults are desk-scale.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Optional

from rstparse.core import DiscourseError
from rstparse.kernel import config_hash

CONFIG_VERSION = 1

AGGREGATIONS = ("average", "self-attentive", "gru-attentive")
BOUNDARIES = ("both", "left", "right", "none")
BOUNDARY_STAGES = ("after", "before")
EMBEDDING_MODES = ("hash", "precomputed")
LABEL_MODES = ("observed", "full")


class ConfigError(DiscourseError):
    """The configuration violates the schema."""


@dataclass
class RunConfig:
    """All tunables for building, training, and running the parser."""

    # dimensions
    token_dim: int = 32
    hidden_dim: int = 16
    edu_dim: int = 0  # 0 means 2 * hidden_dim
    latent_dim: int = 64
    encoder_layers: int = 1
    attn_hidden: int = 8

    # input representation
    embedding_mode: str = "hash"
    hash_buckets: int = 4096
    embedding_file: Optional[str] = None
    aggregation: str = "average"
    boundary: str = "both"
    boundary_stage: str = "after"

    # training
    epochs: int = 30
    batch_size: int = 3
    learning_rate: float = 0.001
    weight_decay: float = 0.0005
    dropout: float = 0.5
    seed: int = 1
    label_mode: str = "observed"

    # inference
    beam_size: int = 5

    def __post_init__(self):
        if self.edu_dim == 0:
            self.edu_dim = 2 * self.hidden_dim
        self.validate()

    def validate(self) -> None:
        positive = (
            "token_dim", "hidden_dim", "edu_dim", "latent_dim",
            "encoder_layers", "attn_hidden", "hash_buckets", "epochs",
            "batch_size", "beam_size",
        )
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"config field {name!r} must be positive")
        if self.learning_rate < 0 or self.weight_decay < 0:
            raise ConfigError("learning_rate and weight_decay must be non-negative")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        checks = (
            ("aggregation", AGGREGATIONS),
            ("boundary", BOUNDARIES),
            ("boundary_stage", BOUNDARY_STAGES),
            ("embedding_mode", EMBEDDING_MODES),
            ("label_mode", LABEL_MODES),
        )
        for name, allowed in checks:
            if getattr(self, name) not in allowed:
                raise ConfigError(
                    f"config field {name!r} must be one of {allowed}, "
                    f"got {getattr(self, name)!r}"
                )
        if self.embedding_mode == "precomputed" and not self.embedding_file:
            raise ConfigError("precomputed embedding_mode requires embedding_file")

    def to_dict(self) -> dict:
        obj = dataclasses.asdict(self)
        obj["version"] = CONFIG_VERSION
        return obj

    def hash(self) -> str:
        return config_hash(self.to_dict())

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in dataclasses.fields(cls))

    @classmethod
    def from_dict(cls, obj: dict, where: str = "config") -> "RunConfig":
        obj = dict(obj)
        version = obj.pop("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigError(f"{where}: unsupported config version {version}")
        unknown = set(obj) - set(cls.field_names())
        if unknown:
            raise ConfigError(f"{where}: unknown key {sorted(unknown)[0]!r}")
        try:
            return cls(**obj)
        except TypeError as exc:
            raise ConfigError(f"{where}: {exc}") from exc

    @classmethod
    def from_file(cls, path, overrides: Optional[dict] = None) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        if overrides:
            obj.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(obj, where=str(path))

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
