"""Run configuration: JSON on disk, a validated dataclass in memory."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigError

DATASET_KINDS = ("wdbc", "semeion", "banana", "diabetes", "twonorm", "sinusoid")


@dataclass
class ProxConfig:
    beta: float
    h: float
    epsilon: float
    N: int
    iterations: int
    model: dict
    init: dict
    dataset: dict
    delta: float = 1e-3
    L: int = 300
    seed: int = 0
    noise_scale: float = 1.0
    log_every: int = 100
    checkpoint_every: int = 0
    split: dict | None = None
    normalize_weights: bool = True
    record_timing: bool = False
    name: str = "run"
    base_dir: str | None = field(default=None, compare=False)

    def __post_init__(self):
        self.validate()

    def validate(self):
        for key in ("beta", "h", "epsilon", "delta"):
            val = getattr(self, key)
            if not isinstance(val, (int, float)) or not val > 0:
                raise ConfigError(f"{key} must be a positive number, got {val!r}")
        for key in ("N", "L", "iterations", "log_every"):
            val = getattr(self, key)
            if not isinstance(val, int) or val < 1:
                raise ConfigError(f"{key} must be an integer >= 1, got {val!r}")
        if not isinstance(self.checkpoint_every, int) or self.checkpoint_every < 0:
            raise ConfigError("checkpoint_every must be a nonnegative integer")
        if self.noise_scale < 0:
            raise ConfigError("noise_scale must be >= 0")
        if self.dataset.get("kind") not in DATASET_KINDS:
            raise ConfigError(f"dataset.kind must be one of {DATASET_KINDS}")
        if "variant" not in self.model:
            raise ConfigError("model.variant is required")
        if "blocks" not in self.init:
            raise ConfigError("init.blocks is required")

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "ProxConfig":
        known = set(cls.__dataclass_fields__) - {"base_dir"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**copy.deepcopy(d), base_dir=None if base_dir is None else str(base_dir))
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    def replace(self, **changes) -> "ProxConfig":
        d = self.to_dict()
        d.update(changes)
        return ProxConfig.from_dict(d, self.base_dir)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def resolve(self, path) -> Path:
        path = Path(path)
        if path.is_absolute() or self.base_dir is None:
            return path
        return Path(self.base_dir) / path


def load_config(path) -> ProxConfig:
    path = Path(path)
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return ProxConfig.from_dict(raw, base_dir=path.parent.resolve())
