"""Run configuration: one JSON document with five sections.

Sections are {simulate, model, loss, train, detect}. Missing sections or
keys fall back to the documented dataclass defaults; unknown sections or
keys are rejected by name, so typos fail loudly instead of silently using
a default.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

from .detection import DetectionConfig
from .errors import ConfigError, ValidationError
from .losses import LossConfig
from .simulator import SimConfig
from .training import TrainConfig


@dataclass(frozen=True)
class ModelSection:
    """Model sizes chosen by config; L and D always come from the data."""

    hidden_dim: int = 64
    num_blocks: int = 3
    kernel_size: int = 7

    def __post_init__(self):
        for name in ("hidden_dim", "num_blocks", "kernel_size"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be a positive integer")


_SECTIONS = {
    "simulate": SimConfig,
    "model": ModelSection,
    "loss": LossConfig,
    "train": TrainConfig,
    "detect": DetectionConfig,
}


def _build_section(name: str, cls, overrides: dict):
    if not isinstance(overrides, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    values = {}
    for key, value in overrides.items():
        if key not in known:
            raise ConfigError(f"unknown config key {name}.{key}")
        default = known[key].default
        if isinstance(default, tuple) and isinstance(value, list):
            value = tuple(value)
        values[key] = value
    try:
        return cls(**values)
    except (ValidationError, TypeError) as exc:
        raise ConfigError(f"bad config section {name!r}: {exc}") from exc


@dataclass(frozen=True)
class RunConfig:
    simulate: SimConfig = SimConfig()
    model: ModelSection = ModelSection()
    loss: LossConfig = LossConfig()
    train: TrainConfig = TrainConfig()
    detect: DetectionConfig = DetectionConfig()

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("run config must be a JSON object")
        for key in doc:
            if key not in _SECTIONS:
                raise ConfigError(f"unknown config section {key!r}")
        return cls(**{
            name: _build_section(name, section_cls, doc.get(name, {}))
            for name, section_cls in _SECTIONS.items()
        })

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def with_seed(self, seed: int) -> "RunConfig":
        """Override both generation and training seeds (the --seed flag)."""
        return dataclasses.replace(
            self,
            simulate=dataclasses.replace(self.simulate, seed=seed),
            train=dataclasses.replace(self.train, seed=seed),
        )

    def to_dict(self) -> dict:
        return {
            name: dataclasses.asdict(getattr(self, name))
            for name in _SECTIONS
        }


def default_config_json() -> str:
    """The full default configuration, ready to copy and edit."""
    return json.dumps(RunConfig().to_dict(), indent=2) + "\n"
