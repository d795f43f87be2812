"""Run configuration: one YAML document with data/model/objective/train sections."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .data import SyntheticConfig
from .losses import ObjectiveConfig
from .model import ModelConfig
from .training import TrainConfig

SECTIONS = {
    "data": SyntheticConfig,
    "model": ModelConfig,
    "objective": ObjectiveConfig,
    "train": TrainConfig,
}


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


@dataclass
class RunConfig:
    data: SyntheticConfig = field(default_factory=SyntheticConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def to_dict(self) -> dict:
        out = {}
        for name in SECTIONS:
            d = dataclasses.asdict(getattr(self, name))
            out[name] = {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
        return out

    def replace(self, section: str, **changes) -> "RunConfig":
        doc = self.to_dict()
        doc[section].update(changes)
        return from_dict(doc)


def _build(section: str, cls, values) -> object:
    if values is None:
        values = {}
    if not isinstance(values, dict):
        raise ConfigError(f"{section}: expected a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    for key in values:
        if key not in known:
            raise ConfigError(f"{section}.{key}: unknown field")
    try:
        return cls(**values)
    except (ValueError, TypeError) as exc:
        msg = str(exc)
        head = msg.split(":", 1)[0]
        if head in known:
            raise ConfigError(f"{section}.{msg}") from None
        raise ConfigError(f"{section}: {msg}") from None


def from_dict(doc: dict | None) -> RunConfig:
    doc = doc or {}
    if not isinstance(doc, dict):
        raise ConfigError("config: expected a mapping at the top level")
    for key in doc:
        if key not in SECTIONS:
            raise ConfigError(f"{key}: unknown section")
    return RunConfig(**{name: _build(name, cls, doc.get(name)) for name, cls in SECTIONS.items()})


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: not valid YAML ({exc})") from None
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path} ({exc.strerror})") from None
    return from_dict(doc)
