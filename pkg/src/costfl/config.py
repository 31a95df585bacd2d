"""Declarative experiment configuration (YAML on disk, dataclasses in memory)."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .clp import ClpConfig
from .errors import ConfigError
from .model import HyperParams
from .selection import SelectionConfig

STOP_RULES = ("convergence", "threshold", "max_rounds")


@dataclass(frozen=True)
class DataConfig:
    source: str = "synthetic"
    num_samples: int = 12500
    num_classes: int = 10
    feature_dim: int = 20
    class_separation: float = 1.0
    path: str | None = None
    header: bool = False
    test_fraction: float = 0.2
    seed: int | None = None

    def __post_init__(self):
        if self.source not in ("synthetic", "csv"):
            raise ConfigError("data.source must be 'synthetic' or 'csv'")
        if self.source == "csv" and not self.path:
            raise ConfigError("data.path is required when data.source is 'csv'")


@dataclass(frozen=True)
class PartitionConfig:
    num_clients: int = 100
    knob: float = 0.9
    allow_empty: bool = False
    seed: int | None = None

    def __post_init__(self):
        if self.num_clients < 1:
            raise ConfigError("partition.num_clients must be >= 1")
        if not 0.0 <= self.knob <= 1.0:
            raise ConfigError("partition.knob must be in [0, 1]")


@dataclass(frozen=True)
class CostConfig:
    traces: str | None = None  # None: bundled 123-region fixture
    energy_per_round: float = 0.001
    scale: float = 1.0
    seed: int | None = None

    def __post_init__(self):
        if not self.energy_per_round > 0:
            raise ConfigError("cost.energy_per_round must be > 0")
        if not self.scale > 0:
            raise ConfigError("cost.scale must be > 0")


@dataclass(frozen=True)
class StoppingRule:
    rule: str = "convergence"
    min_delta: float = 0.001
    patience: int = 20
    target_accuracy: float | None = None

    def __post_init__(self):
        if self.rule not in STOP_RULES:
            raise ConfigError(f"stopping.rule must be one of {STOP_RULES}")
        if self.patience < 1:
            raise ConfigError("stopping.patience must be >= 1")
        if self.rule == "threshold":
            if self.target_accuracy is None or not 0.0 <= self.target_accuracy <= 1.0:
                raise ConfigError("stopping.target_accuracy must be in [0, 1] for the threshold rule")


@dataclass(frozen=True)
class ExperimentConfig:
    selection: SelectionConfig
    data: DataConfig = field(default_factory=DataConfig)
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    model: HyperParams = field(default_factory=HyperParams)
    clp: ClpConfig = field(default_factory=ClpConfig)
    cost: CostConfig = field(default_factory=CostConfig)
    stopping: StoppingRule = field(default_factory=StoppingRule)
    max_rounds: int = 300
    seed: int = 0
    targets: tuple = ()

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ConfigError("max_rounds must be >= 1")
        for t in self.targets:
            if not 0.0 <= t <= 1.0:
                raise ConfigError("targets must lie in [0, 1]")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def with_policy(self, policy: str) -> "ExperimentConfig":
        return self.replace(selection=dataclasses.replace(self.selection, policy=policy))

    def with_knob(self, knob: float) -> "ExperimentConfig":
        return self.replace(partition=dataclasses.replace(self.partition, knob=knob))


_SECTIONS = {
    "data": DataConfig,
    "partition": PartitionConfig,
    "model": HyperParams,
    "selection": SelectionConfig,
    "clp": ClpConfig,
    "cost": CostConfig,
    "stopping": StoppingRule,
}
_TOP_LEVEL = {"max_rounds", "seed", "targets"}


def _build_section(name: str, cls, raw: Any):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{name}: unknown field(s) {', '.join(unknown)}")
    try:
        return cls(**raw)
    except ConfigError as exc:
        raise ConfigError(f"{name}: {exc}") from None
    except TypeError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def from_dict(raw: dict) -> ExperimentConfig:
    """Validate a nested mapping; errors name the offending field."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    unknown = sorted(set(raw) - set(_SECTIONS) - _TOP_LEVEL)
    if unknown:
        raise ConfigError(f"unknown top-level field(s): {', '.join(unknown)}")
    sel = raw.get("selection") or {}
    if not isinstance(sel, dict) or "policy" not in sel:
        raise ConfigError("selection.policy: required field is missing")
    kwargs = {name: _build_section(name, cls, raw.get(name)) for name, cls in _SECTIONS.items()}
    for key in _TOP_LEVEL & set(raw):
        kwargs[key] = tuple(raw[key]) if key == "targets" else raw[key]
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError as exc:
        raise ConfigError(str(exc)) from None


def to_dict(cfg: ExperimentConfig) -> dict:
    """Fully resolved mapping, every default included."""
    out = {name: dataclasses.asdict(getattr(cfg, name)) for name in _SECTIONS}
    out["max_rounds"] = cfg.max_rounds
    out["seed"] = cfg.seed
    out["targets"] = list(cfg.targets)
    return out


def parse_override(text: str) -> tuple[list[str], Any]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, value = text.split("=", 1)
    path = [p for p in key.strip().split(".") if p]
    if not path:
        raise ConfigError(f"override {text!r} has an empty key")
    return path, yaml.safe_load(value) if value.strip() else None


def apply_overrides(raw: dict, overrides) -> dict:
    raw = dict(raw)
    for text in overrides or ():
        path, value = parse_override(text)
        node = raw
        for part in path[:-1]:
            child = node.get(part)
            child = dict(child) if isinstance(child, dict) else {}
            node[part] = child
            node = child
        node[path[-1]] = value
    return raw


def load_raw(path) -> dict:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return raw or {}


def load_config(path, overrides=()) -> ExperimentConfig:
    return from_dict(apply_overrides(load_raw(path), overrides))


def dump_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(to_dict(cfg), sort_keys=False))
