"""Experiment configuration and its mapping to and from plain key/value trees.

Unknown keys anywhere in the tree are rejected.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..attacks import AttackSpec
from ..datagen import TriggerSpec
from ..defense import DefenseSpec
from ..trainer import ModelSpec, TrainConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetConfig:
    source: str = "synthetic"
    classes: int = 10
    per_class: int = 128
    test_per_class: int = 50
    dims: tuple[int, int] = (16, 16)
    noise: float = 0.3
    train_images: str | None = None
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    max_train: int | None = None
    max_test: int | None = None

    def __post_init__(self):
        if self.source not in ("synthetic", "idx"):
            raise ConfigError(f"unknown dataset source {self.source!r}")
        if self.source == "idx" and not (self.train_images and self.train_labels
                                         and self.test_images and self.test_labels):
            raise ConfigError("idx dataset needs train/test image and label paths")
        object.__setattr__(self, "dims", tuple(int(v) for v in self.dims))


@dataclass(frozen=True)
class ExperimentConfig:
    n_clients: int = 20
    m_selected: int = 16
    rounds: int = 30
    malicious_fraction: float = 0.25
    pdr: float = 0.46875
    nir: float = 0.0
    attack: AttackSpec = field(default_factory=lambda: AttackSpec("data_poison_scale", 5.0, 0.46875))
    defense: DefenseSpec = field(default_factory=DefenseSpec)
    model: ModelSpec = field(default_factory=ModelSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    trigger: TriggerSpec | None = None
    seed: int = 0

    def __post_init__(self):
        if self.attack.pdr != self.pdr:
            # the top-level pdr is authoritative; keep the attack record in sync
            object.__setattr__(self, "attack", dataclasses.replace(self.attack, pdr=self.pdr))
        if self.n_clients < 2:
            raise ConfigError("n_clients must be >= 2")
        if not 1 <= self.m_selected <= self.n_clients:
            raise ConfigError("m_selected must lie in [1, n_clients]")
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if not 0.0 <= self.malicious_fraction < 0.5:
            raise ConfigError("malicious_fraction must lie in [0, 0.5)")
        if not 0.0 <= self.pdr <= 1.0 or not 0.0 <= self.nir <= 1.0:
            raise ConfigError("pdr and nir must lie in [0, 1]")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.defense.kind == "fedward" and self.m_selected < 3:
            raise ConfigError("fedward needs m_selected >= 3")
        try:
            self.defense.check_for(self.m_selected)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if self.model.input_dim != self.dataset.dims[0] * self.dataset.dims[1] and self.dataset.source == "synthetic":
            raise ConfigError("model.input_dim must equal the image size")
        if self.model.classes != self.dataset.classes and self.dataset.source == "synthetic":
            raise ConfigError("model.classes must equal dataset.classes")

    @property
    def n_malicious(self) -> int:
        return int(self.malicious_fraction * self.n_clients)

    def resolved_trigger(self, dims) -> TriggerSpec:
        return self.trigger if self.trigger is not None else TriggerSpec.corners(dims)

    def to_dict(self) -> dict:
        return _to_tree(self)

    @classmethod
    def from_dict(cls, tree: dict) -> "ExperimentConfig":
        return _from_tree(cls, tree, "")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_NESTED = {
    "attack": AttackSpec,
    "defense": DefenseSpec,
    "model": ModelSpec,
    "train": TrainConfig,
    "dataset": DatasetConfig,
    "trigger": TriggerSpec,
}


def _to_tree(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_tree(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [_to_tree(v) for v in obj]
    return obj


def _from_tree(cls, tree: Any, where: str):
    if not isinstance(tree, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping, got {type(tree).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(tree) - names)
    if unknown:
        raise ConfigError(f"{where or 'config'}: unknown keys {unknown}")
    kwargs = {}
    for key, value in tree.items():
        path = f"{where}.{key}" if where else key
        if cls is ExperimentConfig and key in _NESTED and value is not None:
            value = _from_tree(_NESTED[key], value, path)
        elif isinstance(value, list):
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where or 'config'}: {e}") from None


def load_tree(path) -> dict:
    """Parse a JSON or YAML document."""
    text = Path(path).read_text()
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from None
    if not isinstance(tree, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return tree


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_dict(load_tree(path))
