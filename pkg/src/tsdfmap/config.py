"""Run configuration: a YAML file of nested sections, strictly parsed.

Unknown keys are rejected (typos should fail loudly, not silently run
defaults), every omitted field takes its documented default, and
serializing a parsed config materializes all defaults, so a dumped
config reproduces the run exactly.
"""

import dataclasses
from dataclasses import dataclass, field as dc_field
from typing import get_type_hints

import yaml

from .adam import AdamConfig
from .metrics import EvalConfig
from .pool import PoolConfig
from .sampler import SamplerConfig
from .trainer import TrainConfig
from .uncertainty import UncertaintyConfig


@dataclass
class FieldConfig:
    voxel_sizes: tuple = (0.3, 0.45)
    feature_dim: int = 8
    hidden_units: int = 32


@dataclass
class LoopConfig:
    iterations: int = 15
    batch_size: int = 16384
    n_uncertain: int = 1000
    active_sampling: bool = True


@dataclass
class MeshConfig:
    spacing: float = 0.10
    pad: float = 0.0
    ascii: bool = False


@dataclass
class SimConfig:
    n_frames: int = 50
    orbit_radius: float = 4.5
    orbit_height: float = 3.0
    orbit_center: tuple = (0.0, 0.0, 0.0)
    azimuth_count: int = 256
    elevation_count: int = 32
    elevation_min_deg: float = -45.0
    elevation_max_deg: float = 45.0
    max_range: float = 30.0
    beta: float = 0.0
    scene: list = dc_field(default_factory=list)  # primitive dicts


@dataclass
class RunConfig:
    seed: int = 0
    field: FieldConfig = dc_field(default_factory=FieldConfig)
    train: LoopConfig = dc_field(default_factory=LoopConfig)
    sampler: SamplerConfig = dc_field(default_factory=SamplerConfig)
    pool: PoolConfig = dc_field(default_factory=PoolConfig)
    uncertainty: UncertaintyConfig = dc_field(default_factory=UncertaintyConfig)
    adam: AdamConfig = dc_field(default_factory=AdamConfig)
    mesh: MeshConfig = dc_field(default_factory=MeshConfig)
    eval: EvalConfig = dc_field(default_factory=EvalConfig)
    sim: SimConfig = dc_field(default_factory=SimConfig)


def _coerce(value, hint, path):
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"config key {path}: expected a number")
        return float(value)
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueError(f"config key {path}: expected an integer")
        return int(value)
    if hint is bool:
        if not isinstance(value, bool):
            raise ValueError(f"config key {path}: expected true/false")
        return value
    if hint is tuple:
        if not isinstance(value, (list, tuple)):
            raise ValueError(f"config key {path}: expected a list")
        return tuple(value)
    if hint is list:
        if not isinstance(value, list):
            raise ValueError(f"config key {path}: expected a list")
        return value
    return value


def build_dataclass(cls, data, path=""):
    """Construct a (possibly nested) config dataclass from plain dicts."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ValueError(f"config section {path or cls.__name__}: expected a mapping")
    hints = get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ValueError(f"unknown config key {path}{key}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        hint = hints[f.name]
        if dataclasses.is_dataclass(hint):
            kwargs[f.name] = build_dataclass(hint, data[f.name], f"{path}{f.name}.")
        else:
            kwargs[f.name] = _coerce(data[f.name], hint, f"{path}{f.name}")
    return cls(**kwargs)


def _plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [_plain(v) for v in obj]
    if isinstance(obj, list):
        return [_plain(v) for v in obj]
    return obj


def config_to_dict(cfg) -> dict:
    """All fields, defaults materialized, as YAML/JSON-ready plain types."""
    return _plain(cfg)


def load_config(path) -> RunConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return build_dataclass(RunConfig, data)


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


def to_train_config(run: RunConfig) -> TrainConfig:
    """Flatten a RunConfig into the trainer's bundle (fresh Adam state)."""
    a = run.adam
    return TrainConfig(
        iterations=run.train.iterations,
        batch_size=run.train.batch_size,
        n_uncertain=run.train.n_uncertain,
        active_sampling=run.train.active_sampling,
        seed=run.seed,
        voxel_sizes=tuple(run.field.voxel_sizes),
        feature_dim=run.field.feature_dim,
        hidden_units=run.field.hidden_units,
        sampler=dataclasses.replace(run.sampler),
        pool=dataclasses.replace(run.pool),
        uncertainty=dataclasses.replace(run.uncertainty),
        adam=AdamConfig(a.lr, a.beta1, a.beta2, a.eps),
    )


def train_config_from_dict(data) -> TrainConfig:
    return build_dataclass(TrainConfig, data)
