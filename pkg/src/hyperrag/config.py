"""TOML configuration with strict keys and flag overrides.

Precedence is flag > file > default. Every key is optional; unknown
sections or keys are rejected.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .exceptions import ConfigError


@dataclass
class PathsConfig:
    graph: str | None = None
    checkpoint: str | None = None
    templates: str | None = None
    cache: str | None = None
    out: str | None = None


@dataclass
class BackendConfig:
    chat: str = "mock"  # mock | http
    chat_endpoint: str | None = None
    chat_model: str = "gpt-4o-mini"
    chat_api_key_env: str = "HYPERRAG_CHAT_API_KEY"
    mock_script: str | None = None
    embedder: str = "hashing"  # hashing | remote
    embed_endpoint: str | None = None
    embed_model: str = "gte-large-en-v1.5"
    embed_api_key_env: str = "HYPERRAG_EMBED_API_KEY"
    embed_dim: int = 64
    retries: int = 3
    backoff: float = 0.5
    max_in_flight: int = 4
    eval_workers: int = 1


@dataclass
class SearchSection:
    tau0: float = 0.5
    n_max: int = 5
    min_per_hop: int = 50
    decay: float = 0.1
    density_lo: float = 2.35
    density_up: float = 5.0
    high_density_cap: int = 200
    max_hops: int = 4


@dataclass
class BeamSection:
    width: int = 3
    depth: int = 3


@dataclass
class BudgetSection:
    total_tokens: int = 4000
    hyperedge_share: float = 0.5
    entity_share: float = 0.3
    chunk_share: float = 0.2


@dataclass
class TrainSection:
    batch_size: int = 32
    learning_rate: float = 1e-4
    max_epochs: int = 50
    patience: int = 10
    hidden_layer_sizes: list = field(default_factory=lambda: [256, 64])
    optimizer: str = "adam"
    validation_fraction: float = 0.1
    max_negatives: int = 8
    supervision_hops: int = 4


@dataclass
class DdeSection:
    layers: int = 2


@dataclass
class Config:
    seed: int = 0
    paths: PathsConfig = field(default_factory=PathsConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    search: SearchSection = field(default_factory=SearchSection)
    beam: BeamSection = field(default_factory=BeamSection)
    budget: BudgetSection = field(default_factory=BudgetSection)
    train: TrainSection = field(default_factory=TrainSection)
    dde: DdeSection = field(default_factory=DdeSection)

    def set(self, dotted: str, value):
        """Apply an override such as ``search.tau0``."""
        section, _, key = dotted.rpartition(".")
        target = getattr(self, section) if section else self
        if not dataclasses.is_dataclass(target) or key not in {f.name for f in dataclasses.fields(target)}:
            raise ConfigError(f"unknown configuration key {dotted!r}")
        setattr(target, key, value)


def _apply(target, data: dict, where: str):
    names = {f.name: f for f in dataclasses.fields(target)}
    for key, value in data.items():
        if key not in names:
            raise ConfigError(f"unknown configuration key {where}{key!r}")
        current = getattr(target, key)
        if dataclasses.is_dataclass(current):
            if not isinstance(value, dict):
                raise ConfigError(f"[{key}] must be a table")
            _apply(current, value, f"{key}.")
        else:
            setattr(target, key, value)


def load_config(path=None, overrides: dict | None = None) -> Config:
    cfg = Config()
    if path is not None:
        try:
            data = tomllib.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
        _apply(cfg, data, "")
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg.set(key, value)
    return cfg
