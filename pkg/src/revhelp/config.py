"""Run configuration: file values merged with CLI flag overrides (flags win)."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from revhelp.encoders import EncoderConfig
from revhelp.model import ModelConfig
from revhelp.training import TrainConfig

ENV_HOME = "REVHELP_HOME"


@dataclass
class CorpusConfig:
    reviews: str | None = None
    reviewers: str | None = None
    manifest: str | None = None
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0
    reference_date: str | None = None
    group_by_reviewer: bool = False


@dataclass
class AnalysisConfig:
    lexicon: str | None = None
    stopwords: str | None = None
    top_k: int = 5
    min_freq: int = 5
    sample_per_class: int | None = None
    seed: int = 0


@dataclass
class ExplainConfig:
    steps: int = 50
    top: int = 10


@dataclass
class RunConfig:
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    explain: ExplainConfig = field(default_factory=ExplainConfig)
    out: str | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def default_out_root() -> Path:
    return Path(os.environ.get(ENV_HOME, "runs"))


def _apply_section(section, values: dict, context: str):
    valid = {f.name for f in dataclasses.fields(section)}
    for key, value in values.items():
        if key not in valid:
            raise ValueError(f"unknown config key {context}.{key}")
        if key == "ratios" and value is not None:
            value = tuple(value)
        setattr(section, key, value)


def load_config_file(path: str | Path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    if str(path).endswith(".json"):
        payload = json.loads(text)
    else:
        payload = yaml.safe_load(text)
    if payload is None:
        return {}
    if not isinstance(payload, dict):
        raise ValueError(f"config file {path} must contain a mapping")
    return payload


def build_run_config(
    config_path: str | Path | None = None, overrides: dict | None = None
) -> RunConfig:
    """Start from defaults, apply the config file, then flag overrides.

    ``overrides`` is a mapping of section name to partial mappings, e.g.
    ``{"train": {"epochs": 2}, "encoder": {"backend": "hash"}}``.
    """
    config = RunConfig()
    layers = []
    if config_path is not None:
        layers.append(load_config_file(config_path))
    if overrides:
        layers.append(overrides)
    for layer in layers:
        for name, values in layer.items():
            if values is None:
                continue
            if name == "out":
                config.out = values
                continue
            if not hasattr(config, name):
                raise ValueError(f"unknown config section {name!r}")
            section = getattr(config, name)
            if not isinstance(values, dict):
                raise ValueError(f"config section {name!r} must be a mapping")
            _apply_section(section, values, name)
    return config


def set_global_seed(config: RunConfig, seed: int) -> None:
    """A --seed flag pins every section's seed for the run."""
    config.corpus.seed = seed
    config.train.seed = seed
    config.analysis.seed = seed


def write_effective_config(config: RunConfig, path: str | Path) -> None:
    Path(path).write_text(
        yaml.safe_dump(config.to_dict(), sort_keys=True, default_flow_style=False),
        encoding="utf-8",
    )
