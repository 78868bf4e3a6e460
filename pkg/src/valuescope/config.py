"""Run configuration: a YAML file of sections, each a small dataclass.

Secrets never live in the file. The chat API key is read from the
environment variable named by ``backends.api_key_env``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .corpus import Period
from .dimensions import dimension_names, get_dimension
from .exceptions import ConfigError
from .gateway.client import DEFAULT_API_KEY_ENV
from .preference import DEFAULT_VARIANT, InputVariant
from .synthbench import SynthConfig

SECRET_KEYS = ("api_key", "apikey", "token", "secret", "password")


def _section(cls, data: Mapping | None, name: str):
    data = dict(data or {})
    fields = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - fields)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"[{name}]: {exc}") from exc


@dataclass
class CorpusSection:
    dumps: list[str] = field(default_factory=list)
    scrape_time: int | None = None
    train_fraction: float = 0.5
    partition_salt: str = ""


@dataclass
class SamplingSection:
    likert_per_scale: int = 10
    pairs: int = 1250


@dataclass
class NormnessSection:
    comparisons: int = 30
    min_comparisons: int = 30
    judge_attempts: int = 2


@dataclass
class SimulationSection:
    seeds_per_community: int = 50
    similarity_threshold: float = 0.5
    sigma_multiplier: float = 1.0
    pooled_fluency: bool = False


@dataclass
class PreferenceSection:
    variant: str = DEFAULT_VARIANT.value


@dataclass
class RpmSection:
    bins: int = 10
    min_count: int = 50


@dataclass
class DynamicsSection:
    bins: int = 10
    s1: str = "2019-2020"
    s2: str = "2021-2023"
    window_months: int = 6
    user_pairs: list[list[str]] | None = None
    min_user_comments: int = 2


@dataclass
class BackendSection:
    offline: bool = True
    api_key_env: str = DEFAULT_API_KEY_ENV
    chat_url: str = ""
    chat_model: str = ""
    temperature: float = 0.2
    rewrite_temperature: float = 0.7
    judge_samples: int = 1
    max_retries: int = 3
    max_in_flight: int = 4
    price_input: float | None = None
    price_output: float | None = None
    perplexity_url: str = ""
    similarity_url: str = ""
    preference_url: str = ""
    preference_weights: dict[str, float] = field(
        default_factory=lambda: {"formality": 0.5, "humor": 0.3, "politeness": 1.0, "sarcasm": -0.5, "supportiveness": 1.0}
    )
    preference_noise: float = 0.2


@dataclass
class RunConfig:
    seed: int = 0
    workers: int = 1
    run_dir: str = "run"
    communities: list[str] = field(default_factory=list)
    dimensions: list[str] = field(default_factory=dimension_names)
    corpus: CorpusSection = field(default_factory=CorpusSection)
    sampling: SamplingSection = field(default_factory=SamplingSection)
    normness: NormnessSection = field(default_factory=NormnessSection)
    simulation: SimulationSection = field(default_factory=SimulationSection)
    preference: PreferenceSection = field(default_factory=PreferenceSection)
    rpm: RpmSection = field(default_factory=RpmSection)
    dynamics: DynamicsSection = field(default_factory=DynamicsSection)
    backends: BackendSection = field(default_factory=BackendSection)
    synthbench: SynthConfig = field(default_factory=SynthConfig)
    base_dir: str = field(default=".", repr=False, compare=False)

    SECTIONS = {
        "corpus": CorpusSection,
        "sampling": SamplingSection,
        "normness": NormnessSection,
        "simulation": SimulationSection,
        "preference": PreferenceSection,
        "rpm": RpmSection,
        "dynamics": DynamicsSection,
        "backends": BackendSection,
    }

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any] | None, base_dir: str | os.PathLike = ".") -> "RunConfig":
        data = dict(data or {})
        _reject_secrets(data)
        top = {f.name for f in dataclasses.fields(cls)} - {"base_dir"}
        unknown = sorted(set(data) - top)
        if unknown:
            raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
        kwargs: dict[str, Any] = {}
        for key, value in data.items():
            if key in cls.SECTIONS:
                if value is not None and not isinstance(value, Mapping):
                    raise ConfigError(f"[{key}] must be a mapping")
                kwargs[key] = _section(cls.SECTIONS[key], value, key)
            elif key == "synthbench":
                kwargs[key] = SynthConfig.from_mapping(value or {})
            else:
                kwargs[key] = value
        cfg = cls(**kwargs, base_dir=str(base_dir))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | os.PathLike | None) -> "RunConfig":
        if path is None:
            return cls.from_mapping({})
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
        if data is not None and not isinstance(data, Mapping):
            raise ConfigError(f"config {path} must be a mapping at the top level")
        return cls.from_mapping(data, base_dir=path.resolve().parent)

    def validate(self) -> None:
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not self.dimensions:
            raise ConfigError("at least one dimension is required")
        self.dimensions = [get_dimension(d).name for d in self.dimensions]
        if self.sampling.likert_per_scale < 1 or self.sampling.pairs < 0:
            raise ConfigError("sampling sizes must be positive")
        if self.normness.comparisons < 1 or self.normness.min_comparisons < 0 or self.normness.judge_attempts < 1:
            raise ConfigError("normness settings must be positive")
        if self.simulation.seeds_per_community < 1:
            raise ConfigError("seeds_per_community must be >= 1")
        if not -1 <= self.simulation.similarity_threshold <= 1 or self.simulation.sigma_multiplier <= 0:
            raise ConfigError("similarity threshold must be in [-1, 1] and the sigma multiplier positive")
        InputVariant.parse(self.preference.variant)
        if self.rpm.bins < 2 or self.rpm.min_count < 1:
            raise ConfigError("rpm needs bins >= 2 and min_count >= 1")
        if self.dynamics.bins < 1 or self.dynamics.window_months <= 0 or 12 % self.dynamics.window_months:
            raise ConfigError("dynamics bins must be >= 1 and window_months must divide 12")
        Period.parse(self.dynamics.s1)
        Period.parse(self.dynamics.s2)
        for pair in self.dynamics.user_pairs or []:
            if len(pair) != 2 or pair[0] == pair[1]:
                raise ConfigError(f"user pair {pair!r} must name two different communities")
        if not 0 <= self.corpus.train_fraction <= 1:
            raise ConfigError("train_fraction must lie in [0, 1]")
        b = self.backends
        if b.judge_samples < 1 or b.judge_samples % 2 == 0:
            raise ConfigError("judge_samples must be a positive odd number")
        if not b.offline:
            missing = [k for k in ("chat_url", "chat_model", "perplexity_url", "similarity_url", "preference_url") if not getattr(b, k)]
            if missing:
                raise ConfigError(f"online backends need: {', '.join(missing)}")

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def snapshot(self) -> dict[str, Any]:
        """Config as plain data, without the location-dependent fields."""
        data = dataclasses.asdict(self)
        data.pop("base_dir", None)
        data.pop("run_dir", None)
        return data

    def run_id(self) -> str:
        text = json.dumps(self.snapshot(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def _reject_secrets(data: Any, path: str = "") -> None:
    if isinstance(data, Mapping):
        for key, value in data.items():
            lowered = str(key).lower()
            if lowered != "api_key_env" and any(s in lowered for s in SECRET_KEYS):
                raise ConfigError(f"config key {path}{key} looks like a secret; put it in the environment and name the variable in backends.api_key_env")
            _reject_secrets(value, f"{path}{key}.")
