"""Pydantic configuration models for training, parsing and analysis runs."""
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from common.errors import ConfigError

CONFIG_VERSION = 1

# Surface forms of PTB punctuation; unlabeled trees carry no POS to go by.
PTB_PUNCTUATION = ["``", "''", "`", "'", ",", ".", ":", ";", "?", "!", "--", "...", "-LRB-", "-RRB-", "-LCB-", "-RCB-"]


class Mode(str, Enum):
    GENERATIVE = "gen"
    DISCRIMINATIVE = "disc"


class Composition(str, Enum):
    BILSTM = "bilstm"
    GATED_ATTENTION = "gated_attention"


class AblationConfig(BaseModel):
    """Which parser-state structures feed the state summary."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    use_stack: bool = True
    use_buffer: bool = True
    use_history: bool = True

    @model_validator(mode="after")
    def _at_least_one(self):
        if not (self.use_stack or self.use_buffer or self.use_history):
            raise ValueError("At least one of stack, buffer, history must be enabled")
        return self

    @classmethod
    def from_name(cls, name: str) -> "AblationConfig":
        presets = {
            "full": cls(),
            "no-history": cls(use_history=False),
            "no-buffer": cls(use_buffer=False),
            "no-stack": cls(use_stack=False),
            "stack-only": cls(use_buffer=False, use_history=False),
        }
        if name not in presets:
            raise ConfigError(f"Unknown ablation '{name}'; expected one of {sorted(presets)}")
        return presets[name]

    @property
    def enabled_count(self) -> int:
        return int(self.use_stack) + int(self.use_buffer) + int(self.use_history)


class Limits(BaseModel):
    """Feasibility limits that keep generation and sampling finite."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    max_open_nts: int = Field(100, ge=1)
    max_length: int = Field(200, ge=1)
    max_actions: int = Field(1000, ge=1)


class ModelConfig(BaseModel):
    """Architecture of one RNNG; embedded verbatim in checkpoints."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    mode: Mode = Mode.GENERATIVE
    composition: Composition = Composition.BILSTM
    ablation: AblationConfig = Field(default_factory=AblationConfig)
    word_dim: int = Field(32, ge=1, description="Word, nonterminal, action and stack-entry width")
    hidden_dim: int = Field(64, ge=1, description="Recurrent state and summary width")
    query_dim: int = Field(32, ge=1, description="Width of the attention query embedding o_nt")
    limits: Limits = Field(default_factory=Limits)
    init_scheme: str = "glorot_uniform"
    forget_bias: float = 1.0


class TrainerConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    learning_rate: float = Field(0.1, ge=0.0)
    decay: float = Field(0.08, ge=0.0)
    epochs: int = Field(10, ge=0)
    seed: int = 0
    clip_threshold: Optional[float] = Field(5.0, gt=0.0)
    report_accuracy: bool = False

    def rate(self, epoch: int) -> float:
        return self.learning_rate / (1.0 + self.decay * epoch)


PROFILES: Dict[str, Dict[str, int]] = {
    "small": {"word_dim": 32, "hidden_dim": 64, "query_dim": 32},
    "large": {"word_dim": 256, "hidden_dim": 256, "query_dim": 256},
}


class RunConfig(BaseModel):
    """Flat run configuration as read from YAML and overridden by CLI flags."""
    model_config = ConfigDict(extra="forbid")

    config_version: int = CONFIG_VERSION
    mode: Mode = Mode.GENERATIVE
    composition: Composition = Composition.BILSTM
    ablation: str = "full"
    unlabeled: bool = False
    profile: str = "small"
    word_dim: Optional[int] = Field(None, ge=1)
    hidden_dim: Optional[int] = Field(None, ge=1)
    query_dim: Optional[int] = Field(None, ge=1)
    learning_rate: float = Field(0.1, ge=0.0)
    decay: float = Field(0.08, ge=0.0)
    epochs: int = Field(10, ge=0)
    seed: int = 0
    clip_threshold: Optional[float] = Field(5.0, gt=0.0)
    report_accuracy: bool = False
    max_open_nts: int = Field(100, ge=1)
    max_length: int = Field(200, ge=1)
    max_actions: int = Field(1000, ge=1)
    unk_threshold: int = Field(1, ge=0)
    unk_classes: bool = False
    collapse_preterminals: bool = True
    num_samples: int = Field(100, ge=1)
    workers: int = Field(1, ge=1)
    punctuation: List[str] = Field(default_factory=lambda: list(PTB_PUNCTUATION))
    logging_level: str = "INFO"
    logging_format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    @model_validator(mode="after")
    def _check(self):
        if self.config_version != CONFIG_VERSION:
            raise ValueError(f"Unsupported config_version {self.config_version}; expected {CONFIG_VERSION}")
        if self.profile not in PROFILES:
            raise ValueError(f"Unknown profile '{self.profile}'")
        AblationConfig.from_name(self.ablation)
        return self

    def limits(self) -> Limits:
        return Limits(max_open_nts=self.max_open_nts, max_length=self.max_length, max_actions=self.max_actions)

    def model_settings(self) -> ModelConfig:
        dims = dict(PROFILES[self.profile])
        for key in ("word_dim", "hidden_dim", "query_dim"):
            if getattr(self, key) is not None:
                dims[key] = getattr(self, key)
        return ModelConfig(
            mode=self.mode,
            composition=self.composition,
            ablation=AblationConfig.from_name(self.ablation),
            limits=self.limits(),
            **dims,
        )

    def trainer_settings(self) -> TrainerConfig:
        return TrainerConfig(
            learning_rate=self.learning_rate,
            decay=self.decay,
            epochs=self.epochs,
            seed=self.seed,
            clip_threshold=self.clip_threshold,
            report_accuracy=self.report_accuracy,
        )


def load_run_config(path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Load a flat YAML config, apply non-None overrides, validate.

    Unknown keys in either the file or the overrides raise ConfigError.
    """
    data: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as f:
                loaded = yaml.safe_load(f)
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"Cannot read config {path}: {e}") from e
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"Config {path} must be a flat key: value mapping")
        nested = [k for k, v in loaded.items() if isinstance(v, dict)]
        if nested:
            raise ConfigError(f"Config {path} must be flat; nested keys: {nested}")
        data.update(loaded)
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    try:
        return RunConfig(**data)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e
