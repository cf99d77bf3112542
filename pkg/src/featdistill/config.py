"""Run configuration: a JSON file validated in full before any work starts.

Relative paths in the file resolve against the file's own directory.  Unknown
keys anywhere are rejected.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from featdistill.data import ExpertKind, ExpertProfile, default_profile
from featdistill.distortions import PipelineMode
from featdistill.errors import ConfigError, FeatDistillError
from featdistill.training import TeacherMode, TrainConfig


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SyntheticSection(_Strict):
    type: Literal["synthetic"]
    seed: int = 0
    dim: int = Field(16, ge=1)


class EmbeddingSection(_Strict):
    type: Literal["embedding_file"]
    path: str


Extractor = Annotated[Union[SyntheticSection, EmbeddingSection], Field(discriminator="type")]


class ExpertSection(_Strict):
    name: str = Field(pattern=r"^[A-Za-z0-9_.-]+$")
    kind: ExpertKind
    input_side: Optional[int] = Field(None, gt=0)
    mean: Optional[tuple[float, float, float]] = None
    std: Optional[tuple[float, float, float]] = None
    extractor: Extractor

    def profile(self) -> ExpertProfile:
        return default_profile(self.kind, self.input_side, self.mean, self.std)


class TrainSection(_Strict):
    stage1_epochs: int = Field(2, ge=0)
    stage2_epochs: int = Field(2, ge=0)
    learning_rate: float = Field(0.1, ge=0)
    lambda_crd: float = Field(1.0, ge=0)
    distill_weight: float = Field(1.0, ge=0)
    teacher_mode: TeacherMode = TeacherMode.MOMENTUM
    m_base: float = Field(0.99, ge=0, le=1)
    m_max: float = Field(0.9999, ge=0, le=1)
    temperature: float = Field(0.07, gt=0)
    queue_capacity: int = Field(4096, ge=0)
    normalize_distill: bool = True


class RunConfig(_Strict):
    seed: int = Field(0, ge=0, lt=2**64)
    manifest: str
    output_dir: str
    pipeline_mode: PipelineMode = PipelineMode.MIXED_EQUAL
    batch_size: int = Field(32, ge=2)
    train: TrainSection = TrainSection()
    experts: list[ExpertSection] = Field(min_length=1)

    # set by load_config; never read from the file
    base_dir: Path = Field(Path("."), exclude=True)

    @field_validator("pipeline_mode", mode="before")
    @classmethod
    def _mode(cls, v):
        return PipelineMode.parse(v)

    @field_validator("batch_size")
    @classmethod
    def _even(cls, v):
        if v % 2:
            raise ValueError("batch_size must be even (half real, half fake)")
        return v

    @field_validator("experts")
    @classmethod
    def _unique(cls, v):
        names = [e.name for e in v]
        if len(set(names)) != len(names):
            raise ValueError(f"expert names must be unique, got {names}")
        return v

    def resolve(self, path) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def manifest_path(self) -> Path:
        return self.resolve(self.manifest)

    @property
    def output_path(self) -> Path:
        return self.resolve(self.output_dir)

    def train_config(self, seed: int | None = None) -> TrainConfig:
        return TrainConfig(seed=self.seed if seed is None else seed, **self.train.model_dump())


def parse_config(data: dict, base_dir=".") -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if "base_dir" in data:
        raise ConfigError("unknown key 'base_dir'")
    try:
        cfg = RunConfig.model_validate(data)
        for e in cfg.experts:
            e.profile()
        cfg.train_config()
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None
    except FeatDistillError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.model_copy(update={"base_dir": Path(base_dir)})


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    return parse_config(data, path.parent)
