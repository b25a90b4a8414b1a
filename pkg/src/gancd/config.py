"""Run configuration: one JSON document with a section per subsystem.

Unknown keys anywhere are rejected. Every subsystem seed is derived from the
single root ``seed``; seeds written inside sections are overwritten by
:meth:`RunConfig.resolved`.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .expand import ExpansionConfig
from .infer import ComparisonConfig
from .nets import ArchitectureConfig
from .synthdata import SceneConfig
from .train import TrainConfig, split_seed


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class EvalConfig(_Section):
    thresholds: list[float] = Field(default_factory=lambda: [round(t, 2) for t in np.linspace(0, 1, 101)])
    binary_threshold: float = 0.5


class IOConfig(_Section):
    run_dir: str = "run"
    image0: str | None = None
    image1: str | None = None
    truth: str | None = None


class DivlabConfig(_Section):
    count: int = 200


class DisStudyConfig(_Section):
    clip_sizes: list[int] = Field(default_factory=lambda: [128, 64, 32])
    fid_samples: int = 64


class RunConfig(_Section):
    seed: int = 0
    scene: SceneConfig = Field(default_factory=SceneConfig)
    expansion: ExpansionConfig = Field(default_factory=ExpansionConfig)
    arch: ArchitectureConfig = Field(default_factory=ArchitectureConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    compare: ComparisonConfig = Field(default_factory=ComparisonConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    io: IOConfig = Field(default_factory=IOConfig)
    divlab: DivlabConfig = Field(default_factory=DivlabConfig)
    dis_study: DisStudyConfig = Field(default_factory=DisStudyConfig)

    def resolved(self) -> "RunConfig":
        """Copy with section seeds derived from the root seed and sections validated."""
        cfg = self.model_copy(deep=True)
        cfg.scene.seed = split_seed(cfg.seed, "scene")
        cfg.expansion.seed = split_seed(cfg.seed, "expansion")
        cfg.train.seed = split_seed(cfg.seed, "train")
        cfg.compare.seed = split_seed(cfg.seed, "compare")
        for section in (cfg.scene, cfg.expansion, cfg.arch, cfg.train, cfg.compare):
            section.validate()
        return cfg

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)


# desk-scale profile: 2000 (D, G) update pairs at batch 16
SMOKE_PROFILE = {
    "train": {"batch_size": 16, "epochs": 40, "steps_per_epoch": 50, "learning_rate_g": 2e-4, "learning_rate_d": 2e-4},
    "expansion": {"n": 800},
    "arch": {"base_channels": 32},
}


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, val in override.items():
        out[key] = _merge(out[key], val) if isinstance(val, dict) and isinstance(out.get(key), dict) else val
    return out


def apply_smoke(cfg: RunConfig) -> RunConfig:
    return RunConfig.model_validate(_merge(cfg.model_dump(), SMOKE_PROFILE))


def load_config(path=None, *, smoke: bool = False, seed: int | None = None) -> RunConfig:
    data = json.loads(Path(path).read_text()) if path else {}
    cfg = RunConfig.model_validate(data)
    if smoke:
        cfg = apply_smoke(cfg)
    if seed is not None:
        cfg.seed = seed
    return cfg
