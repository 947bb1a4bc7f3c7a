"""Run configuration: YAML file plus command-line overrides."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .preprocess import BinarizeConfig, LeadGridSpec, PreprocessConfig, RoiRect
from .trainer import PROFILE_MODEL, TrainConfig, get_profile

MODES = ("5fold", "holdout")
DEFAULT_PROFILE = {v: k for k, v in PROFILE_MODEL.items()}
TRAIN_OVERRIDE_KEYS = {f.name for f in dataclasses.fields(TrainConfig)}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    dataset_root: str | None = None
    out: str = "runs/default"
    seed: int = 0
    jobs: int = 1
    # preprocessing
    roi: RoiRect | None = None
    threshold: int = 40
    grid: LeadGridSpec = field(default_factory=LeadGridSpec)
    resize: int = 64
    # model and training
    model: str = "vit"
    preset: str = "tiny"
    profile: str | None = None  # None: the model's own profile
    train: dict = field(default_factory=dict)
    # evaluation
    mode: str = "5fold"
    folds: int = 5
    holdout: tuple[float, float, float] = (0.8, 0.0, 0.2)
    stratified: bool = True
    group_by_report: bool = True
    reducer: str | None = None
    manifest: str | None = None
    checkpoint: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.model not in DEFAULT_PROFILE:
            raise ConfigError(f"unknown model {self.model!r}")
        if self.reducer not in (None, "majority"):
            raise ConfigError(f"unknown reducer {self.reducer!r}")
        if self.checkpoint and self.mode != "holdout":
            raise ConfigError("checkpoint scoring is only defined for mode 'holdout'")
        unknown = set(self.train) - TRAIN_OVERRIDE_KEYS
        if unknown:
            raise ConfigError(f"unknown train settings {sorted(unknown)}")
        self.holdout = tuple(float(r) for r in self.holdout)

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    @property
    def manifest_path(self) -> Path:
        return Path(self.manifest) if self.manifest else self.out_dir / "manifest.csv"

    def preprocess_config(self) -> PreprocessConfig:
        return PreprocessConfig(roi=self.roi, binarize=BinarizeConfig(self.threshold), grid=self.grid, resize=self.resize)

    def train_config(self) -> TrainConfig:
        name = self.profile or DEFAULT_PROFILE[self.model]
        try:
            return get_profile(name, seed=self.seed, **self.train)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def from_dict(d: dict) -> RunConfig:
    d = dict(d or {})
    unknown = set(d) - {f.name for f in dataclasses.fields(RunConfig)}
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    try:
        if d.get("roi") is not None:
            d["roi"] = RoiRect(**{k: int(v) for k, v in d["roi"].items()})
        if d.get("grid") is not None:
            d["grid"] = LeadGridSpec(**d["grid"])
        if "holdout" in d:
            d["holdout"] = tuple(d["holdout"])
        return RunConfig(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load(path: Path | None, **overrides) -> RunConfig:
    """Read a YAML run config; non-None ``overrides`` win over file values."""
    data = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    train = dict(data.get("train") or {})
    train.update(overrides.pop("train", None) or {})
    data.update({k: v for k, v in overrides.items() if v is not None})
    data["train"] = train
    return from_dict(data)
