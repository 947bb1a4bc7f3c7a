"""AdamW training loop with a linear warmup/decay schedule, and grid search."""
from __future__ import annotations

import csv
import dataclasses
import itertools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import tensor as T
from .data import LeadDataset
from .models import Params, forward, init_model
from .splits import holdout_split

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    base_lr: float = 9e-6
    warmup_ratio: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.01
    decay_norms_and_biases: bool = False
    seed: int = 0
    init_std: float = 0.02

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.base_lr > 0:
            raise ValueError("base_lr must be positive")
        if not 0 <= self.warmup_ratio < 1:
            raise ValueError("warmup_ratio must lie in [0, 1)")


# Training parameters per model (epochs, batch, learning rate, warmup ratio), all AdamW.
PROFILES = {
    "google-vit": TrainConfig(epochs=30, batch_size=64, base_lr=9e-6, warmup_ratio=0.1),
    "swin": TrainConfig(epochs=35, batch_size=80, base_lr=4e-5, warmup_ratio=0.1),
    "beit": TrainConfig(epochs=25, batch_size=64, base_lr=6e-5, warmup_ratio=0.08),
}
PROFILE_MODEL = {"google-vit": "vit", "swin": "swin", "beit": "beit"}


def get_profile(name: str, **overrides) -> TrainConfig:
    try:
        cfg = PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}") from None
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


class NonFiniteError(FloatingPointError):
    pass


class TrainingDiverged(RuntimeError):
    """Raised when the loss or a gradient stops being finite.

    ``params`` holds the last parameters that produced a finite loss.
    """

    def __init__(self, msg, step, params, curve):
        super().__init__(msg)
        self.step = step
        self.params = params
        self.curve = curve


# ----------------------------------------------------------------------------
# optimiser

@dataclass
class AdamWState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def create(cls, params: Params) -> "AdamWState":
        return cls({k: np.zeros_like(p.data) for k, p in params.items()}, {k: np.zeros_like(p.data) for k, p in params.items()})


def default_decay_filter(name: str, p: T.Tensor) -> bool:
    """Decay matrices only; biases, norm parameters and bias tables are exempt."""
    return p.ndim > 1 and "rel_pos_bias" not in name


def adamw_step(
    params: Params,
    state: AdamWState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.01,
    decay: Callable[[str, T.Tensor], bool] | None = None,
    grads: dict[str, np.ndarray] | None = None,
):
    """One in-place AdamW update with decoupled weight decay.

    Gradients default to each parameter's ``.grad``. Nothing is modified if
    any gradient is non-finite.
    """
    if grads is None:
        grads = {k: p.grad for k, p in params.items() if p.grad is not None}
    for k, g in grads.items():
        if not np.isfinite(g).all():
            raise NonFiniteError(f"non-finite gradient for {k} at step {state.t + 1}")
    state.t += 1
    t = state.t
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for k, g in grads.items():
        p = params[k]
        m, v = state.m[k], state.v[k]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        wd = weight_decay if decay is None or decay(k, p) else 0.0
        step = lr * (m / c1) / (np.sqrt(v / c2) + eps)
        p.data = p.data - step - lr * wd * p.data
    return state


def lr_at_step(step: int, total_steps: int, base_lr: float, warmup_ratio: float) -> float:
    """Linear warmup over ``round(warmup_ratio * total)`` steps, then linear decay to 0."""
    if total_steps <= 0:
        raise ValueError("total_steps must be positive")
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    warm = round(warmup_ratio * total_steps)
    if step < warm:
        return base_lr * (step / warm)
    if warm == total_steps:
        return base_lr
    return base_lr * ((total_steps - step) / (total_steps - warm))


# ----------------------------------------------------------------------------
# training

@dataclass(frozen=True)
class LossRecord:
    step: int
    epoch: int
    loss: float


@dataclass
class TrainResult:
    params: Params
    curve: list[LossRecord] = field(default_factory=list)


def write_loss_curve(path: Path, curve: list[LossRecord]):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "epoch", "loss"])
        for r in curve:
            w.writerow([r.step, r.epoch, repr(r.loss)])


def read_loss_curve(path: Path) -> list[LossRecord]:
    with Path(path).open(newline="") as fh:
        return [LossRecord(int(r["step"]), int(r["epoch"]), float(r["loss"])) for r in csv.DictReader(fh)]


def _snapshot(params: Params) -> dict[str, np.ndarray]:
    return {k: p.data.copy() for k, p in params.items()}


def train(
    dataset: LeadDataset,
    model_cfg,
    cfg: TrainConfig,
    params: Params | None = None,
    callback: Callable[[LossRecord], None] | None = None,
) -> TrainResult:
    """Train ``model_cfg`` on ``dataset``; deterministic for a fixed ``cfg.seed``."""
    n = len(dataset)
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    if dataset.labels.min() < 0 or dataset.labels.max() >= model_cfg.num_classes:
        raise ValueError("labels out of range for the model's class count")
    if params is None:
        params = init_model(model_cfg, seed=cfg.seed, std=cfg.init_std)
    shuffle_rng = np.random.default_rng([cfg.seed, 0])
    dropout_rng = np.random.default_rng([cfg.seed, 1]) if getattr(model_cfg, "dropout", 0.0) > 0 else None
    state = AdamWState.create(params)
    decay = None if cfg.decay_norms_and_biases else default_decay_filter
    batches = math.ceil(n / cfg.batch_size)
    total = cfg.epochs * batches
    curve: list[LossRecord] = []
    last_good = _snapshot(params)
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            logits = forward(model_cfg, params, dataset.images[idx], dropout_rng)
            loss = T.cross_entropy(logits, dataset.labels[idx])
            value = float(loss.data)
            if not math.isfinite(value):
                raise TrainingDiverged(f"loss became {value} at step {step + 1}", step + 1, last_good, curve)
            last_good = _snapshot(params)
            loss.backward()
            lr = lr_at_step(step, total, cfg.base_lr, cfg.warmup_ratio)
            try:
                adamw_step(params, state, lr, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay, decay)
            except NonFiniteError as exc:
                raise TrainingDiverged(str(exc), step + 1, last_good, curve) from exc
            for p in params.values():
                p.zero_grad()
            step += 1
            rec = LossRecord(step, epoch, value)
            curve.append(rec)
            if callback is not None:
                callback(rec)
    return TrainResult(params, curve)


def predict(model_cfg, params: Params, images: np.ndarray, batch_size: int = 64) -> np.ndarray:
    out = []
    with T.no_grad():
        for start in range(0, len(images), batch_size):
            logits = forward(model_cfg, params, images[start : start + batch_size])
            out.append(logits.data.argmax(axis=1))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def accuracy(model_cfg, params: Params, dataset: LeadDataset) -> float:
    return float((predict(model_cfg, params, dataset.images) == dataset.labels).mean())


def dataset_loss(model_cfg, params: Params, dataset: LeadDataset) -> float:
    with T.no_grad():
        return float(T.cross_entropy(forward(model_cfg, params, dataset.images), dataset.labels).data)


# ----------------------------------------------------------------------------
# grid search

@dataclass
class GridCell:
    config: TrainConfig
    val_accuracy: float | None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class GridResult:
    best: TrainConfig
    cells: list[GridCell]


def grid_search(
    dataset: LeadDataset,
    model_cfg,
    axes: dict[str, list],
    base: TrainConfig = TrainConfig(),
    val_fraction: float = 0.2,
    group_by_report: bool = True,
) -> GridResult:
    """Train one model per grid cell and keep the best by validation accuracy.

    Ties go to the lower learning rate, then fewer epochs, then smaller batch.
    A cell whose training fails is recorded and skipped.
    """
    if not axes or any(len(v) == 0 for v in axes.values()):
        raise ValueError("every grid axis needs at least one value")
    ids = np.arange(len(dataset))
    groups = dataset.report_ids if group_by_report else None
    train_ids, val_ids, _ = holdout_split(ids, dataset.labels, (1.0 - val_fraction, val_fraction, 0.0), seed=base.seed, groups=groups)
    train_set, val_set = dataset.subset(train_ids), dataset.subset(val_ids)

    names = list(axes)
    cells = []
    for values in itertools.product(*(axes[k] for k in names)):
        cfg = dataclasses.replace(base, **dict(zip(names, values)))
        try:
            result = train(train_set, model_cfg, cfg)
        except (TrainingDiverged, FloatingPointError, ValueError) as exc:
            logger.warning("grid cell %s failed: %s", dict(zip(names, values)), exc)
            cells.append(GridCell(cfg, None, str(exc)))
            continue
        cells.append(GridCell(cfg, accuracy(model_cfg, result.params, val_set)))
    ok = [c for c in cells if not c.failed]
    if not ok:
        raise RuntimeError("every grid cell failed")
    best = min(ok, key=lambda c: (-c.val_accuracy, c.config.base_lr, c.config.epochs, c.config.batch_size))
    return GridResult(best.config, cells)
