"""Model registry: variant name -> (config class, initialiser, forward)."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable

from .beit import BeitConfig, beit_forward, init_beit
from .layers import Params
from .swin import SwinConfig, init_swin, swin_forward
from .vit import VitConfig, init_vit, vit_forward


@dataclass(frozen=True)
class ModelSpec:
    config_cls: type
    init: Callable
    forward: Callable


MODELS = {
    "vit": ModelSpec(VitConfig, init_vit, vit_forward),
    "swin": ModelSpec(SwinConfig, init_swin, swin_forward),
    "beit": ModelSpec(BeitConfig, init_beit, beit_forward),
}

PRESETS = {
    # CPU-trainable geometry
    "tiny": {
        "vit": VitConfig(image_side=64, patch_side=8, embed_dim=64, depth=2, heads=4),
        "swin": SwinConfig(image_side=64, patch_side=4, embed_dim=32, depths=(2, 2), heads=(2, 4), window=4),
        "beit": BeitConfig(image_side=64, patch_side=8, embed_dim=64, depth=2, heads=4),
    },
    # small enough for coordinate-wise finite differences
    "gradcheck": {
        "vit": VitConfig(image_side=16, patch_side=4, embed_dim=8, depth=2, heads=2, mlp_ratio=2.0),
        "swin": SwinConfig(image_side=32, patch_side=4, embed_dim=16, depths=(1, 1), heads=(2, 2), window=4, mlp_ratio=2.0),
        "beit": BeitConfig(image_side=16, patch_side=4, embed_dim=8, depth=2, heads=2, mlp_ratio=2.0),
    },
}


def get_spec(variant: str) -> ModelSpec:
    try:
        return MODELS[variant]
    except KeyError:
        raise ValueError(f"unknown model {variant!r}; choose from {sorted(MODELS)}") from None


def preset_config(variant: str, preset: str = "tiny", **overrides):
    try:
        cfg = PRESETS[preset][variant]
    except KeyError:
        raise ValueError(f"no preset {preset!r} for model {variant!r}") from None
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def config_to_dict(cfg) -> dict:
    d = dataclasses.asdict(cfg)
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def config_from_dict(variant: str, d: dict):
    return get_spec(variant).config_cls(**d)


def variant_of(cfg) -> str:
    for name, spec in MODELS.items():
        if type(cfg) is spec.config_cls:
            return name
    raise TypeError(f"not a model config: {cfg!r}")


def init_model(cfg, seed: int = 0, std: float = 0.02) -> Params:
    return get_spec(variant_of(cfg)).init(cfg, seed, std)


def forward(cfg, params: Params, images, rng=None):
    return get_spec(variant_of(cfg)).forward(images, cfg, params, rng)


__all__ = [
    "BeitConfig",
    "SwinConfig",
    "VitConfig",
    "MODELS",
    "PRESETS",
    "Params",
    "beit_forward",
    "config_from_dict",
    "config_to_dict",
    "forward",
    "get_spec",
    "init_model",
    "preset_config",
    "swin_forward",
    "variant_of",
    "vit_forward",
]
