"""ViT-style classifier: patch tokens, CLS token, absolute position embeddings."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import tensor as T
from ..tensor import ShapeError, Tensor
from .layers import (
    Params,
    as_batch,
    block,
    dense,
    init_block,
    init_linear,
    init_norm,
    layer_norm,
    patch_embed,
    to_params,
    trunc_normal,
)


@dataclass(frozen=True)
class VitConfig:
    image_side: int = 64
    patch_side: int = 8
    embed_dim: int = 64
    depth: int = 2
    heads: int = 4
    mlp_ratio: float = 4.0
    num_classes: int = 4
    dropout: float = 0.0
    eps: float = 1e-6

    def __post_init__(self):
        if self.image_side % self.patch_side:
            raise ValueError(f"image side {self.image_side} not divisible by patch side {self.patch_side}")
        if self.embed_dim % self.heads:
            raise ValueError(f"embed dim {self.embed_dim} not divisible by {self.heads} heads")

    @property
    def grid(self) -> int:
        return self.image_side // self.patch_side

    @property
    def num_patches(self) -> int:
        return self.grid**2


def init_vit(cfg: VitConfig, seed: int = 0, std: float = 0.02) -> Params:
    rng = np.random.default_rng(seed)
    d = cfg.embed_dim
    p: dict[str, np.ndarray] = {}
    init_linear(rng, p, "patch_embed", cfg.patch_side**2, d, std=std)
    p["cls_token"] = trunc_normal(rng, (1, 1, d), std)
    p["pos_embed"] = trunc_normal(rng, (1, cfg.num_patches + 1, d), std)
    for i in range(cfg.depth):
        init_block(rng, p, f"blocks.{i}", d, cfg.mlp_ratio, std)
    init_norm(p, "norm", d)
    init_linear(rng, p, "head", d, cfg.num_classes, std=std)
    return to_params(p)


def vit_forward(images, cfg: VitConfig, params: Params, rng: np.random.Generator | None = None) -> Tensor:
    """Logits (B, num_classes) read from the final CLS token."""
    x = as_batch(images)
    if x.shape[1] != cfg.image_side:
        raise ShapeError(f"expected {cfg.image_side}px images, got {x.shape[1]}")
    tokens = patch_embed(x, cfg.patch_side, params["patch_embed.weight"], params["patch_embed.bias"])
    b = tokens.shape[0]
    cls = T.broadcast_to(params["cls_token"], (b, 1, cfg.embed_dim))
    h = T.add(T.concat([cls, tokens], axis=1), params["pos_embed"])
    for i in range(cfg.depth):
        h = block(h, params, f"blocks.{i}", cfg.heads, eps=cfg.eps, dropout=cfg.dropout, rng=rng)
    h = layer_norm(h, params, "norm", cfg.eps)
    return dense(h[:, 0], params, "head")
