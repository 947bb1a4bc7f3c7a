"""BEiT-style classifier: relative position bias per layer, mean-pooled readout."""
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
    relative_bias,
    relative_position_index,
    to_params,
)
from .vit import VitConfig


@dataclass(frozen=True)
class BeitConfig(VitConfig):
    @property
    def bias_table_rows(self) -> int:
        return (2 * self.grid - 1) ** 2


def init_beit(cfg: BeitConfig, seed: int = 0, std: float = 0.02) -> Params:
    rng = np.random.default_rng(seed)
    d = cfg.embed_dim
    p: dict[str, np.ndarray] = {}
    init_linear(rng, p, "patch_embed", cfg.patch_side**2, d, std=std)
    for i in range(cfg.depth):
        init_block(rng, p, f"blocks.{i}", d, cfg.mlp_ratio, std)
        p[f"blocks.{i}.attn.rel_pos_bias"] = np.zeros((cfg.bias_table_rows, cfg.heads))
    init_norm(p, "norm", d)
    init_linear(rng, p, "head", d, cfg.num_classes, std=std)
    return to_params(p)


def mean_pool(h: Tensor) -> Tensor:
    """Average the token axis of (B, N, D) hidden states."""
    return T.mean(h, axis=1)


def beit_encode(images, cfg: BeitConfig, params: Params, rng=None, use_bias: bool = True) -> Tensor:
    """Final normalised hidden states (B, N, D), before pooling."""
    x = as_batch(images)
    if x.shape[1] != cfg.image_side:
        raise ShapeError(f"expected {cfg.image_side}px images, got {x.shape[1]}")
    h = patch_embed(x, cfg.patch_side, params["patch_embed.weight"], params["patch_embed.bias"])
    index = relative_position_index(cfg.grid)
    for i in range(cfg.depth):
        bias = relative_bias(params[f"blocks.{i}.attn.rel_pos_bias"], index) if use_bias else None
        h = block(h, params, f"blocks.{i}", cfg.heads, bias, cfg.eps, cfg.dropout, rng)
    return layer_norm(h, params, "norm", cfg.eps)


def beit_forward(images, cfg: BeitConfig, params: Params, rng: np.random.Generator | None = None) -> Tensor:
    return dense(mean_pool(beit_encode(images, cfg, params, rng)), params, "head")
