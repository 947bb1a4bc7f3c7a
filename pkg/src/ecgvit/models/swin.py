"""Swin-style classifier: windowed attention with cyclic shifts and patch merging."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import tensor as T
from ..tensor import ShapeError, Tensor
from .layers import (
    Params,
    as_batch,
    dense,
    init_block,
    init_linear,
    init_norm,
    layer_norm,
    mhsa,
    mlp,
    patch_embed,
    relative_bias,
    relative_position_index,
    to_params,
)

MASK_VALUE = -1e4


@dataclass(frozen=True)
class SwinConfig:
    image_side: int = 64
    patch_side: int = 4
    embed_dim: int = 32
    depths: tuple[int, ...] = (2, 2)
    heads: tuple[int, ...] = (2, 4)
    window: int = 4
    shift: int | None = None  # None: window // 2
    mlp_ratio: float = 4.0
    num_classes: int = 4
    dropout: float = 0.0
    eps: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "depths", tuple(self.depths))
        object.__setattr__(self, "heads", tuple(self.heads))
        if len(self.depths) != len(self.heads) or not self.depths:
            raise ValueError("depths and heads need one entry per stage")
        if self.image_side % self.patch_side:
            raise ValueError(f"image side {self.image_side} not divisible by patch side {self.patch_side}")
        if not 0 <= self.shift_size < self.window:
            raise ValueError(f"shift {self.shift_size} must lie in [0, window={self.window})")
        side = self.image_side // self.patch_side
        for i, (dim, h) in enumerate(zip(self.stage_dims, self.heads)):
            if i and side % 2:
                raise ValueError(f"stage {i} cannot merge an odd {side}x{side} map")
            if i:
                side //= 2
            if side % min(self.window, side):
                raise ValueError(f"stage {i} map side {side} not divisible by window {self.window}")
            if dim % h:
                raise ValueError(f"stage {i} dim {dim} not divisible by {h} heads")

    @property
    def shift_size(self) -> int:
        return self.window // 2 if self.shift is None else self.shift

    @property
    def stage_dims(self) -> list[int]:
        return [self.embed_dim * 2**i for i in range(len(self.depths))]

    @property
    def stage_sides(self) -> list[int]:
        g = self.image_side // self.patch_side
        return [g // 2**i for i in range(len(self.depths))]

    def stage_window(self, i: int) -> int:
        return min(self.window, self.stage_sides[i])

    def block_shift(self, i: int, j: int) -> int:
        """Odd blocks shift, unless the window already covers the whole map."""
        if j % 2 == 0 or self.stage_sides[i] <= self.window:
            return 0
        return self.shift_size


def window_partition(x: Tensor, m: int) -> Tensor:
    """(..., H, W, D) -> (..., H/m * W/m, m*m, D), windows in raster order."""
    *lead, h, w, d = x.shape
    if h % m or w % m:
        raise ShapeError(f"{h}x{w} map is not divisible into {m}x{m} windows")
    n = len(lead)
    x = T.reshape(x, (*lead, h // m, m, w // m, m, d))
    x = T.transpose(x, (*range(n), n, n + 2, n + 1, n + 3, n + 4))
    return T.reshape(x, (*lead, (h // m) * (w // m), m * m, d))


def window_reverse(windows: Tensor, m: int, h: int, w: int) -> Tensor:
    *lead, _, _, d = windows.shape
    n = len(lead)
    x = T.reshape(windows, (*lead, h // m, w // m, m, m, d))
    x = T.transpose(x, (*range(n), n, n + 2, n + 1, n + 3, n + 4))
    return T.reshape(x, (*lead, h, w, d))


def cyclic_shift(x: Tensor, s: int) -> Tensor:
    """Move token (i, j) of a (..., H, W, D) map to ((i - s) mod H, (j - s) mod W)."""
    if s == 0:
        return x
    return T.roll(x, (-s, -s), axis=(-3, -2))


def region_ids(h: int, w: int, m: int, s: int) -> np.ndarray:
    """Region labels on the shifted map; wrapped-around strips get their own ids."""
    ids = np.zeros((h, w), dtype=np.int64)
    bands = lambda n: (slice(0, n - m), slice(n - m, n - s), slice(n - s, n))  # noqa: E731
    label = 0
    for hs in bands(h):
        for ws in bands(w):
            ids[hs, ws] = label
            label += 1
    return ids


def shift_attention_mask(h: int, w: int, m: int, s: int) -> np.ndarray:
    """Additive (num_windows, m*m, m*m) mask: 0 within a region, -1e4 across."""
    if h % m or w % m:
        raise ShapeError(f"{h}x{w} map is not divisible into {m}x{m} windows")
    if not 0 < s < m:
        raise ValueError(f"shift {s} must satisfy 0 < s < window {m}")
    ids = region_ids(h, w, m, s)
    win = ids.reshape(h // m, m, w // m, m).transpose(0, 2, 1, 3).reshape(-1, m * m)
    return np.where(win[:, :, None] == win[:, None, :], 0.0, MASK_VALUE)


def patch_merging(x: Tensor, p: Params, prefix: str, eps: float = 1e-5) -> Tensor:
    """(..., H, W, D) -> (..., H/2, W/2, 2D) via 2x2 concat, norm, linear."""
    *lead, h, w, d = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"patch merging needs even extents, got {h}x{w}")
    n = len(lead)
    x = T.reshape(x, (*lead, h // 2, 2, w // 2, 2, d))
    # concat order: (0,0), (1,0), (0,1), (1,1) as (row, col) offsets
    x = T.transpose(x, (*range(n), n, n + 2, n + 3, n + 1, n + 4))
    x = T.reshape(x, (*lead, h // 2, w // 2, 4 * d))
    return dense(layer_norm(x, p, f"{prefix}.norm", eps), p, f"{prefix}.reduction")


def swin_block(x: Tensor, p: Params, prefix: str, heads: int, m: int, shift: int, eps=1e-5, dropout=0.0, rng=None) -> Tensor:
    *_, h, w, _ = x.shape
    y = layer_norm(x, p, f"{prefix}.norm1", eps)
    y = cyclic_shift(y, shift)
    bias = relative_bias(p[f"{prefix}.attn.rel_pos_bias"], relative_position_index(m))
    if shift:
        mask = shift_attention_mask(h, w, m, shift)[:, None]
        bias = T.add(bias, mask)
    y = mhsa(window_partition(y, m), p, f"{prefix}.attn", heads, bias)
    y = cyclic_shift(window_reverse(y, m, h, w), -shift)
    x = T.add(x, T.dropout(y, dropout, rng))
    y = mlp(layer_norm(x, p, f"{prefix}.norm2", eps), p, f"{prefix}.mlp")
    return T.add(x, T.dropout(y, dropout, rng))


def init_swin(cfg: SwinConfig, seed: int = 0, std: float = 0.02) -> Params:
    rng = np.random.default_rng(seed)
    p: dict[str, np.ndarray] = {}
    init_linear(rng, p, "patch_embed", cfg.patch_side**2, cfg.embed_dim, std=std)
    init_norm(p, "patch_norm", cfg.embed_dim)
    dims = cfg.stage_dims
    for i, (depth, heads) in enumerate(zip(cfg.depths, cfg.heads)):
        m = cfg.stage_window(i)
        for j in range(depth):
            prefix = f"stages.{i}.blocks.{j}"
            init_block(rng, p, prefix, dims[i], cfg.mlp_ratio, std)
            p[f"{prefix}.attn.rel_pos_bias"] = np.zeros(((2 * m - 1) ** 2, heads))
        if i + 1 < len(cfg.depths):
            init_norm(p, f"stages.{i}.merge.norm", 4 * dims[i])
            init_linear(rng, p, f"stages.{i}.merge.reduction", 4 * dims[i], 2 * dims[i], bias=False, std=std)
    init_norm(p, "norm", dims[-1])
    init_linear(rng, p, "head", dims[-1], cfg.num_classes, std=std)
    return to_params(p)


def swin_forward(images, cfg: SwinConfig, params: Params, rng: np.random.Generator | None = None) -> Tensor:
    x = as_batch(images)
    if x.shape[1] != cfg.image_side:
        raise ShapeError(f"expected {cfg.image_side}px images, got {x.shape[1]}")
    b = x.shape[0]
    g = cfg.stage_sides[0]
    h = patch_embed(x, cfg.patch_side, params["patch_embed.weight"], params["patch_embed.bias"])
    h = layer_norm(h, params, "patch_norm", cfg.eps)
    h = T.reshape(h, (b, g, g, cfg.embed_dim))
    for i, (depth, heads) in enumerate(zip(cfg.depths, cfg.heads)):
        m = cfg.stage_window(i)
        for j in range(depth):
            h = swin_block(h, params, f"stages.{i}.blocks.{j}", heads, m, cfg.block_shift(i, j), cfg.eps, cfg.dropout, rng)
        if i + 1 < len(cfg.depths):
            h = patch_merging(h, params, f"stages.{i}.merge", cfg.eps)
    h = layer_norm(h, params, "norm", cfg.eps)
    side, dim = h.shape[1], h.shape[3]
    pooled = T.mean(T.reshape(h, (b, side * side, dim)), axis=1)
    return dense(pooled, params, "head")
