"""Shared transformer building blocks: patch embedding, attention, MLP, init."""
from __future__ import annotations

import math

import numpy as np

from .. import tensor as T
from ..tensor import ShapeError, Tensor

Params = dict[str, Tensor]


def trunc_normal(rng: np.random.Generator, shape, std: float = 0.02) -> np.ndarray:
    """Normal(0, std) samples redrawn until they fall inside +-2 std."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2 * std
    return out


def as_batch(images) -> Tensor:
    """Accept (S, S) or (B, S, S) arrays/tensors; return a (B, S, S) tensor."""
    x = images if isinstance(images, Tensor) else Tensor(np.asarray(images, dtype=np.float64))
    if x.ndim == 2:
        x = T.reshape(x, (1,) + x.shape)
    if x.ndim != 3 or x.shape[1] != x.shape[2]:
        raise ShapeError(f"expected square (B, S, S) images, got {x.shape}")
    return x


def patchify(x: Tensor, patch: int) -> Tensor:
    """(B, S, S) -> (B, (S/P)^2, P^2), patches in raster order."""
    b, s, _ = x.shape
    if s % patch:
        raise ShapeError(f"image side {s} is not divisible by patch side {patch}")
    g = s // patch
    x = T.reshape(x, (b, g, patch, g, patch))
    x = T.transpose(x, (0, 1, 3, 2, 4))
    return T.reshape(x, (b, g * g, patch * patch))


def patch_embed(images, patch: int, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    return T.linear(patchify(as_batch(images), patch), weight, bias)


def layer_norm(x: Tensor, p: Params, prefix: str, eps: float = 1e-6) -> Tensor:
    return T.layer_norm(x, p[f"{prefix}.weight"], p[f"{prefix}.bias"], eps)


def dense(x: Tensor, p: Params, prefix: str) -> Tensor:
    return T.linear(x, p[f"{prefix}.weight"], p.get(f"{prefix}.bias"))


def split_heads(x: Tensor, heads: int) -> Tensor:
    *lead, n, d = x.shape
    x = T.reshape(x, (*lead, n, heads, d // heads))
    return T.swapaxes(x, -2, -3)


def merge_heads(x: Tensor) -> Tensor:
    *lead, h, n, dh = x.shape
    x = T.swapaxes(x, -2, -3)
    return T.reshape(x, (*lead, n, h * dh))


def mhsa(
    x: Tensor,
    p: Params,
    prefix: str,
    heads: int,
    bias: Tensor | np.ndarray | None = None,
    return_attn: bool = False,
):
    """Multi-head self-attention over the token axis of ``x`` (..., N, D).

    ``bias`` is added to the scaled scores before the softmax and must
    broadcast to (..., heads, N, N).
    """
    d = x.shape[-1]
    if d % heads:
        raise ShapeError(f"embed dim {d} is not divisible by {heads} heads")
    q = split_heads(dense(x, p, f"{prefix}.q"), heads)
    k = split_heads(dense(x, p, f"{prefix}.k"), heads)
    v = split_heads(dense(x, p, f"{prefix}.v"), heads)
    scores = T.scale(T.matmul(q, T.swapaxes(k, -1, -2)), 1.0 / math.sqrt(d // heads))
    if bias is not None:
        bias = bias if isinstance(bias, Tensor) else Tensor(bias)
        try:
            ok = np.broadcast_shapes(bias.shape, scores.shape) == scores.shape
        except ValueError:
            ok = False
        if not ok:
            raise ShapeError(f"attention bias {bias.shape} does not broadcast to scores {scores.shape}")
        scores = T.add(scores, bias)
    attn = T.softmax(scores, axis=-1)
    out = dense(merge_heads(T.matmul(attn, v)), p, f"{prefix}.proj")
    return (out, attn) if return_attn else out


def mlp(x: Tensor, p: Params, prefix: str) -> Tensor:
    return dense(T.gelu(dense(x, p, f"{prefix}.fc1")), p, f"{prefix}.fc2")


def block(x, p, prefix, heads, bias=None, eps=1e-6, dropout=0.0, rng=None) -> Tensor:
    """Pre-norm transformer block: attention and MLP, each with a residual."""
    h = mhsa(layer_norm(x, p, f"{prefix}.norm1", eps), p, f"{prefix}.attn", heads, bias)
    x = T.add(x, T.dropout(h, dropout, rng))
    h = mlp(layer_norm(x, p, f"{prefix}.norm2", eps), p, f"{prefix}.mlp")
    return T.add(x, T.dropout(h, dropout, rng))


def relative_position_index(side: int) -> np.ndarray:
    """(side^2, side^2) table of flattened 2-D offsets into a (2*side-1)^2 bias table."""
    if side < 1:
        raise ValueError("side must be >= 1")
    rows, cols = np.divmod(np.arange(side * side), side)
    dr = rows[:, None] - rows[None, :] + side - 1
    dc = cols[:, None] - cols[None, :] + side - 1
    return dr * (2 * side - 1) + dc


def relative_bias(table: Tensor, index: np.ndarray) -> Tensor:
    """Gather a ((2s-1)^2, H) table into a per-head (H, N, N) bias."""
    return T.transpose(T.getitem(table, index), (2, 0, 1))


# ----------------------------------------------------------------------------
# initialisation

def init_linear(rng, p: dict, prefix: str, d_in: int, d_out: int, bias: bool = True, std: float = 0.02):
    p[f"{prefix}.weight"] = trunc_normal(rng, (d_in, d_out), std)
    if bias:
        p[f"{prefix}.bias"] = np.zeros(d_out)


def init_norm(p: dict, prefix: str, d: int):
    p[f"{prefix}.weight"] = np.ones(d)
    p[f"{prefix}.bias"] = np.zeros(d)


def init_block(rng, p: dict, prefix: str, dim: int, mlp_ratio: float, std: float = 0.02):
    init_norm(p, f"{prefix}.norm1", dim)
    # no key bias: softmax is invariant to it, so its gradient is identically zero
    for name in ("q", "k", "v", "proj"):
        init_linear(rng, p, f"{prefix}.attn.{name}", dim, dim, bias=name != "k", std=std)
    init_norm(p, f"{prefix}.norm2", dim)
    hidden = int(dim * mlp_ratio)
    init_linear(rng, p, f"{prefix}.mlp.fc1", dim, hidden, std=std)
    init_linear(rng, p, f"{prefix}.mlp.fc2", hidden, dim, std=std)


def to_params(arrays: dict[str, np.ndarray]) -> Params:
    return {k: Tensor(v, requires_grad=True) for k, v in arrays.items()}
