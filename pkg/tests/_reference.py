"""Straight-line numpy reference models used as test oracles.

Written without the package's tensor engine: explicit loops over patches,
heads and relative offsets.
"""
import math
from collections import deque

import numpy as np

_erf = np.vectorize(math.erf)


def ln(x, g, b, eps):
    mu = x.mean(-1, keepdims=True)
    var = ((x - mu) ** 2).mean(-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * g + b


def gelu(x):
    return 0.5 * x * (1.0 + _erf(x / math.sqrt(2.0)))


def softmax(s):
    e = np.exp(s - s.max(-1, keepdims=True))
    return e / e.sum(-1, keepdims=True)


def lin(x, p, name):
    out = x @ p[f"{name}.weight"]
    return out + p[f"{name}.bias"] if f"{name}.bias" in p else out


def patches(img, size):
    g = img.shape[0] // size
    return np.array([img[r * size : (r + 1) * size, c * size : (c + 1) * size].reshape(-1) for r in range(g) for c in range(g)])


def attention(x, p, name, heads, bias=None):
    n, d = x.shape
    dh = d // heads
    q, k, v = lin(x, p, f"{name}.q"), lin(x, p, f"{name}.k"), lin(x, p, f"{name}.v")
    outs = []
    for h in range(heads):
        sl = slice(h * dh, (h + 1) * dh)
        scores = q[:, sl] @ k[:, sl].T / math.sqrt(dh)
        if bias is not None:
            scores = scores + bias[h]
        outs.append(softmax(scores) @ v[:, sl])
    return lin(np.concatenate(outs, axis=1), p, f"{name}.proj")


def block(x, p, name, heads, eps, bias=None):
    x = x + attention(ln(x, p[f"{name}.norm1.weight"], p[f"{name}.norm1.bias"], eps), p, f"{name}.attn", heads, bias)
    h = ln(x, p[f"{name}.norm2.weight"], p[f"{name}.norm2.bias"], eps)
    return x + lin(gelu(lin(h, p, f"{name}.mlp.fc1")), p, f"{name}.mlp.fc2")


def offset_bias(table, side):
    """Per-head (H, N, N) bias: token i at (ri, ci), j at (rj, cj) reads row
    (ri - rj + side - 1) * (2 side - 1) + (ci - cj + side - 1)."""
    n = side * side
    out = np.zeros((table.shape[1], n, n))
    for i in range(n):
        for j in range(n):
            (ri, ci), (rj, cj) = divmod(i, side), divmod(j, side)
            out[:, i, j] = table[(ri - rj + side - 1) * (2 * side - 1) + (ci - cj + side - 1)]
    return out


def vit(images, cfg, p):
    logits = []
    for img in images:
        x = lin(patches(img, cfg.patch_side), p, "patch_embed")
        x = np.vstack([p["cls_token"][0], x]) + p["pos_embed"][0]
        for i in range(cfg.depth):
            x = block(x, p, f"blocks.{i}", cfg.heads, cfg.eps)
        x = ln(x, p["norm.weight"], p["norm.bias"], cfg.eps)
        logits.append(lin(x[0], p, "head"))
    return np.array(logits)


def beit(images, cfg, p):
    logits = []
    for img in images:
        x = lin(patches(img, cfg.patch_side), p, "patch_embed")
        for i in range(cfg.depth):
            bias = offset_bias(p[f"blocks.{i}.attn.rel_pos_bias"], cfg.grid)
            x = block(x, p, f"blocks.{i}", cfg.heads, cfg.eps, bias)
        x = ln(x, p["norm.weight"], p["norm.bias"], cfg.eps)
        logits.append(lin(x.mean(axis=0), p, "head"))
    return np.array(logits)


def wrap_allowed(h, w, m, s):
    """Attention permission per shifted window from first principles.

    Token (i, j) of the rolled map came from ((i + s) mod h, (j + s) mod w).
    Two tokens in one window were neighbours in the original map iff they
    agree on whether their row (and column) wrapped around the edge.
    """
    wins = []
    for wr in range(h // m):
        for wc in range(w // m):
            toks = [(wr * m + a, wc * m + b) for a in range(m) for b in range(m)]
            flags = [((i + s) >= h, (j + s) >= w) for i, j in toks]
            wins.append([[fa == fb for fb in flags] for fa in flags])
    return np.array(wins)


def swin_block(x, p, name, heads, m, s, eps):
    """One Swin block on a single (H, W, D) map, token by token."""
    h, w, d = x.shape
    y = ln(x, p[f"{name}.norm1.weight"], p[f"{name}.norm1.bias"], eps)
    out = np.zeros_like(y)
    bias = offset_bias(p[f"{name}.attn.rel_pos_bias"], m)
    allowed = wrap_allowed(h, w, m, s) if s else None
    k = 0
    for wr in range(h // m):
        for wc in range(w // m):
            # rolled-frame window -> original coordinates
            src = [((wr * m + a + s) % h, (wc * m + b + s) % w) for a in range(m) for b in range(m)]
            tokens = np.array([y[i, j] for i, j in src])
            b = bias if allowed is None else bias + np.where(allowed[k], 0.0, -1e4)
            res = attention(tokens, p, f"{name}.attn", heads, b)
            for t, (i, j) in enumerate(src):
                out[i, j] = res[t]
            k += 1
    x = x + out
    z = ln(x, p[f"{name}.norm2.weight"], p[f"{name}.norm2.bias"], eps)
    return x + lin(gelu(lin(z, p, f"{name}.mlp.fc1")), p, f"{name}.mlp.fc2")

def components(mask: np.ndarray) -> int:
    """4-connected foreground components by breadth-first flood fill."""
    seen = np.zeros(mask.shape, dtype=bool)
    h, w = mask.shape
    count = 0
    for y0 in range(h):
        for x0 in range(w):
            if not mask[y0, x0] or seen[y0, x0]:
                continue
            count += 1
            seen[y0, x0] = True
            queue = deque([(y0, x0)])
            while queue:
                y, x = queue.popleft()
                for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        queue.append((ny, nx))
    return count

def brute_force_metrics(cm):
    """Expand the matrix into samples and count everything one sample at a time."""
    samples = [(t, p) for t in range(len(cm)) for p in range(len(cm)) for _ in range(int(cm[t][p]))]
    c, n = len(cm), len(samples)
    prec, rec, f1, sup = [], [], [], []
    for k in range(c):
        tp = sum(1 for t, p in samples if t == k and p == k)
        pred = sum(1 for _, p in samples if p == k)
        true = sum(1 for t, _ in samples if t == k)
        pk = tp / pred if pred else 0.0
        rk = tp / true if true else 0.0
        prec.append(pk)
        rec.append(rk)
        f1.append(2 * pk * rk / (pk + rk) if pk + rk else 0.0)
        sup.append(true)
    acc = sum(1 for t, p in samples if t == p) / n
    return {
        "precision": prec, "recall": rec, "f1": f1,
        "macro": [sum(v) / c for v in (prec, rec, f1)],
        "weighted": [sum(x * s for x, s in zip(v, sup)) / n for v in (prec, rec, f1)],
        "accuracy": acc,
    }
