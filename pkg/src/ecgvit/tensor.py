"""Minimal float64 tensor engine with reverse-mode gradients.

Every op records its inputs and a backward closure on the output tensor.
``Tensor.backward`` orders the recorded graph topologically and replays the
closures in reverse, accumulating gradients additively.
"""
from __future__ import annotations

import contextlib
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import erf

logger = logging.getLogger(__name__)

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

_grad_enabled = True
_corrupt_backward = False
_flops: list[list[int]] = []


class ShapeError(ValueError):
    pass


@contextlib.contextmanager
def no_grad():
    """Run ops without recording a graph."""
    global _grad_enabled
    prev, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = prev


@contextlib.contextmanager
def corrupt_backward():
    """Debug switch: makes the gelu backward rule drop its density term.

    Used as a negative control for the gradient checker.
    """
    global _corrupt_backward
    prev, _corrupt_backward = _corrupt_backward, True
    try:
        yield
    finally:
        _corrupt_backward = prev


@contextlib.contextmanager
def count_flops():
    """Count matmul floating-point operations (2 per multiply-add).

    Yields a one-element list whose entry is updated in place.
    """
    counter = [0]
    _flops.append(counter)
    try:
        yield counter
    finally:
        _flops.remove(counter)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self.op = ""

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op or 'leaf'}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self, grad: np.ndarray | None = None):
        """Populate ``.grad`` on every ancestor that requires gradients."""
        if grad is None:
            if self.data.size != 1:
                raise ShapeError(f"backward() needs a scalar loss, got shape {self.shape}")
            grad = np.ones_like(self.data)
        order = _topo_order(self)
        self._accumulate(grad)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes or None)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def _result(data: np.ndarray, parents: Sequence[Tensor], backward, op: str) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
        out.op = op
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def _broadcast_shape(a: Tensor, b: Tensor, name: str) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{name}: shapes {a.shape} and {b.shape} are not broadcastable") from None


# ----------------------------------------------------------------------------
# elementwise

def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _broadcast_shape(a, b, "add")

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _result(a.data + b.data, (a, b), backward, "add")


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _broadcast_shape(a, b, "sub")

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))

    return _result(a.data - b.data, (a, b), backward, "sub")


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _broadcast_shape(a, b, "mul")

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _result(a.data * b.data, (a, b), backward, "mul")


def div(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _broadcast_shape(a, b, "div")

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _result(a.data / b.data, (a, b), backward, "div")


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def backward(g):
        a._accumulate(g * c)

    return _result(a.data * c, (a,), backward, "scale")


def elementwise(op: str, a, b) -> Tensor:
    """Dispatch ``add``/``sub``/``mul``/``scale`` by name."""
    if op == "scale":
        return scale(_wrap(a), b)
    try:
        fn = {"add": add, "sub": sub, "mul": mul, "div": div}[op]
    except KeyError:
        raise ValueError(f"unknown elementwise op {op!r}") from None
    return fn(a, b)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)

    def backward(g):
        a._accumulate(g * out)

    return _result(out, (a,), backward, "exp")


def log(a: Tensor) -> Tensor:
    def backward(g):
        a._accumulate(g / a.data)

    return _result(np.log(a.data), (a,), backward, "log")


def gelu(x: Tensor) -> Tensor:
    """Exact GELU, ``0.5 * x * (1 + erf(x / sqrt(2)))``."""
    cdf = 0.5 * (1.0 + erf(x.data / _SQRT2))

    def backward(g):
        if _corrupt_backward:
            x._accumulate(g * cdf)
        else:
            pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
            x._accumulate(g * (cdf + x.data * pdf))

    return _result(x.data * cdf, (x,), backward, "gelu")


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None) -> Tensor:
    if rate <= 0.0 or rng is None:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)

    def backward(g):
        x._accumulate(g * keep)

    return _result(x.data * keep, (x,), backward, "dropout")


# ----------------------------------------------------------------------------
# linear algebra

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product over the last two axes, with leading-axis broadcasting."""
    a, b = _wrap(a), _wrap(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    out = a.data @ b.data
    if _flops:
        n = 2 * out.size * a.shape[-1]
        for c in _flops:
            c[0] += n

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))

    return _result(out, (a, b), backward, "matmul")


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    y = matmul(x, weight)
    return y if bias is None else add(y, bias)


# ----------------------------------------------------------------------------
# reductions and shape ops

def _norm_axis(axis, ndim):
    if axis is None:
        return None
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    out = []
    for ax in axes:
        if not -ndim <= ax < ndim:
            raise ShapeError(f"axis {ax} out of range for {ndim}-d tensor")
        out.append(ax % ndim)
    return tuple(out)


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axis(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)

    def backward(g):
        if axes is not None and not keepdims:
            g = np.expand_dims(g, axes)
        a._accumulate(np.broadcast_to(g, a.shape))

    return _result(out, (a,), backward, "sum")


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axis(axis, a.ndim)
    n = a.size if axes is None else int(np.prod([a.shape[i] for i in axes]))
    return scale(tsum(a, axes, keepdims), 1.0 / n)


def reshape(a: Tensor, shape) -> Tensor:
    out = a.data.reshape(shape)

    def backward(g):
        a._accumulate(g.reshape(a.shape))

    return _result(out, (a,), backward, "reshape")


def transpose(a: Tensor, axes=None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    axes = tuple(ax % a.ndim for ax in axes)
    inv = tuple(np.argsort(axes))

    def backward(g):
        a._accumulate(np.transpose(g, inv))

    return _result(np.ascontiguousarray(np.transpose(a.data, axes)), (a,), backward, "transpose")


def swapaxes(a: Tensor, i: int, j: int) -> Tensor:
    axes = list(range(a.ndim))
    axes[i], axes[j] = axes[j], axes[i]
    return transpose(a, axes)


def broadcast_to(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)

    def backward(g):
        a._accumulate(_unbroadcast(g, a.shape))

    return _result(np.broadcast_to(a.data, shape).copy(), (a,), backward, "broadcast_to")


def roll(a: Tensor, shift, axis) -> Tensor:
    def backward(g):
        neg = tuple(-s for s in shift) if isinstance(shift, (tuple, list)) else -shift
        a._accumulate(np.roll(g, neg, axis=axis))

    return _result(np.roll(a.data, shift, axis=axis), (a,), backward, "roll")


def getitem(a: Tensor, idx) -> Tensor:
    """Basic or integer-array indexing; backward scatters with ``np.add.at``."""

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        a._accumulate(full)

    return _result(np.array(a.data[idx], copy=True), (a,), backward, "getitem")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t._accumulate(g[tuple(sl)])

    out = np.concatenate([t.data for t in tensors], axis=axis)
    return _result(out, tensors, backward, "concat")


# ----------------------------------------------------------------------------
# normalizers and losses

def softmax(x: Tensor, axis: int = -1) -> Tensor:
    (axis,) = _norm_axis(axis, x.ndim)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        x._accumulate(out * (g - (g * out).sum(axis=axis, keepdims=True)))

    return _result(out, (x,), backward, "softmax")


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    (axis,) = _norm_axis(axis, x.ndim)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    out = z - lse

    def backward(g):
        x._accumulate(g - np.exp(out) * g.sum(axis=axis, keepdims=True))

    return _result(out, (x,), backward, "log_softmax")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis (population variance), then scale and shift."""
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(f"layer_norm: gamma {gamma.shape} / beta {beta.shape} do not match last axis {d}")
    if eps <= 0:
        raise ValueError("eps must be positive")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd
    out = xhat * gamma.data + beta.data

    def backward(g):
        if gamma.requires_grad:
            gamma._accumulate((g * xhat).reshape(-1, d).sum(axis=0))
        if beta.requires_grad:
            beta._accumulate(g.reshape(-1, d).sum(axis=0))
        if x.requires_grad:
            gx = g * gamma.data
            x._accumulate(
                rstd * (gx - gx.mean(axis=-1, keepdims=True) - xhat * (gx * xhat).mean(axis=-1, keepdims=True))
            )

    return _result(out, (x, gamma, beta), backward, "layer_norm")


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of integer ``labels`` under ``softmax(logits)``."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"cross_entropy: logits {logits.shape} vs labels {labels.shape}")
    n, c = logits.shape
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValueError(f"labels must lie in [0, {c}), got range [{labels.min()}, {labels.max()}]")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - lse
    rows = np.arange(n)
    loss = -logp[rows, labels].mean()

    def backward(g):
        d = np.exp(logp)
        d[rows, labels] -= 1.0
        logits._accumulate(g * d / n)

    return _result(np.asarray(loss), (logits,), backward, "cross_entropy")


# ----------------------------------------------------------------------------
# gradient checking

@dataclass
class GradCheckReport:
    passed: bool
    max_rel_error: float
    n_checked: int
    worst: str = ""
    errors: dict[str, float] = field(default_factory=dict)

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} max_rel_err={self.max_rel_error:.3e} over {self.n_checked} coords (worst: {self.worst})"


def rel_error(a, b) -> np.ndarray:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)


def check_gradients(
    loss_fn: Callable[[], Tensor],
    tensors: dict[str, Tensor],
    step: float = 1e-5,
    tol: float = 1e-4,
    max_coords: int | None = None,
    seed: int = 0,
) -> GradCheckReport:
    """Compare backprop gradients of ``loss_fn()`` with central differences.

    ``loss_fn`` must read the tensors in ``tensors`` (their ``.data`` is
    perturbed in place). With ``max_coords`` set, at most that many
    coordinates per tensor are sampled.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    for t in tensors.values():
        t.requires_grad = True
        t.zero_grad()
    loss = loss_fn()
    if not np.isfinite(loss.data).all():
        raise FloatingPointError(f"loss is not finite: {loss.data}")
    loss.backward()
    analytic = {k: (t.grad if t.grad is not None else np.zeros_like(t.data)).copy() for k, t in tensors.items()}

    rng = np.random.default_rng(seed)
    worst, worst_name, n_checked = 0.0, "", 0
    per_tensor: dict[str, float] = {}
    for name, t in tensors.items():
        flat = t.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        num = np.empty(coords.size)
        with no_grad():
            for j, i in enumerate(coords):
                orig = flat[i]
                flat[i] = orig + step
                fp = float(loss_fn().data)
                flat[i] = orig - step
                fm = float(loss_fn().data)
                flat[i] = orig
                num[j] = (fp - fm) / (2.0 * step)
        err = rel_error(analytic[name].reshape(-1)[coords], num)
        n_checked += coords.size
        per_tensor[name] = float(err.max()) if err.size else 0.0
        if err.size and err.max() > worst:
            worst = float(err.max())
            worst_name = f"{name}[{int(coords[err.argmax()])}]"
    for t in tensors.values():
        t.zero_grad()
    return GradCheckReport(worst < tol, worst, n_checked, worst_name, per_tensor)


def grad_check(
    f: Callable[[Tensor], Tensor],
    x: Tensor,
    step: float = 1e-5,
    tol: float = 1e-6,
    max_coords: int | None = None,
) -> GradCheckReport:
    """Check ``d f(x) / dx`` against central finite differences."""
    return check_gradients(lambda: f(x), {"x": x}, step=step, tol=tol, max_coords=max_coords)
