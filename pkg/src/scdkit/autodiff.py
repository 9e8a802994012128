"""Minimal dense-matrix reverse-mode autodiff.

Every value is a 2-D matrix. Storage is float32 by default with float64
accumulation in explicit reductions; building the same graph from float64
leaves gives the 64-bit shadow path used by finite-difference checks.
A Tensor records its parents and a vector-Jacobian closure; `backward`
walks the graph once in reverse topological order.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ShapeError, ValidationError

DEFAULT_DTYPE = np.float32

# Norm floor in cosine similarity; prevents division by zero on silent frames.
COSINE_NORM_FLOOR = 1e-8


class Tensor:
    """A matrix node in the computation graph."""

    __slots__ = ("value", "parents", "vjp", "requires_grad")

    def __init__(self, value, requires_grad: bool = False, dtype=None):
        arr = np.asarray(value, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise ShapeError(f"tensors are 2-D matrices, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValidationError("tensor entries must be finite")
        self.value = arr
        self.parents: tuple[Tensor, ...] = ()
        self.vjp: Callable[[np.ndarray], tuple[np.ndarray, ...]] | None = None
        self.requires_grad = requires_grad

    @classmethod
    def _from_op(cls, value: np.ndarray, parents: tuple["Tensor", ...], vjp) -> "Tensor":
        out = cls.__new__(cls)
        out.value = value
        out.parents = parents
        out.vjp = vjp
        out.requires_grad = any(p.requires_grad for p in parents)
        return out

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def item(self) -> float:
        if self.value.size != 1:
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.value[0, 0])

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _reduce_sum(arr: np.ndarray, axis=None, keepdims: bool = False) -> np.ndarray:
    """Sum with float64 accumulation, cast back to the input dtype."""
    return np.sum(arr, axis=axis, keepdims=keepdims, dtype=np.float64).astype(arr.dtype)


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


# ---------------------------------------------------------------------------
# primitives


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims of {a.shape} and {b.shape} differ")
    av, bv = a.value, b.value

    def vjp(g):
        return g @ bv.T, av.T @ g

    return Tensor._from_op(av @ bv, (a, b), vjp)


def transpose(a: Tensor) -> Tensor:
    def vjp(g):
        return (g.T,)

    return Tensor._from_op(a.value.T, (a,), vjp)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; b may be a single row broadcast over a's rows."""
    broadcast_row = b.shape == (1, a.shape[1]) and a.shape[0] != 1
    if not broadcast_row:
        _same_shape(a, b, "add")

    def vjp(g):
        gb = _reduce_sum(g, axis=0, keepdims=True) if broadcast_row else g
        return g, gb

    return Tensor._from_op(a.value + b.value, (a, b), vjp)


def sub(a: Tensor, b: Tensor) -> Tensor:
    broadcast_row = b.shape == (1, a.shape[1]) and a.shape[0] != 1
    if not broadcast_row:
        _same_shape(a, b, "sub")

    def vjp(g):
        gb = _reduce_sum(g, axis=0, keepdims=True) if broadcast_row else g
        return g, -gb

    return Tensor._from_op(a.value - b.value, (a, b), vjp)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "mul")
    av, bv = a.value, b.value

    def vjp(g):
        return g * bv, g * av

    return Tensor._from_op(av * bv, (a, b), vjp)


def scale(a: Tensor, s: float) -> Tensor:
    def vjp(g):
        return (g * s,)

    return Tensor._from_op(a.value * np.asarray(s, dtype=a.value.dtype), (a,), vjp)


def add_scalar(a: Tensor, s: float) -> Tensor:
    def vjp(g):
        return (g,)

    return Tensor._from_op(a.value + np.asarray(s, dtype=a.value.dtype), (a,), vjp)


def absolute(a: Tensor) -> Tensor:
    sign = np.sign(a.value)

    def vjp(g):
        return (g * sign,)

    return Tensor._from_op(np.abs(a.value), (a,), vjp)


def log(a: Tensor) -> Tensor:
    av = a.value

    def vjp(g):
        return (g / av,)

    return Tensor._from_op(np.log(av), (a,), vjp)


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    inside = (a.value > lo) & (a.value < hi)

    def vjp(g):
        return (g * inside,)

    return Tensor._from_op(np.clip(a.value, lo, hi), (a,), vjp)


def sigmoid(a: Tensor) -> Tensor:
    x = a.value
    y = np.empty_like(x)
    pos = x >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    y[~pos] = ex / (1.0 + ex)

    def vjp(g):
        return (g * y * (1.0 - y),)

    return Tensor._from_op(y, (a,), vjp)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.value)

    def vjp(g):
        return (g * (1.0 - y * y),)

    return Tensor._from_op(y, (a,), vjp)


def relu(a: Tensor) -> Tensor:
    pos = a.value > 0

    def vjp(g):
        return (g * pos,)

    return Tensor._from_op(np.where(pos, a.value, 0.0).astype(a.value.dtype), (a,), vjp)


def softmax(a: Tensor, axis: int = 1) -> Tensor:
    shifted = a.value - a.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    denom = np.sum(e, axis=axis, keepdims=True, dtype=np.float64)
    y = (e / denom).astype(a.value.dtype)

    def vjp(g):
        inner = _reduce_sum(g * y, axis=axis, keepdims=True)
        return ((g - inner) * y,)

    return Tensor._from_op(y, (a,), vjp)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Row-wise normalization over features, then affine (gamma, beta are 1xH)."""
    h = x.shape[1]
    if gamma.shape != (1, h) or beta.shape != (1, h):
        raise ShapeError(
            f"layer_norm: gamma {gamma.shape} / beta {beta.shape} must be (1, {h})"
        )
    xv = x.value
    mu = np.mean(xv, axis=1, keepdims=True, dtype=np.float64)
    var = np.mean((xv - mu) ** 2, axis=1, keepdims=True, dtype=np.float64)
    inv = (1.0 / np.sqrt(var + eps)).astype(xv.dtype)
    xhat = ((xv - mu) * inv).astype(xv.dtype)
    out = xhat * gamma.value + beta.value

    def vjp(g):
        dgamma = _reduce_sum(g * xhat, axis=0, keepdims=True)
        dbeta = _reduce_sum(g, axis=0, keepdims=True)
        dxhat = g * gamma.value
        m1 = np.mean(dxhat, axis=1, keepdims=True, dtype=np.float64).astype(xv.dtype)
        m2 = np.mean(dxhat * xhat, axis=1, keepdims=True, dtype=np.float64).astype(xv.dtype)
        dx = (dxhat - m1 - xhat * m2) * inv
        return dx, dgamma, dbeta

    return Tensor._from_op(out, (x, gamma, beta), vjp)


def depthwise_conv1d(x: Tensor, kernel: Tensor, bias: Tensor) -> Tensor:
    """Per-channel 1-D convolution along rows with same padding.

    x is (T, H), kernel (K, H), bias (1, H); output (T, H) where
    out[t, h] = bias[h] + sum_k kernel[k, h] * xpad[t + k, h].
    """
    t_len, h = x.shape
    k_len = kernel.shape[0]
    if kernel.shape[1] != h or bias.shape != (1, h):
        raise ShapeError(
            f"depthwise_conv1d: x {x.shape}, kernel {kernel.shape}, bias {bias.shape}"
        )
    pad_l = (k_len - 1) // 2
    pad_r = k_len - 1 - pad_l
    xp = np.pad(x.value, ((pad_l, pad_r), (0, 0)))
    out = np.tile(bias.value, (t_len, 1))
    kv = kernel.value
    for k in range(k_len):
        out += kv[k] * xp[k : k + t_len]

    def vjp(g):
        db = _reduce_sum(g, axis=0, keepdims=True)
        dk = np.empty_like(kv)
        dxp = np.zeros_like(xp)
        for k in range(k_len):
            dk[k] = _reduce_sum(g * xp[k : k + t_len], axis=0)
            dxp[k : k + t_len] += kv[k] * g
        return dxp[pad_l : pad_l + t_len], dk, db

    return Tensor._from_op(out, (x, kernel, bias), vjp)


def gather_rows(x: Tensor, indices: np.ndarray) -> Tensor:
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeError(f"gather_rows: indices must be 1-D, got {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise ValidationError(f"gather_rows: index out of range for {x.shape[0]} rows")

    def vjp(g):
        dx = np.zeros_like(x.value)
        np.add.at(dx, idx, g)
        return (dx,)

    return Tensor._from_op(x.value[idx], (x,), vjp)


def concat_rows(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"concat_rows: widths {a.shape} and {b.shape} differ")
    split = a.shape[0]

    def vjp(g):
        return g[:split], g[split:]

    return Tensor._from_op(np.concatenate([a.value, b.value], axis=0), (a, b), vjp)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    if not 0 <= start < stop <= a.shape[1]:
        raise ShapeError(f"slice_cols: [{start}, {stop}) invalid for {a.shape}")

    def vjp(g):
        da = np.zeros_like(a.value)
        da[:, start:stop] = g
        return (da,)

    return Tensor._from_op(a.value[:, start:stop].copy(), (a,), vjp)


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    widths = [p.shape[1] for p in parts]
    offsets = np.cumsum([0] + widths)

    def vjp(g):
        return tuple(g[:, offsets[i] : offsets[i + 1]] for i in range(len(parts)))

    return Tensor._from_op(
        np.concatenate([p.value for p in parts], axis=1), tuple(parts), vjp
    )


def sum_all(a: Tensor) -> Tensor:
    out = np.sum(a.value, dtype=np.float64).astype(a.value.dtype).reshape(1, 1)

    def vjp(g):
        return (np.full_like(a.value, g[0, 0]),)

    return Tensor._from_op(out, (a,), vjp)


def mean_all(a: Tensor) -> Tensor:
    return scale(sum_all(a), 1.0 / a.value.size)


def cosine_rowwise(a: Tensor, b: Tensor, floor: float = COSINE_NORM_FLOOR) -> Tensor:
    """Row-by-row cosine similarity, (n, d) x (n, d) -> (n, 1).

    Row norms are floored at `floor`; below the floor the norm is treated
    as constant, so its gradient contribution vanishes.
    """
    _same_shape(a, b, "cosine_rowwise")
    av, bv = a.value, b.value
    ra = np.sqrt(np.sum(av * av, axis=1, keepdims=True, dtype=np.float64))
    rb = np.sqrt(np.sum(bv * bv, axis=1, keepdims=True, dtype=np.float64))
    na = np.maximum(ra, floor)
    nb = np.maximum(rb, floor)
    dot = np.sum(av * bv, axis=1, keepdims=True, dtype=np.float64)
    s = (dot / (na * nb)).astype(av.dtype)

    def vjp(g):
        denom = (na * nb).astype(av.dtype)
        sa = np.where(ra > floor, ra, 1.0)
        sb = np.where(rb > floor, rb, 1.0)
        da = g * (bv / denom - np.where(ra > floor, s * av / (sa * sa), 0.0))
        db = g * (av / denom - np.where(rb > floor, s * bv / (sb * sb), 0.0))
        return da.astype(av.dtype), db.astype(bv.dtype)

    return Tensor._from_op(s, (a, b), vjp)


def fuse_layers(logits: Tensor, layers: np.ndarray) -> Tensor:
    """Softmax-weighted sum of an (L, T, D) stack of constant layers.

    Only the length-L logits row is differentiable; the stack is data.
    """
    stack = np.asarray(layers)
    if stack.ndim != 3:
        raise ShapeError(f"fuse_layers: stack must be (L, T, D), got {stack.shape}")
    n_layers = stack.shape[0]
    if logits.shape != (1, n_layers):
        raise ShapeError(
            f"fuse_layers: logits {logits.shape} must be (1, {n_layers})"
        )
    shifted = logits.value - logits.value.max()
    e = np.exp(shifted)
    w = (e / np.sum(e, dtype=np.float64)).astype(logits.value.dtype)
    out = np.einsum("l,ltd->td", w[0], stack).astype(logits.value.dtype)

    def vjp(g):
        dw = np.einsum("td,ltd->l", g, stack).reshape(1, -1).astype(w.dtype)
        inner = _reduce_sum(dw * w)
        return ((dw - inner) * w,)

    return Tensor._from_op(out, (logits,), vjp)


def attention(q: Tensor, k: Tensor, v: Tensor, num_heads: int = 1) -> Tensor:
    """Scaled dot-product attention, composed from primitives.

    Single head by default; with more heads the feature axis is split
    into equal column blocks attended independently and re-concatenated.
    """
    h = q.shape[1]
    if k.shape != q.shape or v.shape != q.shape:
        raise ShapeError(f"attention: shapes {q.shape}, {k.shape}, {v.shape} differ")
    if num_heads < 1 or h % num_heads != 0:
        raise ShapeError(f"attention: {num_heads} heads do not divide width {h}")
    dh = h // num_heads

    def one_head(qh, kh, vh):
        scores = scale(matmul(qh, transpose(kh)), 1.0 / np.sqrt(dh))
        return matmul(softmax(scores, axis=1), vh)

    if num_heads == 1:
        return one_head(q, k, v)
    heads = [
        one_head(
            slice_cols(q, i * dh, (i + 1) * dh),
            slice_cols(k, i * dh, (i + 1) * dh),
            slice_cols(v, i * dh, (i + 1) * dh),
        )
        for i in range(num_heads)
    ]
    return concat_cols(heads)


# ---------------------------------------------------------------------------
# reverse pass


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
        for p in node.parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    return order


def backward(loss: Tensor, wrt: Sequence[Tensor] | None = None) -> dict[Tensor, np.ndarray]:
    """Gradients of a scalar loss for every requested leaf.

    Returns a dict keyed by Tensor identity; leaves the loss does not
    reach get zero gradients. Accumulation across fan-out is ordered by
    the reverse topological walk, so repeated runs are bit-identical.
    """
    if loss.value.size != 1:
        raise ValidationError(f"backward needs a scalar loss, got shape {loss.shape}")
    order = _topo_order(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
    for node in reversed(order):
        if node.vjp is None:
            continue  # leaf: keep its accumulated gradient for the result
        g = grads.pop(id(node), None)
        if g is None:
            continue
        parent_grads = node.vjp(g)
        for parent, pg in zip(node.parents, parent_grads):
            if not parent.requires_grad:
                continue
            acc = grads.get(id(parent))
            grads[id(parent)] = pg if acc is None else acc + pg
    if wrt is None:
        wrt = [n for n in order if n.vjp is None and n.requires_grad]
    return {t: grads.get(id(t), np.zeros_like(t.value)) for t in wrt}


# ---------------------------------------------------------------------------
# finite-difference oracle

FD_STEP = 1e-3
GRAD_RTOL = 1e-3


def numeric_gradient(f: Callable[..., float], arrays: list[np.ndarray], index: int,
                     step: float = FD_STEP) -> np.ndarray:
    """Central-difference gradient of f w.r.t. arrays[index].

    f consumes plain float64 arrays and returns a float; only forward
    evaluations are used, so the estimate is independent of any vjp.
    """
    base = [np.array(a, dtype=np.float64) for a in arrays]
    target = base[index]
    grad = np.zeros_like(target)
    flat = target.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = f(*base)
        flat[i] = orig - step
        lo = f(*base)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max |analytic - numeric| / max(1, |numeric|) over all coordinates."""
    denom = np.maximum(1.0, np.abs(numeric))
    diff = np.abs(np.asarray(analytic, dtype=np.float64) - numeric)
    return float((diff / denom).max()) if diff.size else 0.0


def check_gradients(build: Callable[..., Tensor], arrays: list[np.ndarray],
                    step: float = FD_STEP) -> float:
    """Worst relative error between backward() and central differences.

    `build` maps leaf Tensors to a scalar Tensor; arrays are evaluated on
    the float64 shadow path.
    """
    leaves = [Tensor(np.array(a, dtype=np.float64), requires_grad=True) for a in arrays]
    grads = backward(build(*leaves), wrt=leaves)

    def value(*vals):
        return build(*[Tensor(v) for v in vals]).item()

    worst = 0.0
    for i, leaf in enumerate(leaves):
        numeric = numeric_gradient(value, arrays, i, step)
        worst = max(worst, relative_error(grads[leaf], numeric))
    return worst
