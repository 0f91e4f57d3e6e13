"""Minimal reverse-mode tape over float64 numpy arrays.

Just enough operator coverage for the encoder: broadcast add/mul, batched
matmul, reshape/permute, row gather/scatter, layer norm, tanh-approximate
GELU, softmax, dropout, relative-bias table lookup, and the two loss heads.
Every backward rule is written out by hand; `grad_check` verifies them
against central finite differences.
"""

import math
from typing import Callable, Iterable, Optional

import numpy as np

from . import kernels
from .errors import NonFiniteGradient


class Var:
    """One tape node: a float64 array plus the closure that routes its
    output gradient to its parents."""

    __slots__ = ("value", "grad", "parents", "_backward", "requires_grad")

    def __init__(self, value, parents: tuple = (), backward=None,
                 requires_grad: bool = False):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.parents = parents
        self._backward: Optional[Callable[[np.ndarray], None]] = backward
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self):
        return self.value.shape

    def accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += grad

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scale(other, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def parameter(value) -> Var:
    return Var(np.array(value, dtype=np.float64), requires_grad=True)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    out_parents = (a, b)

    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.value.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g, b.value.shape))

    return Var(a.value + b.value, out_parents, backward)


def mul(a, b) -> Var:
    a, b = as_var(a), as_var(b)

    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g * b.value, a.value.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g * a.value, b.value.shape))

    return Var(a.value * b.value, (a, b), backward)


def scale(a, s: float) -> Var:
    a = as_var(a)

    def backward(g):
        if a.requires_grad:
            a.accumulate(g * s)

    return Var(a.value * s, (a,), backward)


def matmul(a, b) -> Var:
    a, b = as_var(a), as_var(b)

    def backward(g):
        if a.requires_grad:
            ga = g @ np.swapaxes(b.value, -1, -2)
            a.accumulate(_unbroadcast(ga, a.value.shape))
        if b.requires_grad:
            gb = np.swapaxes(a.value, -1, -2) @ g
            b.accumulate(_unbroadcast(gb, b.value.shape))

    return Var(a.value @ b.value, (a, b), backward)


def permute(a, axes: tuple) -> Var:
    a = as_var(a)
    inverse = tuple(np.argsort(axes))

    def backward(g):
        if a.requires_grad:
            a.accumulate(np.transpose(g, inverse))

    return Var(np.transpose(a.value, axes), (a,), backward)


def reshape(a, shape: tuple) -> Var:
    a = as_var(a)
    original = a.value.shape

    def backward(g):
        if a.requires_grad:
            a.accumulate(g.reshape(original))

    return Var(a.value.reshape(shape), (a,), backward)


def take_rows(a, idx: np.ndarray) -> Var:
    a = as_var(a)
    idx = np.asarray(idx, dtype=np.int64)

    def backward(g):
        if a.requires_grad:
            ga = np.zeros_like(a.value)
            np.add.at(ga, idx, g)
            a.accumulate(ga)

    return Var(a.value[idx], (a,), backward)


def scatter_rows(a, idx: np.ndarray, num_rows: int) -> Var:
    """Rows of `a` placed at positions `idx` of a zero (num_rows, ...) array.
    Indices must be distinct."""
    a = as_var(a)
    idx = np.asarray(idx, dtype=np.int64)
    out = np.zeros((num_rows,) + a.value.shape[1:])
    out[idx] = a.value

    def backward(g):
        if a.requires_grad:
            a.accumulate(g[idx])

    return Var(out, (a,), backward)


def softmax_last(a) -> Var:
    a = as_var(a)
    shifted = a.value - a.value.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        if a.requires_grad:
            dot = (g * y).sum(axis=-1, keepdims=True)
            a.accumulate((g - dot) * y)

    return Var(y, (a,), backward)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Var:
    """Normalization over the last axis with learned gain and bias."""
    x, gain, bias = as_var(x), as_var(gain), as_var(bias)
    mu = x.value.mean(axis=-1, keepdims=True)
    var = x.value.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.value - mu) * inv
    y = xhat * gain.value + bias.value
    n = x.value.shape[-1]

    def backward(g):
        if gain.requires_grad:
            gain.accumulate(_unbroadcast(g * xhat, gain.value.shape))
        if bias.requires_grad:
            bias.accumulate(_unbroadcast(g, bias.value.shape))
        if x.requires_grad:
            gx = g * gain.value
            term = gx - gx.mean(axis=-1, keepdims=True) \
                - xhat * (gx * xhat).mean(axis=-1, keepdims=True)
            x.accumulate(term * inv)

    return Var(y, (x, gain, bias), backward)


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(a) -> Var:
    """Tanh-approximate GELU; smooth everywhere, which keeps finite-difference
    gradient checks meaningful."""
    a = as_var(a)
    x = a.value
    u = _GELU_C * (x + 0.044715 * x ** 3)
    t = np.tanh(u)
    y = 0.5 * x * (1.0 + t)

    def backward(g):
        if a.requires_grad:
            du = _GELU_C * (1.0 + 3 * 0.044715 * x ** 2)
            dy = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * du
            a.accumulate(g * dy)

    return Var(y, (a,), backward)


def dropout(a, p: float, rng: np.random.Generator) -> Var:
    """Inverted dropout; call only in training mode."""
    a = as_var(a)
    if p <= 0.0:
        return a
    mask = (rng.random(a.value.shape) >= p) / (1.0 - p)

    def backward(g):
        if a.requires_grad:
            a.accumulate(g * mask)

    return Var(a.value * mask, (a,), backward)


def relative_bias(table_x, table_y, bx: np.ndarray, by: np.ndarray) -> Var:
    """Additive attention bias (heads, T, T) gathered from per-axis tables."""
    table_x, table_y = as_var(table_x), as_var(table_y)
    out = kernels.rel_bias_forward(table_x.value, table_y.value, bx, by)

    n_buckets = table_x.value.shape[1]

    def backward(g):
        gx, gy = kernels.rel_bias_backward(np.ascontiguousarray(g), bx, by, n_buckets)
        if table_x.requires_grad:
            table_x.accumulate(gx)
        if table_y.requires_grad:
            table_y.accumulate(gy)

    return Var(out, (table_x, table_y), backward)


def mean_all(a) -> Var:
    a = as_var(a)
    n = a.value.size

    def backward(g):
        if a.requires_grad:
            a.accumulate(np.full(a.value.shape, float(g) / n))

    return Var(a.value.mean(), (a,), backward)


def squared_error_mean(pred, target: np.ndarray) -> Var:
    """Mean over rows of the squared L2 distance to `target`."""
    pred = as_var(pred)
    target = np.asarray(target, dtype=np.float64)
    diff = pred.value - target
    n = pred.value.shape[0] if pred.value.ndim > 1 else 1
    value = (diff ** 2).sum() / n

    def backward(g):
        if pred.requires_grad:
            pred.accumulate((2.0 * float(g) / n) * diff)

    return Var(value, (pred,), backward)


def cross_entropy_mean(logits, targets: np.ndarray) -> Var:
    """Mean softmax cross entropy of integer `targets` against `logits` rows."""
    logits = as_var(logits)
    targets = np.asarray(targets, dtype=np.int64)
    z = logits.value
    zmax = z.max(axis=-1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=-1))
    n = z.shape[0]
    rows = np.arange(n)
    value = (lse - z[rows, targets]).mean()
    probs = np.exp(z - zmax)
    probs /= probs.sum(axis=-1, keepdims=True)

    def backward(g):
        if logits.requires_grad:
            grad = probs.copy()
            grad[rows, targets] -= 1.0
            logits.accumulate((float(g) / n) * grad)

    return Var(value, (logits,), backward)


def backward(loss: Var) -> None:
    """Reverse-accumulate gradients from a scalar loss through the tape."""
    if loss.value.ndim != 0:
        raise ValueError("backward expects a scalar loss")
    order: list[Var] = []
    seen: set[int] = set()
    stack: list[tuple[Var, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            stack.append((p, False))
    loss.grad = np.ones_like(loss.value)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def grad_check(fn: Callable[[dict], Var], params: dict,
               step: float = 1e-3,
               max_entries: Optional[int] = None,
               rng: Optional[np.random.Generator] = None) -> dict:
    """Compare analytic gradients of `fn(params)` with central differences.

    For each parameter tensor, the finite-difference gradient is taken over
    all coordinates (or a random subset of `max_entries` when set) and the
    error is the norm ratio ||g_a - g_fd|| / max(1e-8, ||g_a|| + ||g_fd||)
    over that coordinate set. The ratio is per group, not per coordinate:
    a single coordinate whose true gradient vanishes (e.g. a pre-activation
    at the gelu derivative zero) has unbounded pointwise truncation error at
    any fixed step, while the group norm keeps the comparison conditioned.
    Returns {tensor name: ratio}; raises NonFiniteGradient when an analytic
    or finite-difference gradient is not finite.
    """
    zero_grads(params.values())
    loss = fn(params)
    backward(loss)
    analytic = {}
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.value)
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient for {name}")
        analytic[name] = g.reshape(-1).copy()
    report = {}
    for name, p in params.items():
        flat = p.value.reshape(-1)
        size = flat.size
        if max_entries is not None and max_entries < size:
            picker = rng or np.random.default_rng(0)
            picks = np.sort(picker.choice(size, size=max_entries, replace=False))
        else:
            picks = np.arange(size)
        fd = np.empty(len(picks))
        for n, k in enumerate(picks):
            orig = flat[k]
            flat[k] = orig + step
            hi = float(fn(params).value)
            flat[k] = orig - step
            lo = float(fn(params).value)
            flat[k] = orig
            fd[n] = (hi - lo) / (2.0 * step)
        if not np.all(np.isfinite(fd)):
            raise NonFiniteGradient(f"non-finite finite difference for {name}")
        ga = analytic[name][picks]
        num = float(np.linalg.norm(ga - fd))
        den = max(1e-8, float(np.linalg.norm(ga)) + float(np.linalg.norm(fd)))
        report[name] = num / den
    return report


def zero_grads(params: Iterable[Var]) -> None:
    for p in params:
        p.grad = None
