"""Minimal reverse-mode automatic differentiation over dense numpy arrays.

Each operation records a backward closure on its output; calling
``backward(loss)`` walks the graph in reverse topological order and
accumulates gradients into every tensor marked ``requires_grad``. Tensors up
to rank 3 are supported, float32 for training and float64 for gradient
checking. Dropout draws its masks from a counter-based generator keyed by
(seed, step, call index) so runs are reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import HeadDivisibility, ShapeMismatch

LAYER_NORM_EPS = 1e-5
_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"


def tensor(data, requires_grad=False, dtype=None) -> Tensor:
    arr = np.asarray(data, dtype=dtype) if dtype is not None else np.asarray(data)
    return Tensor(arr, requires_grad=requires_grad)


def _op(data, parents, backward) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, parents=tuple(parents),
                      backward=backward)
    return Tensor(data)


def _acc(t: Tensor, g: np.ndarray) -> None:
    if t.requires_grad:
        t.grad = g if t.grad is None else t.grad + g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def backward(out: Tensor) -> None:
    """Reverse-mode sweep from a scalar output."""
    if out.data.size != 1:
        raise ShapeMismatch((1,), out.data.shape, "backward output")
    topo: list[Tensor] = []
    visited = set()
    stack: list[tuple[Tensor, bool]] = [(out, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    out.grad = np.ones_like(out.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# --- elementwise and structural primitives ----------------------------------

def _check_broadcast(a: Tensor, b: Tensor, what: str):
    try:
        np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        raise ShapeMismatch(a.data.shape, b.data.shape, what) from None


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "add")

    def bwd(g):
        _acc(a, _unbroadcast(g, a.data.shape))
        _acc(b, _unbroadcast(g, b.data.shape))

    return _op(a.data + b.data, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "sub")

    def bwd(g):
        _acc(a, _unbroadcast(g, a.data.shape))
        _acc(b, _unbroadcast(-g, b.data.shape))

    return _op(a.data - b.data, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "mul")

    def bwd(g):
        _acc(a, _unbroadcast(g * b.data, a.data.shape))
        _acc(b, _unbroadcast(g * a.data, b.data.shape))

    return _op(a.data * b.data, (a, b), bwd)


def scale(a: Tensor, c: float) -> Tensor:
    c = a.data.dtype.type(c)

    def bwd(g):
        _acc(a, g * c)

    return _op(a.data * c, (a,), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    ad, bd = a.data, b.data
    ok = (ad.ndim == bd.ndim and ad.ndim in (2, 3)
          and ad.shape[-1] == bd.shape[-2]
          and (ad.ndim == 2 or ad.shape[0] == bd.shape[0]))
    if not ok:
        raise ShapeMismatch(ad.shape, bd.shape, "matmul")

    def bwd(g):
        if a.requires_grad:
            _acc(a, g @ bd.swapaxes(-1, -2))
        if b.requires_grad:
            _acc(b, ad.swapaxes(-1, -2) @ g)

    return _op(ad @ bd, (a, b), bwd)


def reshape(a: Tensor, shape) -> Tensor:
    def bwd(g):
        _acc(a, g.reshape(a.data.shape))

    return _op(a.data.reshape(shape), (a,), bwd)


def transpose(a: Tensor, axes) -> Tensor:
    inverse = tuple(np.argsort(axes))

    def bwd(g):
        _acc(a, g.transpose(inverse))

    return _op(a.data.transpose(axes), (a,), bwd)


def concat(parts, axis: int = 0) -> Tensor:
    sizes = [p.data.shape[axis] for p in parts]
    bounds = np.cumsum(sizes)[:-1]

    def bwd(g):
        for p, piece in zip(parts, np.split(g, bounds, axis=axis)):
            _acc(p, piece)

    return _op(np.concatenate([p.data for p in parts], axis=axis),
               tuple(parts), bwd)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    index = [slice(None)] * a.data.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)

    def bwd(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[index] = g
            _acc(a, full)

    return _op(a.data[index], (a,), bwd)


def sum_all(a: Tensor) -> Tensor:
    def bwd(g):
        _acc(a, np.broadcast_to(g, a.data.shape))

    return _op(a.data.sum(), (a,), bwd)


def mean_all(a: Tensor) -> Tensor:
    inv = a.data.dtype.type(1.0 / a.data.size)

    def bwd(g):
        _acc(a, np.broadcast_to(g * inv, a.data.shape))

    return _op(a.data.mean(dtype=a.data.dtype), (a,), bwd)


# --- neural primitives -------------------------------------------------------

def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return add(matmul(x, w), b)


def gelu(a: Tensor) -> Tensor:
    # tanh approximation; smooth everywhere, which keeps finite-difference
    # gradient checks clean.
    x = a.data
    c = x.dtype.type(_GELU_C)
    k = x.dtype.type(_GELU_A)
    x2 = x * x
    t = np.tanh(c * (x + k * x2 * x))
    one_plus_t = 1.0 + t
    y = 0.5 * x * one_plus_t

    def bwd(g):
        d = 0.5 * one_plus_t + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * k * x2)
        _acc(a, g * d)

    return _op(y, (a,), bwd)


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis; rows sum to 1."""
    x = a.data
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def bwd(g):
        dot = (g * y).sum(axis=-1, keepdims=True)
        _acc(a, y * (g - dot))

    return _op(y, (a,), bwd)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor,
               eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize the last axis to mean 0 / variance 1, then scale and shift."""
    xd = x.data
    d = xd.shape[-1]
    mu = xd.mean(axis=-1, keepdims=True)
    centered = xd - mu
    var = (centered ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    y = xhat * gain.data + bias.data

    def bwd(g):
        if gain.requires_grad:
            _acc(gain, (g * xhat).reshape(-1, d).sum(axis=0))
        if bias.requires_grad:
            _acc(bias, g.reshape(-1, d).sum(axis=0))
        if x.requires_grad:
            dxhat = g * gain.data
            term = dxhat - dxhat.mean(axis=-1, keepdims=True) \
                - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
            _acc(x, inv * term)

    return _op(y, (x, gain, bias), bwd)


class DropoutRng:
    """Counter-based mask source: every call advances a Philox counter keyed
    by (seed, step), so a (seed, step) pair always yields the same masks."""

    def __init__(self, seed: int, step: int = 0):
        self.seed = int(seed)
        self.step = int(step)
        self.counter = 0

    def mask(self, shape, rate: float, dtype) -> np.ndarray:
        # Philox takes a 128-bit key: seed in one word, step/counter packed
        # into the other.
        word = ((self.step & 0xFFFFFFFF) << 32) | (self.counter & 0xFFFFFFFF)
        gen = np.random.Generator(
            np.random.Philox(key=[self.seed & 0xFFFFFFFFFFFFFFFF, word]))
        self.counter += 1
        keep = (gen.random(shape) >= rate).astype(dtype)
        return keep / dtype.type(1.0 - rate)


def dropout(x: Tensor, rate: float, train: bool,
            rng: DropoutRng | None = None) -> Tensor:
    if not train or rate <= 0.0:
        return x
    if rng is None:
        raise ValueError("training-mode dropout needs a DropoutRng")
    m = rng.mask(x.data.shape, rate, x.data.dtype)

    def bwd(g):
        _acc(x, g * m)

    return _op(x.data * m, (x,), bwd)


def multi_head_attention(q_src: Tensor, kv_src: Tensor, params: dict,
                         heads: int, causal: bool = False,
                         dropout_rate: float = 0.0, train: bool = False,
                         rng: DropoutRng | None = None) -> Tensor:
    """Scaled dot-product attention; cross-attention when q_src is not kv_src.

    ``params`` holds wq/bq, wk/bk, wv/bv, wo/bo with model width d; heads
    must divide d.
    """
    d = q_src.data.shape[-1]
    if d % heads != 0:
        raise HeadDivisibility(f"model dim {d} not divisible by {heads} heads")
    dk = d // heads
    tq, tk = q_src.data.shape[0], kv_src.data.shape[0]

    def split_heads(t: Tensor, length: int) -> Tensor:
        return transpose(reshape(t, (length, heads, dk)), (1, 0, 2))

    # 1/sqrt(dk) folded into q: cheaper than scaling the score tensor.
    q = split_heads(scale(linear(q_src, params["wq"], params["bq"]),
                          1.0 / math.sqrt(dk)), tq)
    k = split_heads(linear(kv_src, params["wk"], params["bk"]), tk)
    v = split_heads(linear(kv_src, params["wv"], params["bv"]), tk)

    scores = matmul(q, transpose(k, (0, 2, 1)))
    if causal:
        mask = np.triu(np.full((tq, tk), -1e9, dtype=q_src.data.dtype), k=1)
        scores = add(scores, tensor(mask[None, :, :]))
    attn = softmax(scores)
    attn = dropout(attn, dropout_rate, train, rng)
    mixed = matmul(attn, v)                                  # (H, Tq, dk)
    merged = reshape(transpose(mixed, (1, 0, 2)), (tq, d))
    return linear(merged, params["wo"], params["bo"])


# --- parameters and optimization ---------------------------------------------

class ParameterSet:
    """Named trainable tensors with reproducible seeded initialization."""

    def __init__(self, seed: int, dtype=np.float32):
        self.seed = int(seed)
        self.dtype = np.dtype(dtype)
        self._rng = np.random.Generator(np.random.PCG64(self.seed))
        self.params: dict[str, Tensor] = {}

    def new(self, name: str, shape, init: str = "xavier") -> Tensor:
        if name in self.params:
            raise ValueError(f"duplicate parameter name {name!r}")
        shape = tuple(shape)
        if init == "zeros":
            data = np.zeros(shape, dtype=self.dtype)
        elif init == "ones":
            data = np.ones(shape, dtype=self.dtype)
        elif init == "xavier":
            fan_in = shape[0] if len(shape) > 1 else shape[0]
            fan_out = shape[-1]
            std = math.sqrt(2.0 / (fan_in + fan_out))
            data = (self._rng.standard_normal(shape) * std).astype(self.dtype)
        elif init == "small":
            data = (self._rng.standard_normal(shape) * 0.02).astype(self.dtype)
        else:
            raise ValueError(f"unknown init {init!r}")
        t = Tensor(data, requires_grad=True)
        self.params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def items(self):
        return self.params.items()

    def names(self):
        return list(self.params)

    def n_parameters(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def zero_grads(self) -> None:
        for p in self.params.values():
            p.grad = None

    def astype(self, dtype) -> "ParameterSet":
        clone = ParameterSet(self.seed, dtype=dtype)
        for name, p in self.params.items():
            clone.params[name] = Tensor(p.data.astype(dtype), requires_grad=True)
        return clone


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(pset: ParameterSet, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.98,
              eps: float = 1e-9) -> AdamState:
    """One standard Adam update with bias correction; grads of None are 0."""
    state.t += 1
    t = state.t
    for name, p in pset.items():
        g = p.grad
        if g is None:
            g = np.zeros_like(p.data)
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        state.m[name] = m
        state.v[name] = v
        mhat = m / (1.0 - beta1 ** t)
        vhat = v / (1.0 - beta2 ** t)
        update = lr * mhat / (np.sqrt(vhat) + eps)
        p.data = (p.data - update).astype(p.data.dtype)
    return state


# --- gradient checking -------------------------------------------------------

@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: str
    worst_index: tuple
    n_checked: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def grad_check(f, pset: ParameterSet, tolerance: float = 1e-3,
               h: float = 1e-5) -> GradCheckReport:
    """Compare reverse-mode gradients against central finite differences.

    Relative error uses max(|ad|, |fd|, 1e-6) as denominator (absolute floor
    for near-zero gradients). Run in float64 for meaningful results.
    """
    pset.zero_grads()
    out = f()
    backward(out)
    analytic = {name: (p.grad.copy() if p.grad is not None
                       else np.zeros_like(p.data))
                for name, p in pset.items()}

    worst = (0.0, "", ())
    checked = 0
    for name, p in pset.items():
        flat = p.data.reshape(-1)
        a_flat = analytic[name].reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            f_plus = float(f().data)
            flat[i] = original - h
            f_minus = float(f().data)
            flat[i] = original
            fd = (f_plus - f_minus) / (2.0 * h)
            ad = float(a_flat[i])
            err = abs(ad - fd) / max(abs(ad), abs(fd), 1e-6)
            checked += 1
            if err > worst[0]:
                worst = (err, name, np.unravel_index(i, p.data.shape))
    return GradCheckReport(max_rel_error=worst[0], worst_param=worst[1],
                           worst_index=worst[2], n_checked=checked,
                           tolerance=tolerance)
