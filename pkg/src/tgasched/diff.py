"""A small reverse-mode autodiff kernel over numpy arrays.

Operations run eagerly.  While a :class:`Tape` is active, every operation whose
inputs require gradients appends a record ``(output, inputs, backward_fn)``.
Records are appended in execution order, which is a topological order of the
computation, so :meth:`Tape.backward` only has to walk them in reverse.

Only the primitives needed by the graph-attention policy are provided: affine
maps, ReLU, multiplicative-interaction (bilinear) layers, gathers, segment
reductions and the elementwise pieces of the clipped policy objective.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass

import numpy as np

_LOCAL = threading.local()


def _active() -> list:
    if not hasattr(_LOCAL, "stack"):
        _LOCAL.stack = []
    return _LOCAL.stack


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "name")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        self.value = np.asarray(value, dtype=float)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


class Tape:
    """Records differentiable operations executed inside its ``with`` block."""

    def __init__(self):
        self.records = []

    def __enter__(self):
        _active().append(self)
        return self

    def __exit__(self, *exc):
        _active().remove(self)

    def backward(self, root: Tensor):
        """Accumulate d(root)/d(leaf) into ``.grad`` of every leaf that requires it."""
        if root.value.size != 1:
            raise ValueError(f"backward needs a scalar root, got shape {root.shape}")
        root.grad = np.ones_like(root.value)
        for out, inputs, fn in reversed(self.records):
            if out.grad is None:
                continue
            grads = fn(out.grad)
            for t, g in zip(inputs, grads):
                if g is None or not t.requires_grad:
                    continue
                t.grad = g if t.grad is None else t.grad + g


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(value, inputs, backward) -> Tensor:
    req = any(t.requires_grad for t in inputs)
    out = Tensor(value, requires_grad=req)
    if req:
        stack = _active()
        if stack:
            stack[-1].records.append((out, inputs, backward))
    return out


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(ax, keepdims=True)
    return g


# ---------------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(a.value + b.value, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(a.value - b.value, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(a.value * b.value, (a, b),
                   lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)))


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    return _result(a.value * c, (a,), lambda g: (g * c,))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.value > 0
    return _result(a.value * mask, (a,), lambda g: (g * mask,))


def exp(a) -> Tensor:
    a = as_tensor(a)
    v = np.exp(a.value)
    return _result(v, (a,), lambda g: (g * v,))


def log(a) -> Tensor:
    a = as_tensor(a)
    return _result(np.log(a.value), (a,), lambda g: (g / a.value,))


def clip(a, lo: float, hi: float) -> Tensor:
    a = as_tensor(a)
    inside = (a.value >= lo) & (a.value <= hi)
    return _result(np.clip(a.value, lo, hi), (a,), lambda g: (g * inside,))


def minimum(a, b) -> Tensor:
    """Elementwise min; on ties the gradient goes to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    pick_a = a.value <= b.value
    return _result(np.where(pick_a, a.value, b.value), (a, b),
                   lambda g: (_unbroadcast(g * pick_a, a.shape), _unbroadcast(g * ~pick_a, b.shape)))


def total(a) -> Tensor:
    a = as_tensor(a)
    return _result(a.value.sum(), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))


def mean(a) -> Tensor:
    a = as_tensor(a)
    n = a.value.size
    return _result(a.value.mean(), (a,), lambda g: (np.full(a.shape, float(g) / n),))


# ---------------------------------------------------------------- structural

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(a.value @ b.value, (a, b), lambda g: (g @ b.value.T, a.value.T @ g))


def linear(x, w, b) -> Tensor:
    """``x @ w.T + b`` for ``x`` (n, in), ``w`` (out, in), ``b`` (out,)."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    if x.shape[-1] != w.shape[1]:
        raise ValueError(f"linear: input dim {x.shape[-1]} does not match weight {w.shape}")
    return _result(x.value @ w.value.T + b.value, (x, w, b),
                   lambda g: (g @ w.value, g.T @ x.value, g.sum(0)))


def concat(parts, axis: int = -1) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    sizes = [p.shape[axis] for p in parts]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        return tuple(np.take(g, np.arange(lo, hi), axis=axis) for lo, hi in zip(bounds[:-1], bounds[1:]))

    return _result(np.concatenate([p.value for p in parts], axis=axis), tuple(parts), backward)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return _result(a.value.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def take(a, index) -> Tensor:
    """Rows ``a[index]``; repeated indices accumulate in the backward pass."""
    a = as_tensor(a)
    index = np.asarray(index, dtype=int)

    def backward(g):
        out = np.zeros(a.shape)
        np.add.at(out, index, g)
        return (out,)

    return _result(a.value[index], (a,), backward)


def segment_sum(a, segment, num_segments: int) -> Tensor:
    a = as_tensor(a)
    segment = np.asarray(segment, dtype=int)
    out = np.zeros((num_segments,) + a.shape[1:])
    np.add.at(out, segment, a.value)
    return _result(out, (a,), lambda g: (g[segment],))


def _segment_max(v, segment, num_segments):
    mx = np.full(num_segments, -np.inf)
    np.maximum.at(mx, segment, v)
    return mx


def segment_softmax(z, segment, num_segments: int) -> Tensor:
    """Softmax of a 1-d tensor within each segment."""
    z = as_tensor(z)
    segment = np.asarray(segment, dtype=int)
    shifted = z.value - _segment_max(z.value, segment, num_segments)[segment]
    e = np.exp(shifted)
    denom = np.bincount(segment, weights=e, minlength=num_segments)
    p = e / denom[segment]

    def backward(g):
        inner = np.bincount(segment, weights=p * g, minlength=num_segments)
        return (p * (g - inner[segment]),)

    return _result(p, (z,), backward)


def segment_log_softmax(z, segment, num_segments: int) -> Tensor:
    z = as_tensor(z)
    segment = np.asarray(segment, dtype=int)
    shifted = z.value - _segment_max(z.value, segment, num_segments)[segment]
    lse = np.log(np.bincount(segment, weights=np.exp(shifted), minlength=num_segments))
    out = shifted - lse[segment]
    p = np.exp(out)

    def backward(g):
        gs = np.bincount(segment, weights=g, minlength=num_segments)
        return (g - p * gs[segment],)

    return _result(out, (z,), backward)


def softmax(logits) -> np.ndarray:
    """Numerically stable softmax of a non-empty 1-d array."""
    v = np.asarray(logits, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("softmax needs a non-empty 1-d vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("softmax needs finite logits")
    e = np.exp(v - v.max())
    return e / e.sum()


# ---------------------------------------------------------------- layers

def mi(x, ctx, index, w, a, b_ctx, bias) -> Tensor:
    """Multiplicative-interaction layer.

    ``y[r, k] = sum_ij w[k, i, j] x[r, i] c[r, j] + sum_i a[k, i] x[r, i] + sum_j b_ctx[k, j] c[r, j] + bias[k]``
    with ``c[r] = ctx[index[r]]``.  Rows sharing a context share the generated
    weight matrix ``w . c + a``, so a handful of distinct contexts (node types)
    costs one small matmul per context.
    """
    x, ctx, w, a, b_ctx, bias = map(as_tensor, (x, ctx, w, a, b_ctx, bias))
    index = np.asarray(index, dtype=int)
    out_dim, in_dim, c_dim = w.shape
    if x.shape[1] != in_dim or ctx.shape[1] != c_dim:
        raise ValueError(f"mi: input {x.shape}/context {ctx.shape} do not match weight {w.shape}")
    W, X, C = w.value, x.value, ctx.value
    cb = C @ b_ctx.value.T + bias.value                 # (T, out)
    y = cb[index].copy() if len(index) else np.zeros((0, out_dim))
    groups = [(t, np.flatnonzero(index == t)) for t in np.unique(index)]
    gen = {t: np.tensordot(W, C[t], axes=([2], [0])) + a.value for t, _ in groups}  # (out, in)
    for t, rows in groups:
        y[rows] += X[rows] @ gen[t].T

    def backward(g):
        gx = np.zeros_like(X)
        g_gen = np.zeros((len(C), out_dim, in_dim))
        for t, rows in groups:
            gx[rows] = g[rows] @ gen[t]
            g_gen[t] = g[rows].T @ X[rows]
        g_cb = np.zeros((len(C), out_dim))
        np.add.at(g_cb, index, g)
        gw = np.einsum("tki,tj->kij", g_gen, C)
        ga = g_gen.sum(0)
        gctx = np.einsum("tki,kij->tj", g_gen, W) + g_cb @ b_ctx.value
        gb = g_cb.T @ C
        return gx, gctx, gw, ga, gb, g_cb.sum(0)

    return _result(y, (x, ctx, w, a, b_ctx, bias), backward)


@dataclass(frozen=True)
class MlpSpec:
    in_dim: int
    hidden: tuple
    out_dim: int

    @property
    def dims(self) -> list:
        return [self.in_dim, *self.hidden, self.out_dim]


def mlp(params, prefix: str, x, spec: MlpSpec) -> Tensor:
    """ReLU hidden layers, identity output."""
    x = as_tensor(x)
    if x.shape[-1] != spec.in_dim:
        raise ValueError(f"{prefix}: expected input dim {spec.in_dim}, got {x.shape[-1]}")
    n = len(spec.dims) - 1
    for k in range(n):
        x = linear(x, params[f"{prefix}.{k}.w"], params[f"{prefix}.{k}.b"])
        if k < n - 1:
            x = relu(x)
    return x


def mlp_forward(params, x, spec: MlpSpec, prefix: str = "mlp") -> np.ndarray:
    """Plain-array MLP evaluation for a single vector or a batch of rows."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    out = mlp(params, prefix, x[None, :] if single else x, spec).value
    return out[0] if single else out


def mi_forward(params, x, z, prefix: str = "mi") -> np.ndarray:
    """Plain-array MI layer for one input vector ``x`` and context ``z``."""
    x = np.asarray(x, dtype=float)[None, :]
    z = np.asarray(z, dtype=float)[None, :]
    return mi(x, z, [0], params[f"{prefix}.w"], params[f"{prefix}.a"], params[f"{prefix}.bc"],
              params[f"{prefix}.b"]).value[0]


# ---------------------------------------------------------------- parameters

class ParamStore:
    """Named float64 parameter arrays plus matching gradient accumulators."""

    FORMAT_VERSION = 1

    def __init__(self, values: dict | None = None):
        self.values = {k: np.array(v, dtype=float) for k, v in (values or {}).items()}
        self.grads = {k: np.zeros_like(v) for k, v in self.values.items()}

    def __getitem__(self, name):
        return self.values[name]

    def __contains__(self, name):
        return name in self.values

    def __len__(self):
        return len(self.values)

    def names(self):
        return list(self.values)

    def add(self, name: str, value):
        if name in self.values:
            raise KeyError(f"duplicate parameter {name}")
        self.values[name] = np.array(value, dtype=float)
        self.grads[name] = np.zeros_like(self.values[name])

    def size(self) -> int:
        return sum(v.size for v in self.values.values())

    def copy(self) -> "ParamStore":
        return ParamStore({k: v.copy() for k, v in self.values.items()})

    def tensors(self) -> dict:
        """Leaf tensors that share storage with the parameters and track gradients."""
        return {k: Tensor(v, requires_grad=True, name=k) for k, v in self.values.items()}

    def constants(self) -> dict:
        return {k: Tensor(v, name=k) for k, v in self.values.items()}

    def accumulate(self, leaves: dict):
        for k, t in leaves.items():
            if t.grad is not None:
                self.grads[k] += t.grad

    def zero_grad(self):
        for g in self.grads.values():
            g.fill(0.0)

    def grad_norm(self) -> float:
        return math.sqrt(sum(float((g * g).sum()) for g in self.grads.values()))

    def clip_grad_norm(self, max_norm: float) -> float:
        norm = self.grad_norm()
        if norm > max_norm > 0:
            for g in self.grads.values():
                g *= max_norm / norm
        return norm

    def polyak_(self, other: "ParamStore", beta: float):
        """In place ``self <- beta * self + (1 - beta) * other``."""
        for k, v in self.values.items():
            v *= beta
            v += (1.0 - beta) * other.values[k]

    def save(self, path, meta: dict | None = None):
        arrays = {f"p/{k}": v for k, v in self.values.items()}
        header = {"format": "tgasched-params", "version": self.FORMAT_VERSION, "meta": meta or {}}
        with open(path, "wb") as fh:
            np.savez(fh, __header__=np.array(json.dumps(header, sort_keys=True)), **arrays)

    @classmethod
    def load(cls, path) -> tuple:
        """Return ``(store, meta)`` from a file written by :meth:`save`."""
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data["__header__"]))
            if header.get("format") != "tgasched-params" or header.get("version") != cls.FORMAT_VERSION:
                raise ValueError(f"unsupported checkpoint header {header}")
            values = {k[2:]: data[k] for k in data.files if k.startswith("p/")}
        return cls(values), header["meta"]


def init_mlp(store: ParamStore, prefix: str, spec: MlpSpec, rng: np.random.Generator):
    """He-uniform weights so activations keep their scale through ReLU layers.

    Biases are small but nonzero: with zero biases a dead ReLU row feeds exact
    zeros forward and the next pre-activation sits exactly on a kink.
    """
    dims = spec.dims
    for k, (i, o) in enumerate(zip(dims[:-1], dims[1:])):
        bound = math.sqrt(6.0 / i)
        store.add(f"{prefix}.{k}.w", rng.uniform(-bound, bound, (o, i)))
        store.add(f"{prefix}.{k}.b", rng.uniform(-1, 1, o) * math.sqrt(1.0 / i))


def init_mi(store: ParamStore, prefix: str, in_dim: int, ctx_dim: int, out_dim: int, rng: np.random.Generator):
    store.add(f"{prefix}.w", rng.uniform(-1, 1, (out_dim, in_dim, ctx_dim)) * math.sqrt(1.0 / (in_dim * ctx_dim)))
    store.add(f"{prefix}.a", rng.uniform(-1, 1, (out_dim, in_dim)) * math.sqrt(1.0 / in_dim))
    store.add(f"{prefix}.bc", rng.uniform(-1, 1, (out_dim, ctx_dim)) * math.sqrt(1.0 / ctx_dim))
    store.add(f"{prefix}.b", rng.uniform(-1, 1, out_dim) * math.sqrt(1.0 / in_dim))


# ---------------------------------------------------------------- optimisation

class NonFiniteGradientError(FloatingPointError):
    pass


def _check_finite(params: ParamStore):
    bad = [k for k, g in params.grads.items() if not np.all(np.isfinite(g))]
    if bad:
        raise NonFiniteGradientError(f"non-finite gradient in {', '.join(bad[:5])}")


def sgd_step(params: ParamStore, lr: float):
    """Gradient *ascent*: the training objective is maximised."""
    _check_finite(params)
    for k, v in params.values.items():
        v += lr * params.grads[k]
    params.zero_grad()


class Adam:
    """Adam ascent on a :class:`ParamStore` (moments keyed by parameter name)."""

    def __init__(self, b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8):
        self.b1, self.b2, self.eps = b1, b2, eps
        self.t = 0
        self.m: dict = {}
        self.v: dict = {}

    def step(self, params: ParamStore, lr: float):
        _check_finite(params)
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k, val in params.values.items():
            g = params.grads[k]
            m = self.m.setdefault(k, np.zeros_like(g))
            v = self.v.setdefault(k, np.zeros_like(g))
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            val += lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        params.zero_grad()


def cosine_warm_restarts(step: int, lr_max: float = 1e-3, lr_min: float = 1e-6, period: int = 30) -> float:
    phase = (step % period) / period
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math.cos(math.pi * phase))
