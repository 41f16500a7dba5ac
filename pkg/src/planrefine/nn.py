"""Reverse-mode automatic differentiation on float64 numpy arrays.

Each operation returns a :class:`Tensor` remembering its parents and a closure
that maps the output gradient to parent gradients.  ``Tensor.backward`` runs
the closures in reverse topological order.  Graphs are rebuilt on every
forward pass, so plan graphs of any size can be fed through the same layers.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    def __init__(self, op: str, a, b):
        super().__init__(f"{op}: incompatible shapes {tuple(a)} and {tuple(b)}")
        self.op, self.shapes = op, (tuple(a), tuple(b))


class NonFiniteError(FloatingPointError):
    pass


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward", "requires_grad")

    def __init__(self, data, parents: tuple = (), backward=None, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("non-finite value produced" + (" by an operation" if parents else ""))
        self.data = arr
        self.grad = None
        self._parents = parents
        self._backward = backward
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.shape})"

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() on a tensor of shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def backward(self) -> None:
        if self.data.size != 1:
            raise ValueError("backward() needs a scalar output")
        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._backward(node.grad)):
                if g is None or not parent.requires_grad:
                    continue
                parent.grad = g if parent.grad is None else parent.grad + g

    # -- arithmetic ------------------------------------------------------
    def _binary(self, other, op, fwd, bwd):
        other = other if isinstance(other, Tensor) else Tensor(other)
        try:
            out = fwd(self.data, other.data)
        except ValueError:
            raise ShapeError(op, self.shape, other.shape) from None
        a_shape, b_shape = self.shape, other.shape

        def backward(g):
            ga, gb = bwd(g, self.data, other.data, out)
            return _unbroadcast(ga, a_shape), _unbroadcast(gb, b_shape)
        return Tensor(out, (self, other), backward)

    def __add__(self, other):
        return self._binary(other, "add", np.add, lambda g, a, b, o: (g, g))

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, "sub", np.subtract, lambda g, a, b, o: (g, -g))

    def __rsub__(self, other):
        return Tensor(other) - self

    def __mul__(self, other):
        return self._binary(other, "mul", np.multiply, lambda g, a, b, o: (g * b, g * a))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, "div", np.divide, lambda g, a, b, o: (g / b, -g * a / (b * b)))

    def __neg__(self):
        return Tensor(-self.data, (self,), lambda g: (-g,))

    def __matmul__(self, other):
        if self.data.ndim != 2 or other.data.ndim != 2 or self.shape[1] != other.shape[0]:
            raise ShapeError("matmul", self.shape, other.shape)
        a, b = self.data, other.data
        return Tensor(a @ b, (self, other), lambda g: (g @ b.T, a.T @ g))

    def __getitem__(self, idx):
        shape = self.shape

        def backward(g):
            full = np.zeros(shape)
            np.add.at(full, idx, g)
            return (full,)
        return Tensor(self.data[idx], (self,), backward)

    # -- elementwise -----------------------------------------------------
    def tanh(self):
        y = np.tanh(self.data)
        return Tensor(y, (self,), lambda g: (g * (1.0 - y * y),))

    def relu(self):
        mask = self.data > 0
        return Tensor(self.data * mask, (self,), lambda g: (g * mask,))

    def sigmoid(self):
        y = 0.5 * (1.0 + np.tanh(0.5 * self.data))
        return Tensor(y, (self,), lambda g: (g * y * (1.0 - y),))

    def exp(self):
        y = np.exp(self.data)
        return Tensor(y, (self,), lambda g: (g * y,))

    def log(self):
        x = self.data
        with np.errstate(invalid="ignore", divide="ignore"):
            y = np.log(x)
        return Tensor(y, (self,), lambda g: (g / x,))

    def square(self):
        x = self.data
        return Tensor(x * x, (self,), lambda g: (2.0 * g * x,))

    def clip(self, lo: float, hi: float):
        """Clamp values; the gradient is zero where the clamp is active."""
        x = self.data
        mask = (x >= lo) & (x <= hi)
        return Tensor(np.clip(x, lo, hi), (self,), lambda g: (g * mask,))

    # -- reductions ------------------------------------------------------
    def sum(self, axis=None, keepdims=False):
        shape = self.shape

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)
        return Tensor(self.data.sum(axis=axis, keepdims=keepdims), (self,), backward)

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else self.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def reshape(self, *shape):
        old = self.shape
        return Tensor(self.data.reshape(*shape), (self,), lambda g: (g.reshape(old),))


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    datas = [t.data for t in tensors]
    try:
        out = np.concatenate(datas, axis=axis)
    except ValueError:
        raise ShapeError("concat", datas[0].shape, datas[-1].shape) from None
    splits = np.cumsum([d.shape[axis] for d in datas])[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))
    return Tensor(out, tuple(tensors), backward)


def minimum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise minimum; ties send the gradient to ``a``."""
    if a.shape != b.shape:
        raise ShapeError("minimum", a.shape, b.shape)
    pick_a = a.data <= b.data
    return Tensor(np.where(pick_a, a.data, b.data), (a, b), lambda g: (g * pick_a, g * ~pick_a))


def _segment_reduce(op: str, x: Tensor, segment_ids: np.ndarray, n_segments: int, mean: bool) -> Tensor:
    segment_ids = np.asarray(segment_ids, dtype=int)
    if x.data.ndim != 2 or segment_ids.shape[0] != x.shape[0]:
        raise ShapeError(op, x.shape, segment_ids.shape)
    scale = np.ones(n_segments)
    if mean:
        scale = 1.0 / np.maximum(np.bincount(segment_ids, minlength=n_segments), 1.0)
    out = np.zeros((n_segments, x.shape[1]))
    np.add.at(out, segment_ids, x.data)
    out *= scale[:, None]

    def backward(g):
        return ((g * scale[:, None])[segment_ids],)
    return Tensor(out, (x,), backward)


def segment_sum(x: Tensor, segment_ids: np.ndarray, n_segments: int) -> Tensor:
    """Sum of the rows of ``x`` grouped by ``segment_ids``."""
    return _segment_reduce("segment_sum", x, segment_ids, n_segments, mean=False)


def segment_mean(x: Tensor, segment_ids: np.ndarray, n_segments: int) -> Tensor:
    """Mean of the rows of ``x`` grouped by ``segment_ids``; empty groups give zeros."""
    return _segment_reduce("segment_mean", x, segment_ids, n_segments, mean=True)


# ---------------------------------------------------------------------------
# Parameters, layers, initialization


def orthogonal_init(shape: tuple[int, int], gain: float = 1.0, rng: np.random.Generator | None = None) -> np.ndarray:
    """Matrix with orthonormal rows (wide) or columns (tall), scaled by ``gain``."""
    if len(shape) != 2:
        raise ValueError("orthogonal_init needs a 2-D shape")
    rng = np.random.default_rng() if rng is None else rng
    rows, cols = shape
    flat = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(flat)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q.reshape(rows, cols)


class ParamStore:
    """Named parameters plus Adam moments."""

    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self.params:
            raise KeyError(f"duplicate parameter name {name!r}")
        p = Tensor(np.array(value, dtype=float), requires_grad=True)
        self.params[name] = p
        self.m[name] = np.zeros_like(p.data)
        self.v[name] = np.zeros_like(p.data)
        return p

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def names(self) -> list[str]:
        return list(self.params)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        return {n: (p.grad if p.grad is not None else np.zeros_like(p.data)) for n, p in self.params.items()}

    def snapshot(self) -> dict[str, np.ndarray]:
        return {n: p.data.copy() for n, p in self.params.items()}

    def load(self, values: dict[str, np.ndarray]) -> None:
        for n, arr in values.items():
            if n not in self.params:
                raise KeyError(f"unknown parameter {n!r}")
            if self.params[n].shape != arr.shape:
                raise ShapeError(f"load {n}", self.params[n].shape, arr.shape)
            self.params[n].data = np.array(arr, dtype=float)


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))


def clip_grad_norm(grads: dict[str, np.ndarray], max_norm: float) -> tuple[dict[str, np.ndarray], float]:
    norm = global_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        grads = {n: g * scale for n, g in grads.items()}
    return grads, norm


def adam_step(store: ParamStore, grads: dict[str, np.ndarray], lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    store.t += 1
    c1 = 1.0 - beta1 ** store.t
    c2 = 1.0 - beta2 ** store.t
    for name, g in grads.items():
        m = store.m[name] = beta1 * store.m[name] + (1.0 - beta1) * g
        v = store.v[name] = beta2 * store.v[name] + (1.0 - beta2) * g * g
        store.params[name].data = store.params[name].data - lr * (m / c1) / (np.sqrt(v / c2) + eps)


class Linear:
    """``y = x W + b`` with ``W`` of shape (in, out)."""

    def __init__(self, store: ParamStore, name: str, n_in: int, n_out: int,
                 rng: np.random.Generator, gain: float = math.sqrt(2.0)):
        self.n_in, self.n_out = n_in, n_out
        self.W = store.add(f"{name}.W", orthogonal_init((n_in, n_out), gain, rng))
        self.b = store.add(f"{name}.b", np.zeros((1, n_out)))

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.n_in:
            raise ShapeError("linear", x.shape, self.W.shape)
        return x @ self.W + self.b


# ---------------------------------------------------------------------------
# Weights file: text header, then raw little-endian float64 blocks

WEIGHTS_MAGIC = b"PLANREFINE-WEIGHTS"
WEIGHTS_VERSION = 1


def save_weights(params: dict[str, np.ndarray], path: str | Path, meta: dict[str, str] | None = None) -> None:
    header = [f"{WEIGHTS_MAGIC.decode()} {WEIGHTS_VERSION}"]
    for key, value in (meta or {}).items():
        header.append(f"meta {key} {value}")
    for name, arr in params.items():
        header.append(f"param {name} " + "x".join(str(d) for d in arr.shape))
    blob = "\n".join(header).encode() + b"\n\n"
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for arr in params.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_weights(path: str | Path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    raw = Path(path).read_bytes()
    (n,) = struct.unpack("<Q", raw[:8])
    lines = raw[8:8 + n].decode().strip().splitlines()
    magic, version = lines[0].split()
    if magic.encode() != WEIGHTS_MAGIC:
        raise ValueError(f"{path}: not a weights file")
    if int(version) > WEIGHTS_VERSION:
        raise ValueError(f"{path}: weights version {version} is newer than supported {WEIGHTS_VERSION}")
    offset = 8 + n
    params, meta = {}, {}
    for line in lines[1:]:
        kind, name, rest = (line.split(" ", 2) + [""])[:3]
        if kind == "meta":
            meta[name] = rest
            continue
        shape = tuple(int(d) for d in rest.split("x")) if rest else ()
        size = int(np.prod(shape)) if shape else 1
        params[name] = np.frombuffer(raw, dtype="<f8", count=size, offset=offset).reshape(shape).copy()
        offset += 8 * size
    return params, meta


def parameters_count(params: Iterable[Tensor]) -> int:
    return sum(p.data.size for p in params)
