"""Minimal dense neural machinery: array autodiff, MLPs, Adam.

A Tensor wraps one numpy array and remembers how it was produced; calling
``backward`` on a scalar loss walks the tape in reverse and accumulates
gradients into every parameter.  The primitive set is exactly what the
surrogate engines need: affine layers, ReLU, concatenation, gather/scatter
by receiver, slicing, reshapes, and the loss reductions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GraphError, NonFiniteGradient, ShapeError


class Tensor:
    __slots__ = ("data", "grad", "_backward", "_parents", "requires_grad")

    def __init__(self, data, parents=(), backward=None, requires_grad=False):
        self.data = np.asarray(data)
        self.grad = None
        self._parents = parents
        self._backward = backward
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self):
        return self.data.shape

    def backward(self) -> None:
        """Reverse-mode sweep from a scalar; accumulates into .grad."""
        if self.data.size != 1:
            raise GraphError("backward() expects a scalar loss")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if id(node) in seen:
                continue
            if expanded:
                seen.add(id(node))
                order.append(node)
            else:
                stack.append((node, True))
                for p in node._parents:
                    if id(p) not in seen and p.requires_grad:
                        stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def zero_grad(self) -> None:
        self.grad = None


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    if isinstance(x, np.ndarray):
        return Tensor(x)
    raise GraphError(f"unsupported operand type {type(x).__name__}")


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g)
    else:
        t.grad += g


def matmul(a: Tensor, w: Tensor) -> Tensor:
    a, w = _as_tensor(a), _as_tensor(w)
    if a.data.shape[-1] != w.data.shape[0]:
        raise ShapeError(f"matmul {a.data.shape} @ {w.data.shape}")
    out = Tensor(a.data @ w.data, (a, w))

    def backward(g):
        _accum(a, g @ w.data.T)
        _accum(w, a.data.T @ g)

    out._backward = backward
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise add; b may broadcast as a bias row."""
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data + b.data, (a, b))

    def backward(g):
        _accum(a, g if a.data.shape == g.shape else _unbroadcast(g, a.data.shape))
        _accum(b, g if b.data.shape == g.shape else _unbroadcast(g, b.data.shape))

    out._backward = backward
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data - b.data, (a, b))

    def backward(g):
        _accum(a, g if a.data.shape == g.shape else _unbroadcast(g, a.data.shape))
        gb = -g
        _accum(b, gb if b.data.shape == g.shape else _unbroadcast(gb, b.data.shape))

    out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def mul_const(a: Tensor, c: float) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(a.data * c, (a,))
    out._backward = lambda g: _accum(a, g * c)
    return out


def mul(a: Tensor, b: np.ndarray) -> Tensor:
    """Elementwise product with a constant array (no grad through b)."""
    a = _as_tensor(a)
    out = Tensor(a.data * b, (a,))
    out._backward = lambda g: _accum(a, g * b)
    return out


def relu(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    mask = a.data > 0
    out = Tensor(np.where(mask, a.data, 0.0), (a,))
    out._backward = lambda g: _accum(a, g * mask)
    return out


def concat(tensors: list[Tensor], axis: int = 1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors))
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _accum(t, g[tuple(idx)])

    out._backward = backward
    return out


def gather_rows(a: Tensor, idx: np.ndarray) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(a.data[idx], (a,))

    def backward(g):
        if a.requires_grad:
            buf = np.zeros_like(a.data)
            np.add.at(buf, idx, g)
            _accum(a, buf)

    out._backward = backward
    return out


def segment_sum_array(x: np.ndarray, receivers: np.ndarray, num_segments: int) -> np.ndarray:
    """Row sums into receiver buckets; sorted receivers take the fast path.

    float64 input uses compensated (Neumaier) accumulation, which makes the
    bucket sums independent of the order pairs were enumerated in, so
    relabeling a graph cannot perturb inference results.
    """
    if len(receivers) and np.all(receivers[1:] >= receivers[:-1]):
        if x.dtype == np.float64:
            return _segment_sum_compensated(x, receivers, num_segments)
        buf = np.zeros((num_segments, x.shape[1]), dtype=x.dtype)
        uniq, first = np.unique(receivers, return_index=True)
        buf[uniq] = np.add.reduceat(x, first, axis=0)
        return buf
    buf = np.zeros((num_segments, x.shape[1]), dtype=x.dtype)
    np.add.at(buf, receivers, x)
    return buf


def _segment_sum_compensated(x: np.ndarray, receivers: np.ndarray, num_segments: int) -> np.ndarray:
    uniq, first, counts = np.unique(receivers, return_index=True, return_counts=True)
    total = np.zeros((num_segments, x.shape[1]))
    comp = np.zeros_like(total)
    for slot in range(int(counts.max())):
        mask = counts > slot
        rows = first[mask] + slot
        seg = uniq[mask]
        a = total[seg]
        b = x[rows]
        t = a + b
        swap = np.abs(a) >= np.abs(b)
        comp[seg] += np.where(swap, (a - t) + b, (b - t) + a)
        total[seg] = t
    return total + comp


def segment_sum(a: Tensor, receivers: np.ndarray, num_segments: int) -> Tensor:
    """Sum rows of a into per-receiver buckets; empty buckets stay zero."""
    a = _as_tensor(a)
    out = Tensor(segment_sum_array(a.data, receivers, num_segments), (a,))
    out._backward = lambda g: _accum(a, g[receivers])
    return out


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(a.data[:, start:stop], (a,))

    def backward(g):
        if a.requires_grad:
            buf = np.zeros_like(a.data)
            buf[:, start:stop] = g
            _accum(a, buf)

    out._backward = backward
    return out


def reshape(a: Tensor, shape) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(a.data.reshape(shape), (a,))
    out._backward = lambda g: _accum(a, g.reshape(a.data.shape))
    return out


def sum_all(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(np.asarray(a.data.sum()), (a,))
    out._backward = lambda g: _accum(a, np.broadcast_to(g, a.data.shape))
    return out


def mean_all(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    n = a.data.size
    out = Tensor(np.asarray(a.data.mean()), (a,))
    out._backward = lambda g: _accum(a, np.broadcast_to(g / n, a.data.shape))
    return out


def square(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(a.data * a.data, (a,))
    out._backward = lambda g: _accum(a, 2.0 * a.data * g)
    return out


def norm_rows(a: Tensor) -> Tensor:
    """Row-wise Euclidean norm; zero rows get zero (sub)gradient."""
    a = _as_tensor(a)
    n = np.sqrt((a.data * a.data).sum(axis=1))
    out = Tensor(n, (a,))

    def backward(g):
        safe = np.where(n > 0.0, n, 1.0)
        _accum(a, (g / safe)[:, None] * a.data * (n > 0.0)[:, None])

    out._backward = backward
    return out


# -- MLPs -------------------------------------------------------------------


@dataclass(frozen=True)
class MlpSpec:
    in_width: int
    hidden: tuple[int, ...]
    out_width: int
    activation: str = "relu"
    seed: int = 0

    def validate(self) -> None:
        if self.in_width < 1 or self.out_width < 1:
            raise ShapeError("widths must be positive")
        for a, b in zip(self.hidden, self.hidden[1:]):
            if b * 2 != a:
                raise ShapeError(f"hidden widths must halve: {self.hidden}")
        if self.activation != "relu":
            raise GraphError(f"unsupported activation {self.activation!r}")

    def to_dict(self) -> dict:
        return {
            "in_width": self.in_width,
            "hidden": list(self.hidden),
            "out_width": self.out_width,
            "activation": self.activation,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "MlpSpec":
        return MlpSpec(
            in_width=int(d["in_width"]),
            hidden=tuple(int(h) for h in d["hidden"]),
            out_width=int(d["out_width"]),
            activation=d.get("activation", "relu"),
            seed=int(d.get("seed", 0)),
        )


class Mlp:
    """Affine + ReLU chain; identity output layer."""

    def __init__(self, spec: MlpSpec, dtype=np.float32, params: list[np.ndarray] | None = None):
        spec.validate()
        self.spec = spec
        self.dtype = dtype
        widths = [spec.in_width, *spec.hidden, spec.out_width]
        self.params: list[Tensor] = []
        if params is None:
            rng = np.random.default_rng(spec.seed)
            params = []
            for fan_in, fan_out in zip(widths[:-1], widths[1:]):
                params.append(
                    (rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in))
                )
                params.append(np.zeros(fan_out))
        for arr in params:
            self.params.append(Tensor(np.asarray(arr, dtype=dtype), requires_grad=True))

    def __call__(self, x: Tensor) -> Tensor:
        if x.data.shape[-1] != self.spec.in_width:
            raise ShapeError(
                f"MLP expects width {self.spec.in_width}, got {x.data.shape[-1]}"
            )
        h = x
        n_layers = len(self.params) // 2
        for i in range(n_layers):
            h = add(matmul(h, self.params[2 * i]), self.params[2 * i + 1])
            if i < n_layers - 1:
                h = relu(h)
        return h

    def forward_array(self, x: np.ndarray) -> np.ndarray:
        """No-tape forward pass for inference."""
        if x.shape[-1] != self.spec.in_width:
            raise ShapeError(
                f"MLP expects width {self.spec.in_width}, got {x.shape[-1]}"
            )
        h = x
        n_layers = len(self.params) // 2
        for i in range(n_layers):
            h = h @ self.params[2 * i].data + self.params[2 * i + 1].data
            if i < n_layers - 1:
                h = np.maximum(h, 0.0)
        return h

    def parameters(self) -> list[Tensor]:
        return self.params

    def param_arrays(self) -> list[np.ndarray]:
        return [p.data for p in self.params]

    def astype(self, dtype) -> "Mlp":
        return Mlp(self.spec, dtype=dtype, params=[p.data for p in self.params])


def mlp_forward(mlp: Mlp, x: np.ndarray) -> np.ndarray:
    """Deterministic forward pass on a plain array."""
    return mlp.forward_array(np.asarray(x, dtype=mlp.dtype))


# -- Adam -------------------------------------------------------------------


class Adam:
    """Standard Adam with bias correction over a parameter list."""

    def __init__(self, params: list[Tensor], lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data, dtype=np.float64) for p in params]
        self.v = [np.zeros_like(p.data, dtype=np.float64) for p in params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradient(f"non-finite gradient in parameter {i}")
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * (g * g)
            m_hat = self.m[i] / (1 - self.beta1**t)
            v_hat = self.v[i] / (1 - self.beta2**t)
            p.data -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.data.dtype)

    def state_dict(self) -> dict:
        return {
            "step": self.step_count,
            "m": [m.copy() for m in self.m],
            "v": [v.copy() for v in self.v],
        }
