"""Dense float64 tensors with reverse-mode automatic differentiation.

Gradients are recorded on an explicit :class:`Tape`; outside an active tape
all operations run forward-only.  Gaussian sampling uses numpy's ziggurat
``standard_normal`` on a PCG64 stream, fixed package-wide so that seeds are
portable across every module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ContractError, NumericDomainError

_TAPE_STACK: list["Tape"] = []


class Tape:
    """Ordered record of differentiable operations.

    One backward pass per recorded forward region; running backward twice
    on the same tape raises :class:`ContractError`.
    """

    def __init__(self):
        self._nodes: list[Tensor] = []
        self._consumed = False

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _TAPE_STACK.pop()
        assert popped is self
        return False

    def _record(self, node: "Tensor"):
        self._nodes.append(node)


def active_tape() -> Tape | None:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


class Tensor:
    """A dense float64 array that optionally participates in gradient taping."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_tape")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None
        self._tape: Tape | None = None

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- gradient accumulation -----------------------------------------------

    def _accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    # -- operator sugar --------------------------------------------------------

    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __rtruediv__(self, other):
        return div(_as_tensor(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))

    def __getitem__(self, idx):
        return getitem(self, idx)

    @property
    def T(self) -> "Tensor":
        return transpose(self)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make_node(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    tape = active_tape()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(p for p in parents if p.requires_grad)
        out._backward = backward
        out._tape = tape
        tape._record(out)
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to the original operand shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and grad.shape[i] != 1:
            grad = grad.sum(axis=i, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(op: str, a: Tensor, b: Tensor):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ConfigurationError(
            f"{op}: shapes {a.shape} and {b.shape} do not broadcast"
        ) from None


# -- elementwise binary primitives -----------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("add", a, b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _make_node(a.data + b.data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("sub", a, b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))

    return _make_node(a.data - b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("mul", a, b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _make_node(a.data * b.data, (a, b), backward)


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("div", a, b)
    if np.any(b.data == 0.0):
        raise NumericDomainError("div: division by zero")

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _make_node(a.data / b.data, (a, b), backward)


# -- elementwise unary primitives ------------------------------------------------


def neg(a: Tensor) -> Tensor:
    def backward(g):
        a._accumulate(-g)

    return _make_node(-a.data, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)

    def backward(g):
        a._accumulate(g * (1.0 - out_data * out_data))

    return _make_node(out_data, (a,), backward)


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)

    def backward(g):
        a._accumulate(g * out_data)

    return _make_node(out_data, (a,), backward)


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0.0):
        raise NumericDomainError("log: argument must be strictly positive")

    def backward(g):
        a._accumulate(g / a.data)

    return _make_node(np.log(a.data), (a,), backward)


def sqrt(a: Tensor) -> Tensor:
    if np.any(a.data < 0.0):
        raise NumericDomainError("sqrt: argument must be non-negative")
    out_data = np.sqrt(a.data)

    def backward(g):
        a._accumulate(g * 0.5 / np.maximum(out_data, 1e-300))

    return _make_node(out_data, (a,), backward)


def square(a: Tensor) -> Tensor:
    def backward(g):
        a._accumulate(g * 2.0 * a.data)

    return _make_node(a.data * a.data, (a,), backward)


def absolute(a: Tensor) -> Tensor:
    def backward(g):
        a._accumulate(g * np.sign(a.data))

    return _make_node(np.abs(a.data), (a,), backward)


def maximum_const(a: Tensor, c: float) -> Tensor:
    mask = a.data > c

    def backward(g):
        a._accumulate(g * mask)

    return _make_node(np.maximum(a.data, c), (a,), backward)


def relu(a: Tensor) -> Tensor:
    return maximum_const(a, 0.0)


def where_mask(mask: np.ndarray, a: Tensor, b: Tensor) -> Tensor:
    """Elementwise select with a constant boolean mask."""
    mask = np.asarray(mask, dtype=bool)
    _check_broadcast("where", a, b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * mask, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * ~mask, b.shape))

    return _make_node(np.where(mask, a.data, b.data), (a, b), backward)


# -- linear algebra ---------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ConfigurationError(
            f"matmul: shapes {a.shape} and {b.shape} are not conformable 2-D"
        )

    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return _make_node(a.data @ b.data, (a, b), backward)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ConfigurationError(f"transpose: expected a 2-D tensor, got {a.shape}")

    def backward(g):
        a._accumulate(g.T)

    return _make_node(a.data.T.copy(), (a,), backward)


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)

    def backward(g):
        a._accumulate(g.reshape(a.shape))

    return _make_node(a.data.reshape(shape), (a,), backward)


def getitem(a: Tensor, idx) -> Tensor:
    out_data = a.data[idx]

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        a._accumulate(full)

    return _make_node(np.array(out_data, copy=True), (a,), backward)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ConfigurationError("concat: need at least one tensor")
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t._accumulate(g[tuple(sl)])

    return _make_node(
        np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward
    )


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = [reshape(_as_tensor(t), _expanded_shape(t, axis)) for t in tensors]
    return concat(tensors, axis=axis)


def _expanded_shape(t, axis):
    s = list(_as_tensor(t).shape)
    s.insert(axis if axis >= 0 else len(s) + axis + 1, 1)
    return s


# -- reductions -------------------------------------------------------------------


def tsum(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    def backward(g):
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.shape).copy())
        else:
            if not keepdims:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, a.shape).copy())

    return _make_node(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def tmean(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    n = a.size if axis is None else a.shape[axis]

    def backward(g):
        if axis is None:
            a._accumulate(np.broadcast_to(g / n, a.shape).copy())
        else:
            if not keepdims:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g / n, a.shape).copy())

    return _make_node(a.data.mean(axis=axis, keepdims=keepdims), (a,), backward)


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis, computed via the shifted-exponent form."""
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        dot = (g * out_data).sum(axis=-1, keepdims=True)
        a._accumulate(out_data * (g - dot))

    return _make_node(out_data, (a,), backward)


def logsumexp(a: Tensor) -> Tensor:
    """log(sum(exp(x))) over the last axis, shift-stabilized."""
    m = a.data.max(axis=-1, keepdims=True)
    s = np.exp(a.data - m).sum(axis=-1, keepdims=True)
    out_data = (m + np.log(s)).squeeze(-1)
    soft = np.exp(a.data - m) / s

    def backward(g):
        a._accumulate(np.expand_dims(g, -1) * soft)

    return _make_node(out_data, (a,), backward)


# -- backward pass ----------------------------------------------------------------


def backward(loss: Tensor):
    """Propagate d(loss)/d(leaf) to every requires_grad leaf under the tape."""
    if loss.data.ndim != 0 and loss.size != 1:
        raise ContractError(f"backward: loss must be scalar, got shape {loss.shape}")
    tape = loss._tape
    if tape is None:
        raise ContractError("backward: loss was not recorded on an active tape")
    if tape._consumed:
        raise ContractError("backward: tape already consumed; re-record the forward")
    tape._consumed = True

    # Topological order over the subgraph reachable from loss.
    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))

    loss._accumulate(np.ones_like(loss.data))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# -- gradient checking --------------------------------------------------------------


@dataclass
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    passed: bool


def grad_check(fn, point: Tensor, step: float = 1e-5, tol: float = 1e-4) -> GradCheckReport:
    """Compare tape gradients of a scalar ``fn(point)`` with central differences.

    Any stochastic sampling inside ``fn`` must be frozen across evaluations.
    Relative error uses denominator max(|analytic|, |numeric|, 1e-3) so that
    near-zero gradients are judged on an absolute scale.
    """
    leaf = Tensor(point.data.copy(), requires_grad=True)
    with Tape():
        val = fn(leaf)
        if not np.all(np.isfinite(val.data)):
            raise NumericDomainError("grad_check: fn non-finite at the probe point")
        backward(val)
    analytic = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)

    numeric = np.zeros_like(leaf.data)
    flat = leaf.data.reshape(-1)
    num_flat = numeric.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = fn(Tensor(leaf.data)).item()
        flat[i] = orig - step
        down = fn(Tensor(leaf.data)).item()
        flat[i] = orig
        if not (math.isfinite(up) and math.isfinite(down)):
            raise NumericDomainError("grad_check: fn non-finite at a probe point")
        num_flat[i] = (up - down) / (2.0 * step)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-3)
    max_rel = float(np.max(np.abs(analytic - numeric) / denom)) if flat.size else 0.0
    return GradCheckReport(max_rel_error=max_rel, tolerance=tol, passed=max_rel <= tol)


# -- randomness ---------------------------------------------------------------------


class RngState:
    """Seedable Gaussian/uniform sampler; identical seed gives an identical stream."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def standard_normal(self, shape) -> Tensor:
        return Tensor(self._gen.standard_normal(size=shape))

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        return self._gen.uniform(low, high, size=shape)

    def integers(self, low: int, high: int, shape=None) -> np.ndarray:
        return self._gen.integers(low, high, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=replace)

    def spawn(self, key: int) -> "RngState":
        """Derive an independent stream; deterministic in (seed, key)."""
        return RngState((self.seed * 1_000_003 + key) % (2**63))


def sample_standard_normal(rng: RngState, shape) -> Tensor:
    """I.i.d. standard normal entries; advances ``rng`` deterministically."""
    return rng.standard_normal(shape)
