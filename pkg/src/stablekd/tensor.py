"""Dense tensors with reverse-mode automatic differentiation.

A ``Tensor`` wraps a numpy float32/float64 array and, when any input of
an operation requires gradients, records the producing rule on a tape.
``backward`` walks the tape in reverse topological order, visiting each
node exactly once. Reductions keep a fixed accumulation order, so a
repeated forward/backward pass on identical inputs reproduces identical
bits. Tensors are treated as immutable once produced; in-place updates
are reserved for the optimizer, which owns parameter storage.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import ConfigurationError, ContractError, DimensionError, OracleError

FLOAT_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))


class Tensor:
    """A tape node: value, lazily-allocated gradient, and backward rule."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_rule")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        if arr.dtype not in FLOAT_DTYPES:
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._rule: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    __rmul__ = __mul__


class Parameter(Tensor):
    """A named leaf tensor. Frozen parameters accumulate no gradient."""

    __slots__ = ("pid", "trainable")

    def __init__(self, data, pid: str, trainable: bool = True):
        super().__init__(data, requires_grad=trainable)
        self.pid = pid
        self.trainable = trainable

    def freeze(self) -> None:
        self.trainable = False
        self.requires_grad = False

    def __repr__(self) -> str:
        return f"Parameter({self.pid!r}, shape={self.shape}, trainable={self.trainable})"


def accumulate(t: Tensor, g: np.ndarray) -> None:
    """Add a gradient contribution to a node; no-op for constants."""
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def make_node(data: np.ndarray, parents: Sequence[Tensor], rule: Callable[[np.ndarray], None]) -> Tensor:
    """Build an op output. The tape below all-constant inputs is pruned."""
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._rule = rule
    return out


def _same_dtype(*tensors: Tensor) -> None:
    dtypes = {t.dtype for t in tensors}
    if len(dtypes) > 1:
        raise DimensionError(f"mixed dtypes {sorted(d.name for d in dtypes)}")


# --- arithmetic -----------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _same_dtype(a, b)
    if a.shape != b.shape:
        raise DimensionError(f"add: shapes {a.shape} and {b.shape} differ")

    def rule(g):
        accumulate(a, g)
        accumulate(b, g)

    return make_node(a.data + b.data, (a, b), rule)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_dtype(a, b)
    if a.shape != b.shape:
        raise DimensionError(f"sub: shapes {a.shape} and {b.shape} differ")

    def rule(g):
        accumulate(a, g)
        accumulate(b, -g)

    return make_node(a.data - b.data, (a, b), rule)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_dtype(a, b)
    if a.shape != b.shape:
        raise DimensionError(f"mul: shapes {a.shape} and {b.shape} differ")

    def rule(g):
        accumulate(a, g * b.data)
        accumulate(b, g * a.data)

    return make_node(a.data * b.data, (a, b), rule)


def scale(a: Tensor, c: float) -> Tensor:
    c = a.dtype.type(c)

    def rule(g):
        accumulate(a, g * c)

    return make_node(a.data * c, (a,), rule)


def sum_all(a: Tensor) -> Tensor:
    def rule(g):
        accumulate(a, np.full_like(a.data, g))

    return make_node(a.data.sum(dtype=a.dtype), (a,), rule)


# --- neural-network ops ---------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    _same_dtype(a, b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def rule(g):
        if a.requires_grad:
            accumulate(a, g @ b.data.T)
        if b.requires_grad:
            accumulate(b, a.data.T @ g)

    return make_node(a.data @ b.data, (a, b), rule)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Row-wise x @ w + b."""
    _same_dtype(x, w, b)
    if x.data.ndim != 2:
        raise DimensionError(f"affine: input must be 2-d, got shape {x.shape}")
    if w.data.ndim != 2 or x.shape[1] != w.shape[0]:
        raise DimensionError(f"affine: input {x.shape} does not match weight {w.shape}")
    if b.shape != (w.shape[1],):
        raise DimensionError(f"affine: bias {b.shape} does not match weight {w.shape}")

    def rule(g):
        if x.requires_grad:
            accumulate(x, g @ w.data.T)
        if w.requires_grad:
            accumulate(w, x.data.T @ g)
        if b.requires_grad:
            accumulate(b, g.sum(axis=0))

    return make_node(x.data @ w.data + b.data, (x, w, b), rule)


def channel_bias(x: Tensor, b: Tensor) -> Tensor:
    """Add a per-channel bias to an NCHW map."""
    _same_dtype(x, b)
    if x.data.ndim != 4 or b.data.ndim != 1 or b.shape[0] != x.shape[1]:
        raise DimensionError(f"channel_bias: map {x.shape} does not match bias {b.shape}")

    def rule(g):
        accumulate(x, g)
        if b.requires_grad:
            accumulate(b, g.sum(axis=(0, 2, 3)))

    return make_node(x.data + b.data.reshape(1, -1, 1, 1), (x, b), rule)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0  # gradient at exactly 0 is 0

    def rule(g):
        accumulate(x, g * mask)

    return make_node(np.where(mask, x.data, x.dtype.type(0)), (x,), rule)


def conv2d(x: Tensor, k: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of NCHW input with FCKhKw kernels."""
    _same_dtype(x, k)
    if x.data.ndim != 4 or k.data.ndim != 4:
        raise DimensionError(f"conv2d: need 4-d input and kernel, got {x.shape} and {k.shape}")
    if x.shape[1] != k.shape[1]:
        raise DimensionError(f"conv2d: input channels {x.shape} vs kernel channels {k.shape}")
    if stride < 1 or padding < 0:
        raise ConfigurationError(f"conv2d: stride {stride}, padding {padding} out of range")
    n, c, h, w = x.shape
    f, _, kh, kw = k.shape
    if kh > h + 2 * padding or kw > w + 2 * padding:
        raise ConfigurationError(f"conv2d: kernel {kh}x{kw} exceeds padded input {h + 2 * padding}x{w + 2 * padding}")
    if (h + 2 * padding - kh) % stride or (w + 2 * padding - kw) % stride:
        raise ConfigurationError(
            f"conv2d: non-integral output extent for input {h}x{w}, kernel {kh}x{kw}, "
            f"stride {stride}, padding {padding}"
        )

    def rule(g):
        if x.requires_grad:
            accumulate(x, _kernels.conv2d_backward_input(g, k.data, x.shape, stride, padding))
        if k.requires_grad:
            accumulate(k, _kernels.conv2d_backward_kernel(g, x.data, k.shape, stride, padding))

    return make_node(_kernels.conv2d_forward(x.data, k.data, stride, padding), (x, k), rule)


def avgpool2d(x: Tensor, window: int) -> Tensor:
    """Non-overlapping window means over NCHW maps."""
    if x.data.ndim != 4:
        raise DimensionError(f"avgpool2d: need 4-d input, got {x.shape}")
    if window < 1:
        raise ConfigurationError(f"avgpool2d: window must be positive, got {window}")
    if x.shape[2] % window or x.shape[3] % window:
        raise ConfigurationError(f"avgpool2d: extents {x.shape[2]}x{x.shape[3]} not divisible by window {window}")

    def rule(g):
        accumulate(x, _kernels.avgpool2d_backward(g, window))

    return make_node(_kernels.avgpool2d_forward(x.data, window), (x,), rule)


def flatten(x: Tensor) -> Tensor:
    n = x.shape[0]
    shape = x.shape

    def rule(g):
        accumulate(x, g.reshape(shape))

    return make_node(np.ascontiguousarray(x.data).reshape(n, -1), (x,), rule)


# --- backward pass --------------------------------------------------------

def _topo_order(root: Tensor) -> list[Tensor]:
    """Post-order of the tape, parents before children, deterministic."""
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
        # reversed so parents are expanded in construction order
        for p in reversed(node._parents):
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    return order


def backward(loss: Tensor, params: Iterable[Parameter] | None = None) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss for every trainable parameter reached.

    When ``params`` is given, the returned map covers exactly those
    parameters, with zeros for any the tape never reached.
    """
    if loss.data.ndim != 0:
        raise ContractError(f"backward expects a scalar loss, got shape {loss.shape}")

    grads: dict[str, np.ndarray] = {}
    if loss.requires_grad:
        order = _topo_order(loss)
        loss.grad = np.ones((), dtype=loss.dtype)
        for node in reversed(order):
            if node._rule is not None and node.grad is not None:
                node._rule(node.grad)
        for node in order:
            if isinstance(node, Parameter) and node.trainable and node.grad is not None:
                grads[node.pid] = node.grad
            node.grad = None  # reset so tapes never leak across steps

    if params is not None:
        out: dict[str, np.ndarray] = {}
        for p in params:
            out[p.pid] = grads.get(p.pid, np.zeros_like(p.data))
        return out
    return grads


# --- finite-difference oracle ---------------------------------------------

def finite_diff_check(f: Callable[[], Tensor], params: Sequence[Parameter], eps: float = 1e-6) -> float:
    """Max relative error between tape gradients and central differences.

    ``f`` re-evaluates the scalar loss from the current parameter values;
    parameters must be float64 so the eps=1e-6 stencil is meaningful.
    The error is ``|analytic - numeric| / max(1, |numeric|)`` per
    coordinate, maximized over all coordinates of all parameters.
    """
    for p in params:
        if p.dtype != np.float64:
            raise OracleError(f"finite_diff_check requires float64 parameters, {p.pid} is {p.dtype.name}")
        if not p.data.flags["C_CONTIGUOUS"]:
            p.data = np.ascontiguousarray(p.data)  # ravel below must be a view

    def evaluate() -> float:
        v = float(f().data)
        if not np.isfinite(v):
            raise OracleError("finite_diff_check: non-finite loss evaluation")
        return v

    evaluate()  # fail fast before any perturbation
    analytic = backward(f(), params)
    worst = 0.0
    for p in params:
        a = analytic[p.pid].ravel()
        flat = p.data.ravel()
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + eps
            fp = evaluate()
            flat[i] = saved - eps
            fm = evaluate()
            flat[i] = saved
            numeric = (fp - fm) / (2.0 * eps)
            err = abs(a[i] - numeric) / max(1.0, abs(numeric))
            if err > worst:
                worst = err
    return worst
