"""Dense tensors with a minimal reverse-mode tape.

A ``Tensor`` wraps a row-major numpy array. Primitive operations compute their result
eagerly and, when a ``Tape`` is active and any input requires gradients, append a node
holding the inputs and a backward closure. ``Tape.backward`` walks the node list once in
reverse, which is a valid reverse topological order because the list is append-only.

Broadcasting follows numpy rules restricted by use: leading batch axes and singleton
axes produced by ``keepdims`` reductions. Anything numpy cannot broadcast raises
``ShapeError`` naming the op and the operand shapes.
"""
import logging
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ghyena.core.errors import GHyenaError, ShapeError

logger = logging.getLogger(__name__)

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[float]]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

_DTYPES = {"float64": np.float64, "float32": np.float32}
_default_dtype: Any = np.float64

_active_tape: ContextVar[Optional["Tape"]] = ContextVar("ghyena_active_tape", default=None)


def set_default_dtype(name: str) -> None:
    """Switch the global float width; 32-bit is meant for the benchmark path only."""
    global _default_dtype
    if name not in _DTYPES:
        raise ValueError(f"unsupported dtype {name!r}; expected one of {sorted(_DTYPES)}")
    _default_dtype = _DTYPES[name]


def get_default_dtype() -> Any:
    return _default_dtype


@contextmanager
def default_dtype(name: str) -> Iterator[None]:
    """Temporarily switch the global float width."""
    previous = np.dtype(_default_dtype).name
    set_default_dtype(name)
    try:
        yield
    finally:
        set_default_dtype(previous)


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name", "_node")

    def __init__(self, data: Any, requires_grad: bool = False, name: Optional[str] = None, dtype: Any = None):
        if isinstance(data, Tensor):
            data = data.data
        self.data: np.ndarray = np.asarray(data, dtype=dtype or _default_dtype)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._node: Optional["Node"] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> Any:
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    def __add__(self, other: ArrayLike) -> "Tensor":
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        if isinstance(other, (int, float)):
            return scale(self, 1.0 / float(other))
        return div(self, other)

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        return div(other, self)

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        return matmul(self, other)

    def __getitem__(self, key: Any) -> "Tensor":
        return slice_(self, key)

    def sum(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape: Any) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes: int) -> "Tensor":
        return transpose(self, axes or None)


@dataclass(eq=False)
class Node:
    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class Tape:
    """Append-only record of differentiable operations for one step."""

    def __init__(self) -> None:
        self.nodes: List[Node] = []
        self.visits = 0
        self._token: Any = None

    def __enter__(self) -> "Tape":
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc: Any) -> None:
        _active_tape.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, op: str, inputs: Tuple[Tensor, ...], output: Tensor, backward: BackwardFn) -> Node:
        node = Node(op=op, inputs=inputs, output=output, backward=backward)
        output._node = node
        output.requires_grad = True
        self.nodes.append(node)
        return node

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable leaf tensor.

        A loss that depends on no recorded operation (a constant) reaches nothing, so
        every parameter keeps a zero gradient.
        """
        if loss.data.ndim != 0:
            raise ShapeError("backward", loss.shape, reason="loss must be a 0-dim tensor, got")
        self.visits = 0
        if loss._node is None:
            return
        if loss._node not in self.nodes:
            raise GHyenaError("backward: loss was not produced on this tape")

        grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            self.visits += 1
            g = grads.pop(id(node.output), None)
            if g is None:
                continue
            for tensor, g_in in zip(node.inputs, node.backward(g)):
                if g_in is None or not tensor.requires_grad:
                    continue
                if tensor._node is None:
                    tensor.grad = np.array(g_in) if tensor.grad is None else tensor.grad + g_in
                else:
                    key = id(tensor)
                    grads[key] = g_in if key not in grads else grads[key] + g_in


def active_tape() -> Optional[Tape]:
    return _active_tape.get()


def as_tensor(x: ArrayLike) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def apply_op(op: str, inputs: Sequence[Tensor], out_data: np.ndarray, backward: BackwardFn) -> Tensor:
    """Wrap a forward result and record it when a tape is listening.

    This is the extension point other packages use to add differentiable operations.
    """
    out = Tensor(out_data, dtype=out_data.dtype if isinstance(out_data, np.ndarray) else None)
    tape = _active_tape.get()
    if tape is not None and any(t.requires_grad for t in inputs):
        tape.record(op, tuple(inputs), out, backward)
    return out


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` over the axes that broadcasting expanded to reach ``shape``."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape) from None


def _axes(axis: Optional[Union[int, Tuple[int, ...]]], ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


def _expand_reduced(g: np.ndarray, shape: Tuple[int, ...], axes: Tuple[int, ...], keepdims: bool) -> np.ndarray:
    if not keepdims:
        g = np.expand_dims(g, axes)
    return np.broadcast_to(g, shape)


# -- elementwise binary ----------------------------------------------------------------

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast("add", a, b)
    return apply_op("add", (a, b), a.data + b.data,
                    lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)))


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast("sub", a, b)
    return apply_op("sub", (a, b), a.data - b.data,
                    lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)))


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast("mul", a, b)
    x, y = a.data, b.data
    return apply_op("mul", (a, b), x * y,
                    lambda g: (unbroadcast(g * y, a.shape), unbroadcast(g * x, b.shape)))


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast("div", a, b)
    x, y = a.data, b.data
    return apply_op("div", (a, b), x / y,
                    lambda g: (unbroadcast(g / y, a.shape), unbroadcast(-g * x / (y * y), b.shape)))


def neg(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    return apply_op("neg", (x,), -x.data, lambda g: (-g,))


def scale(x: ArrayLike, c: float) -> Tensor:
    x = as_tensor(x)
    return apply_op("scale", (x,), x.data * c, lambda g: (g * c,))


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", a.shape, b.shape)
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ShapeError("matmul", a.shape, b.shape, reason="batch axes do not broadcast") from None
    x, y = a.data, b.data

    def backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        ga = g @ np.swapaxes(y, -1, -2)
        gb = np.swapaxes(x, -1, -2) @ g
        return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)

    return apply_op("matmul", (a, b), x @ y, backward)


# -- reductions and structure ----------------------------------------------------------

def sum_(x: ArrayLike, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = _axes(axis, x.ndim)
    return apply_op("sum", (x,), x.data.sum(axis=axes, keepdims=keepdims),
                    lambda g: (_expand_reduced(g, x.shape, axes, keepdims),))


def mean(x: ArrayLike, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = _axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    return apply_op("mean", (x,), x.data.mean(axis=axes, keepdims=keepdims),
                    lambda g: (_expand_reduced(g, x.shape, axes, keepdims) / count,))


def concat(tensors: Sequence[ArrayLike], axis: int = -1) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise ShapeError("concat", reason="nothing to concatenate")
    ndim = parts[0].ndim
    ax = axis % ndim
    for p in parts[1:]:
        if p.ndim != ndim or p.shape[:ax] + p.shape[ax + 1:] != parts[0].shape[:ax] + parts[0].shape[ax + 1:]:
            raise ShapeError("concat", *(q.shape for q in parts))
    cuts = np.cumsum([p.shape[ax] for p in parts])[:-1]
    return apply_op("concat", tuple(parts), np.concatenate([p.data for p in parts], axis=ax),
                    lambda g: tuple(np.split(g, cuts, axis=ax)))


def slice_(x: ArrayLike, key: Any) -> Tensor:
    x = as_tensor(x)

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        gx = np.zeros_like(x.data)
        gx[key] = g
        return (gx,)

    return apply_op("slice", (x,), x.data[key], backward)


def transpose(x: ArrayLike, axes: Optional[Sequence[int]] = None) -> Tensor:
    x = as_tensor(x)
    perm = tuple(axes) if axes is not None else tuple(reversed(range(x.ndim)))
    inverse = tuple(np.argsort(perm))
    return apply_op("transpose", (x,), np.transpose(x.data, perm), lambda g: (np.transpose(g, inverse),))


def swap_last(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    perm = list(range(x.ndim))
    perm[-1], perm[-2] = perm[-2], perm[-1]
    return transpose(x, perm)


def reshape(x: ArrayLike, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError:
        raise ShapeError("reshape", x.shape, tuple(shape)) from None
    return apply_op("reshape", (x,), out, lambda g: (g.reshape(x.shape),))


def unsqueeze(x: ArrayLike, axis: int) -> Tensor:
    x = as_tensor(x)
    return reshape(x, np.expand_dims(x.data, axis).shape)


def gather(x: ArrayLike, index: np.ndarray) -> Tensor:
    """Gather rows along the token axis (-2).

    ``x`` has shape (*lead, N, C) and ``index`` (N, K) or (*lead, N, K); the result has
    shape (*lead, N, K, C).
    """
    x = as_tensor(x)
    index = np.asarray(index, dtype=np.intp)
    if x.ndim < 2:
        raise ShapeError("gather", x.shape, index.shape)
    lead, (n, c) = x.shape[:-2], x.shape[-2:]
    if index.ndim < 2 or index.shape[-2] != n:
        raise ShapeError("gather", x.shape, index.shape, reason="index rows must match token count")
    flat_lead = int(np.prod(lead)) if lead else 1
    idx = np.broadcast_to(index, lead + index.shape[-2:]).reshape(flat_lead, *index.shape[-2:])
    rows = np.arange(flat_lead)[:, None, None]
    src = x.data.reshape(flat_lead, n, c)
    out = src[rows, idx].reshape(*lead, *index.shape[-2:], c)

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        gx = np.zeros_like(src)
        np.add.at(gx, (rows, idx), g.reshape(flat_lead, *index.shape[-2:], c))
        return (gx.reshape(x.shape),)

    return apply_op("gather", (x,), out, backward)


# -- elementwise unary -----------------------------------------------------------------

def _sigmoid(v: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * v))


def sigmoid(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    y = _sigmoid(x.data)
    return apply_op("sigmoid", (x,), y, lambda g: (g * y * (1.0 - y),))


def silu(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    s = _sigmoid(x.data)
    return apply_op("silu", (x,), x.data * s, lambda g: (g * (s + x.data * s * (1.0 - s)),))


def tanh(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.data)
    return apply_op("tanh", (x,), y, lambda g: (g * (1.0 - y * y),))


def sine(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    return apply_op("sine", (x,), np.sin(x.data), lambda g: (g * np.cos(x.data),))


def exp(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    y = np.exp(x.data)
    return apply_op("exp", (x,), y, lambda g: (g * y,))


def sqrt(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    y = np.sqrt(x.data)
    return apply_op("sqrt", (x,), y, lambda g: (g / (2.0 * y),))


def softplus(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    return apply_op("softplus", (x,), np.logaddexp(0.0, x.data), lambda g: (g * _sigmoid(x.data),))


def log1p(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    return apply_op("log1p", (x,), np.log1p(x.data), lambda g: (g / (1.0 + x.data),))


# -- geometric -------------------------------------------------------------------------

def l2norm(x: ArrayLike, axis: int = -1, keepdims: bool = True) -> Tensor:
    x = as_tensor(x)
    y = np.sqrt(np.sum(x.data * x.data, axis=axis, keepdims=True))

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        if not keepdims:
            g = np.expand_dims(g, axis)
        safe = np.where(y > 0, y, 1.0)
        return (np.where(y > 0, g * x.data / safe, 0.0),)

    return apply_op("l2norm", (x,), y if keepdims else np.squeeze(y, axis=axis), backward)


def dot(a: ArrayLike, b: ArrayLike, axis: int = -1, keepdims: bool = True) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast("dot", a, b)
    x, y = a.data, b.data

    def backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        if not keepdims:
            g = np.expand_dims(g, axis)
        return unbroadcast(g * y, a.shape), unbroadcast(g * x, b.shape)

    return apply_op("dot", (a, b), np.sum(x * y, axis=axis, keepdims=keepdims), backward)


def cross(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1:] != (3,) or b.shape[-1:] != (3,):
        raise ShapeError("cross", a.shape, b.shape, reason="last axis must have extent 3, got")
    _broadcast("cross", a, b)
    x, y = a.data, b.data
    return apply_op("cross", (a, b), np.cross(x, y),
                    lambda g: (unbroadcast(np.cross(y, g), a.shape), unbroadcast(np.cross(g, x), b.shape)))


def softmax(x: ArrayLike, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    # rowwise Jacobian-vector product: y * (g - <g, y>)
    return apply_op("softmax", (x,), y, lambda g: (y * (g - np.sum(g * y, axis=axis, keepdims=True)),))


PRIMITIVES = {
    "add": add, "sub": sub, "mul": mul, "div": div, "neg": neg, "matmul": matmul, "scale": scale,
    "sum": sum_, "mean": mean, "concat": concat, "slice": slice_, "transpose": transpose,
    "reshape": reshape, "gather": gather, "sigmoid": sigmoid, "silu": silu, "tanh": tanh,
    "sine": sine, "exp": exp, "sqrt": sqrt, "softplus": softplus, "log1p": log1p,
    "l2norm": l2norm, "dot": dot, "cross": cross, "softmax": softmax,
}


def primitive_forward(op: str, *inputs: ArrayLike, **kwargs: Any) -> Tensor:
    """Dispatch a primitive by name."""
    try:
        fn = PRIMITIVES[op]
    except KeyError:
        raise GHyenaError(f"unknown primitive {op!r}") from None
    return fn(*inputs, **kwargs)
