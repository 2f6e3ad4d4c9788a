"""Dense tensors recorded on a reverse-mode differentiation tape.

Operations executed inside ``with Tape() as tape:`` are appended to that tape
in execution order, which is already a topological order of the graph.
``tape.backward(loss)`` walks the record once in reverse and accumulates
gradients into every leaf tensor that requires them. Outside any tape the same
operations run as plain numpy code and record nothing.
"""

import threading
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..shared.errors import GraphError, ShapeMismatchError

DEFAULT_DTYPE = np.float32

Scalar = Union[int, float]
BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_state = threading.local()


def _tape_stack() -> List["Tape"]:
    stack = getattr(_state, "stack", None)
    if stack is None:
        stack = []
        _state.stack = stack
    return stack


def active_tape() -> Optional["Tape"]:
    """Innermost tape of the calling thread, if any."""
    stack = _tape_stack()
    return stack[-1] if stack else None


class _Node:
    """Record of one executed operation."""
    __slots__ = ("inputs", "backward_fn", "tape")

    def __init__(self, inputs: Tuple["Tensor", ...], backward_fn: BackwardFn, tape: "Tape"):
        self.inputs = inputs
        self.backward_fn = backward_fn
        self.tape = tape


class Tensor:
    """N-D array with an optional gradient.

    Leaves are tensors created directly (parameters, inputs); non-leaves carry a
    node pointing at the operation that produced them.
    """

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(DEFAULT_DTYPE)
        self.data: np.ndarray = arr
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._node: Optional[_Node] = None

    # -- properties -------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeMismatchError(f"item() needs a single element, shape is {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        """Same values, cut from the graph."""
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other: Union["Tensor", Scalar]) -> "Tensor":
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other: Union["Tensor", Scalar]) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: Scalar) -> "Tensor":
        return add(neg(self), other)

    def __mul__(self, other: Union["Tensor", Scalar]) -> "Tensor":
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return neg(self)

    def sum(self) -> "Tensor":
        return tensor_sum(self)

    def mean(self) -> "Tensor":
        return tensor_mean(self)


class Tape:
    """Ordered record of operations, replayed backwards once."""

    def __init__(self):
        self.records: List[Tensor] = []
        self.consumed = False

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()

    def __len__(self) -> int:
        return len(self.records)

    def reset(self) -> None:
        """Forget every record so the tape can be reused."""
        self.records = []
        self.consumed = False

    def backward(self, loss: Tensor) -> None:
        """Populate ``.grad`` of every leaf reachable from ``loss``."""
        if loss.data.size != 1 or loss.ndim != 0:
            raise GraphError(f"backward needs a scalar loss, got shape {loss.shape}")
        if loss._node is None or loss._node.tape is not self:
            raise GraphError("loss was not produced on this tape (detached graph)")
        if self.consumed:
            raise GraphError("backward already ran on this tape; call reset() first")
        self.consumed = True

        grads = {id(loss): np.ones_like(loss.data)}
        for out in reversed(self.records):
            g = grads.pop(id(out), None)
            if g is None:
                continue
            node = out._node
            input_grads = node.backward_fn(g)
            for inp, ig in zip(node.inputs, input_grads):
                if ig is None or not inp.requires_grad:
                    continue
                if inp._node is None:
                    inp.grad = ig.copy() if inp.grad is None else inp.grad + ig
                else:
                    key = id(inp)
                    grads[key] = ig if key not in grads else grads[key] + ig


def backward(loss: Tensor) -> None:
    """Run backward on the tape that produced ``loss``."""
    if loss._node is None:
        raise GraphError("loss is not attached to any tape (detached graph)")
    loss._node.tape.backward(loss)


def as_tensor(value: Union[Tensor, Scalar, np.ndarray], like: Optional[Tensor] = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(value, dtype=dtype))


def make_result(
    data: np.ndarray, inputs: Sequence[Tensor], backward_fn: BackwardFn
) -> Tensor:
    """Wrap an op result and record it on the active tape when gradients flow."""
    requires_grad = any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=requires_grad)
    tape = active_tape()
    if requires_grad and tape is not None:
        out._node = _Node(tuple(inputs), backward_fn, tape)
        tape.records.append(out)
    return out


def _check_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{op}: shapes {a.shape} and {b.shape} differ")


# ---------------------------------------------------------------------------
# Elementwise arithmetic (same shape, or a python scalar operand)
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    if not isinstance(b, Tensor):
        return make_result(a.data + a.data.dtype.type(b), (a,), lambda g: (g,))
    _check_same_shape(a, b, "add")
    return make_result(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    if not isinstance(b, Tensor):
        return make_result(a.data - a.data.dtype.type(b), (a,), lambda g: (g,))
    _check_same_shape(a, b, "sub")
    return make_result(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    if not isinstance(b, Tensor):
        c = a.data.dtype.type(b)
        return make_result(a.data * c, (a,), lambda g: (g * c,))
    _check_same_shape(a, b, "mul")
    a_data, b_data = a.data, b.data
    return make_result(a_data * b_data, (a, b), lambda g: (g * b_data, g * a_data))


def neg(a: Tensor) -> Tensor:
    return make_result(-a.data, (a,), lambda g: (-g,))


def tensor_sum(a: Tensor) -> Tensor:
    shape, dtype = a.shape, a.dtype
    return make_result(
        np.asarray(a.data.sum(), dtype=dtype),
        (a,),
        lambda g: (np.full(shape, g, dtype=dtype),),
    )


def tensor_mean(a: Tensor) -> Tensor:
    shape, dtype, n = a.shape, a.dtype, a.data.size
    return make_result(
        np.asarray(a.data.mean(), dtype=dtype),
        (a,),
        lambda g: (np.full(shape, g / n, dtype=dtype),),
    )


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------

def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    """Elementwise LeakyReLU; the derivative at 0 is taken from the positive branch."""
    positive = x.data >= 0
    s = x.dtype.type(slope)
    scale = np.where(positive, x.dtype.type(1), s)
    return make_result(x.data * scale, (x,), lambda g: (g * scale,))


def relu(x: Tensor) -> Tensor:
    return leaky_relu(x, 0.0)


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return make_result(y, (x,), lambda g: (g * (1 - y * y),))


def atanh(x: Tensor, limit: float = 0.999) -> Tensor:
    """Inverse tanh of x clipped to [-limit, limit]; zero gradient where clipped."""
    if not 0.0 < limit < 1.0:
        raise ValueError(f"atanh limit must lie in (0, 1), got {limit}")
    lim = x.dtype.type(limit)
    c = np.clip(x.data, -lim, lim)
    inside = (x.data > -lim) & (x.data < lim)
    scale = np.where(inside, 1 / (1 - c * c), 0).astype(x.dtype)
    return make_result(np.arctanh(c), (x,), lambda g: (g * scale,))


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

def l1_loss(a: Tensor, b: Tensor) -> Tensor:
    """Mean absolute difference."""
    _check_same_shape(a, b, "l1_loss")
    diff = a.data - b.data
    n, dtype = diff.size, diff.dtype

    def backward_fn(g):
        da = np.sign(diff) * (g / n)
        return (da.astype(dtype, copy=False), (-da).astype(dtype, copy=False))

    return make_result(np.asarray(np.abs(diff).mean(), dtype=dtype), (a, b), backward_fn)


def mse_loss(a: Tensor, b: Tensor) -> Tensor:
    """Mean squared difference."""
    _check_same_shape(a, b, "mse_loss")
    diff = a.data - b.data
    n, dtype = diff.size, diff.dtype

    def backward_fn(g):
        da = diff * (2 * g / n)
        return (da.astype(dtype, copy=False), (-da).astype(dtype, copy=False))

    return make_result(np.asarray((diff * diff).mean(), dtype=dtype), (a, b), backward_fn)
