"""Define-by-run reverse-mode automatic differentiation over float64 numpy arrays.

Every operation returns a new ``Tensor`` that remembers its parents and a backward rule mapping
the output gradient to one gradient per parent. ``backward`` sorts the graph reachable from a
scalar root into a ``Tape`` and runs the rules in reverse order. A graph can be differentiated
once; leaves (parameters, inputs) survive and can enter any number of new graphs.
"""

import itertools
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import expit

from ..exceptions import NumericFailureError, ShapeError, TapeReuseError

CLAMP = 1e-12

_node_ids = itertools.count()


class Tensor:
    """Real-valued array with a lazily allocated gradient slot."""

    __array_priority__ = 100

    def __init__(
        self,
        values,
        requires_grad: bool = False,
        parents: Sequence["Tensor"] = (),
        backward_rule: Callable | None = None,
        op: str = "leaf",
    ):
        values = np.array(values, dtype=np.float64) if backward_rule is None else np.asarray(values, np.float64)
        if not np.all(np.isfinite(values)):
            raise NumericFailureError(f"Operation '{op}' produced non-finite values.")
        self.values = values
        self.parents = tuple(parents)
        self.requires_grad = bool(requires_grad) or any(parent.requires_grad for parent in self.parents)
        self.node_id = next(_node_ids)
        self.op = op
        self._backward_rule = backward_rule
        self._released = False
        self._grad = None

    def __repr__(self) -> str:
        return f"Tensor(op={self.op!r}, shape={self.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def is_leaf(self) -> bool:
        return not self.parents

    @property
    def grad(self) -> np.ndarray:
        if self._grad is None:
            return np.zeros_like(self.values)
        return self._grad

    def accumulate_grad(self, gradient: np.ndarray) -> None:
        self._grad = np.array(gradient, dtype=np.float64) if self._grad is None else self._grad + gradient

    def zero_grad(self) -> None:
        self._grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.values)

    def item(self) -> float:
        return float(self.values)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None):
        return sum(self, axis=axis)

    def mean(self):
        return mean(self)

    def reshape(self, shape):
        return reshape(self, shape)


class Tape:
    """Topologically ordered nodes of one forward pass, parents before children."""

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def from_root(cls, root: Tensor) -> "Tape":
        order, visited = [], set()
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if node.node_id in visited:
                continue
            if node._released:
                raise TapeReuseError(f"The graph through '{node.op}' was already differentiated; rebuild it first.")
            visited.add(node.node_id)
            stack.append((node, True))
            stack.extend((parent, False) for parent in node.parents if parent.node_id not in visited)
        return cls(order)

    def release(self) -> None:
        for node in self.nodes:
            if node._backward_rule is not None:
                node._released = True
                node._backward_rule = None


def backward(root: Tensor, wrt: Iterable[Tensor] | None = None) -> None:
    """Accumulate d(root)/d(tensor) into ``tensor.grad`` for every reachable tensor.

    Parameters
    ----------
    root : Tensor
        Scalar (shape ``()``) output.
    wrt : iterable of Tensor, optional
        Restrict gradient storage to these tensors; gradients still flow through everything else.
    """
    assert root.shape == (), f"backward needs a scalar root, got shape {root.shape}."
    tape = Tape.from_root(root)
    targets = None if wrt is None else {tensor.node_id for tensor in wrt}
    pending = {root.node_id: np.ones(())}
    for node in reversed(tape.nodes):
        gradient = pending.pop(node.node_id, None)
        if gradient is None or not node.requires_grad:
            continue
        if targets is None or node.node_id in targets:
            node.accumulate_grad(gradient)
        if node._backward_rule is None:
            continue
        for parent, parent_gradient in zip(node.parents, node._backward_rule(gradient)):
            if parent_gradient is None or not parent.requires_grad:
                continue
            if parent.node_id in pending:
                pending[parent.node_id] = pending[parent.node_id] + parent_gradient
            else:
                pending[parent.node_id] = parent_gradient
    tape.release()


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _unbroadcast(gradient: np.ndarray, shape: tuple) -> np.ndarray:
    while gradient.ndim > len(shape):
        gradient = gradient.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and gradient.shape[axis] != 1:
            gradient = gradient.sum(axis=axis, keepdims=True)
    return gradient


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"Cannot {op} tensors of shapes {a.shape} and {b.shape}.")


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")

    def rule(gradient):
        return _unbroadcast(gradient, a.shape), _unbroadcast(gradient, b.shape)

    return Tensor(a.values + b.values, parents=(a, b), backward_rule=rule, op="add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "subtract")

    def rule(gradient):
        return _unbroadcast(gradient, a.shape), _unbroadcast(-gradient, b.shape)

    return Tensor(a.values - b.values, parents=(a, b), backward_rule=rule, op="sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "multiply")

    def rule(gradient):
        return _unbroadcast(gradient * b.values, a.shape), _unbroadcast(gradient * a.values, b.shape)

    return Tensor(a.values * b.values, parents=(a, b), backward_rule=rule, op="mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "divide")
    with np.errstate(divide="ignore", invalid="ignore"):
        values = a.values / b.values

    def rule(gradient):
        return _unbroadcast(gradient / b.values, a.shape), _unbroadcast(-gradient * a.values / b.values**2, b.shape)

    return Tensor(values, parents=(a, b), backward_rule=rule, op="div")


def matmul(a, b) -> Tensor:
    """Matrix product for operands of rank 1 or 2 with numpy semantics."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"Cannot matmul tensors of shapes {a.shape} and {b.shape}.")

    def rule(gradient):
        if a.ndim == 2 and b.ndim == 2:
            return gradient @ b.values.T, a.values.T @ gradient
        if a.ndim == 1 and b.ndim == 2:
            return b.values @ gradient, np.outer(a.values, gradient)
        if a.ndim == 2 and b.ndim == 1:
            return np.outer(gradient, b.values), a.values.T @ gradient
        return gradient * b.values, gradient * a.values

    return Tensor(a.values @ b.values, parents=(a, b), backward_rule=rule, op="matmul")


def transpose(x) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 2:
        raise ShapeError(f"transpose needs a matrix, got shape {x.shape}.")
    return Tensor(x.values.T, parents=(x,), backward_rule=lambda gradient: (gradient.T,), op="transpose")


def sum(x, axis: int | None = None) -> Tensor:
    x = as_tensor(x)

    def rule(gradient):
        if axis is not None:
            gradient = np.expand_dims(gradient, axis)
        return (np.broadcast_to(gradient, x.shape).copy(),)

    return Tensor(np.sum(x.values, axis=axis), parents=(x,), backward_rule=rule, op="sum")


def mean(x) -> Tensor:
    x = as_tensor(x)
    count = x.values.size
    return Tensor(
        np.mean(x.values),
        parents=(x,),
        backward_rule=lambda gradient: (np.full(x.shape, gradient / count),),
        op="mean",
    )


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(tensor) for tensor in tensors]
    try:
        values = np.concatenate([tensor.values for tensor in tensors], axis=axis)
    except ValueError as error:
        raise ShapeError(f"Cannot concatenate shapes {[tensor.shape for tensor in tensors]}: {error}")
    boundaries = np.cumsum([tensor.shape[axis] for tensor in tensors])[:-1]

    def rule(gradient):
        return tuple(np.split(gradient, boundaries, axis=axis))

    return Tensor(values, parents=tuple(tensors), backward_rule=rule, op="concat")


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    try:
        values = x.values.reshape(shape)
    except ValueError:
        raise ShapeError(f"Cannot reshape {x.shape} into {shape}.")
    return Tensor(values, parents=(x,), backward_rule=lambda gradient: (gradient.reshape(x.shape),), op="reshape")


def take(x, indices) -> Tensor:
    """Gather ``x.values.ravel()[indices]``; repeated indices accumulate in the backward pass."""
    x = as_tensor(x)
    indices = np.asarray(indices, dtype=np.intp)

    def rule(gradient):
        scattered = np.zeros(x.values.size)
        np.add.at(scattered, indices.ravel(), gradient.ravel())
        return (scattered.reshape(x.shape),)

    return Tensor(x.values.ravel()[indices], parents=(x,), backward_rule=rule, op="take")


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.values > 0
    return Tensor(np.where(mask, x.values, 0.0), parents=(x,), backward_rule=lambda g: (g * mask,), op="relu")


def leaky_relu(x, slope: float = 0.2) -> Tensor:
    x = as_tensor(x)
    factor = np.where(x.values > 0, 1.0, slope)
    return Tensor(x.values * factor, parents=(x,), backward_rule=lambda g: (g * factor,), op="leaky_relu")


def tanh(x) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.values)
    return Tensor(y, parents=(x,), backward_rule=lambda g: (g * (1 - y**2),), op="tanh")


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    y = expit(x.values)
    return Tensor(y, parents=(x,), backward_rule=lambda g: (g * y * (1 - y),), op="sigmoid")


def log(x) -> Tensor:
    """Natural logarithm of max(x, 1e-12); the clamped region has zero gradient."""
    x = as_tensor(x)
    clamped = np.maximum(x.values, CLAMP)
    active = x.values > CLAMP
    return Tensor(np.log(clamped), parents=(x,), backward_rule=lambda g: (g * active / clamped,), op="log")


def sqrt(x) -> Tensor:
    """Square root of max(x, 1e-12); the clamped region has zero gradient."""
    x = as_tensor(x)
    active = x.values > CLAMP
    y = np.sqrt(np.maximum(x.values, CLAMP))
    return Tensor(y, parents=(x,), backward_rule=lambda g: (g * active / (2 * y),), op="sqrt")


def abs(x) -> Tensor:
    x = as_tensor(x)
    sign = np.sign(x.values)
    return Tensor(np.abs(x.values), parents=(x,), backward_rule=lambda g: (g * sign,), op="abs")


def square(x) -> Tensor:
    x = as_tensor(x)
    return Tensor(x.values**2, parents=(x,), backward_rule=lambda g: (2 * g * x.values,), op="square")


def complex_matmul(a_real, a_imag, b_real, b_imag) -> tuple[Tensor, Tensor]:
    """(A_r + i A_i)(B_r + i B_i) as the real pair (A_r B_r - A_i B_i, A_r B_i + A_i B_r)."""
    real = sub(matmul(a_real, b_real), matmul(a_imag, b_imag))
    imag = add(matmul(a_real, b_imag), matmul(a_imag, b_real))
    return real, imag
