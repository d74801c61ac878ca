"""
Arrays with reverse-mode automatic differentiation.

Every operation creates a new Tensor remembering its parents and a closure mapping the
gradient of its output to the gradients of its parents. `backward` records the graph
reachable from a scalar loss on a GradTape and replays it in reverse topological order.
"""

from contextlib import contextmanager
from contextvars import ContextVar
from typing import Callable, Iterator, Sequence

import numpy as np

from emoformer.errors import ArgumentError, NumericFault, ShapeError

type BackwardFunction = Callable[[np.ndarray], Sequence[np.ndarray | None]]

_precision: ContextVar[np.dtype] = ContextVar('precision', default=np.dtype(np.float32))
_grad_enabled: ContextVar[bool] = ContextVar('grad_enabled', default=True)

SUPPORTED_PRECISIONS = (np.dtype(np.float32), np.dtype(np.float64))


def default_dtype() -> np.dtype:
    return _precision.get()


@contextmanager
def precision(dtype) -> Iterator[np.dtype]:
    """Sets the dtype of tensors created inside the block (float32 or float64)."""
    dtype = np.dtype(dtype)
    if dtype not in SUPPORTED_PRECISIONS:
        raise ArgumentError(f'Supported precisions are float32 and float64, got {dtype}')
    token = _precision.set(dtype)
    try:
        yield dtype
    finally:
        _precision.reset(token)


@contextmanager
def no_grad() -> Iterator[None]:
    """Operations inside the block do not record a graph."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


def is_grad_enabled() -> bool:
    return _grad_enabled.get()


def check_finite(data: np.ndarray, op: str):
    if not np.all(np.isfinite(data)):
        raise NumericFault(op)


class Tensor:
    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data: np.ndarray = np.array(data, dtype=default_dtype())
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self.op = 'leaf'
        self._parents: tuple['Tensor', ...] = ()
        self._backward: BackwardFunction | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError('item()', (), self.shape)
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> 'Tensor':
        return Tensor(self.data, requires_grad=False, name=self.name)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def accumulate(self, grad: np.ndarray):
        if grad.shape != self.shape:
            raise ShapeError(f'Gradient of {self.op}', self.shape, grad.shape)
        grad = grad.astype(self.dtype, copy=False)
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad += grad

    def __repr__(self) -> str:
        label = f' {self.name!r}' if self.name else ''
        return f'Tensor{label}(shape={self.shape}, op={self.op}, grad={self.requires_grad})'


def result(
    data: np.ndarray, op: str, parents: Sequence[Tensor], backward_fn: BackwardFunction
) -> Tensor:
    """
    Wraps the output of an operation. The graph is recorded only if gradients are
    enabled and some parent requires a gradient.

    :raises NumericFault: If the output contains NaN or infinite values.
    """
    check_finite(data, op)
    out = Tensor(data)
    out.op = op
    if is_grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


class GradTape:
    """The operations reachable from a root tensor, in topological order."""

    nodes: list[Tensor]

    def __init__(self, root: Tensor):
        self.nodes = []
        visited: set[int] = set()
        # Iterative post-order walk; (node, expanded) pairs.
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                self.nodes.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in reversed(node._parents):
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self) -> Iterator[Tensor]:
        return iter(self.nodes)

    def replay(self):
        for node in reversed(self.nodes):
            if node._backward is None or node.grad is None:
                continue
            grads = node._backward(node.grad)
            for parent, grad in zip(node._parents, grads):
                if grad is None or not parent.requires_grad:
                    continue
                check_finite(grad, f'{node.op} (backward)')
                parent.accumulate(np.asarray(grad))


def backward(loss: Tensor) -> GradTape:
    """
    Populates .grad of every tensor that requires a gradient and contributes to loss.

    :raises ArgumentError: If loss is not a scalar.
    """
    if loss.size != 1:
        raise ArgumentError(f'backward() needs a scalar loss, got shape {loss.shape}')
    if not loss.requires_grad:
        raise ArgumentError('backward() on a tensor that does not require a gradient')

    tape = GradTape(loss)
    loss.accumulate(np.ones(loss.shape, dtype=loss.dtype))
    tape.replay()
    return tape


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)
