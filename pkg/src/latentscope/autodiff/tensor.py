"""Dense tensors and the reverse-mode differentiation tape.

Ops (see :mod:`latentscope.autodiff.ops`) execute eagerly on numpy arrays
and append one record per call to the active tape.  Records are appended
in execution order, which is a topological order of the computation
graph, so the backward pass is a single reverse sweep.
"""

from __future__ import annotations

import threading
from typing import Callable, Optional, Sequence

import numpy as np


class ShapeMismatchError(ValueError):
    """Raised when operand shapes are invalid for an op."""


class BackwardRootError(ValueError):
    """Raised when backward is started from a non-scalar tensor."""


class Tensor:
    """A dense float tensor with an optional gradient slot.

    The data buffer is treated as immutable once the tensor has been
    created (parameter updates replace ``data`` wholesale rather than
    writing into it).  The gradient slot is owned by whichever tape ran
    backward over the tensor.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        arr.setflags(write=False)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def assign(self, new_data: np.ndarray) -> None:
        """Replace the data buffer (parameter update path only)."""
        arr = np.asarray(new_data, dtype=np.float64)
        if arr.shape != self.data.shape:
            raise ShapeMismatchError(
                f"assign: shape {arr.shape} does not match {self.data.shape}"
            )
        arr = arr.copy()
        arr.setflags(write=False)
        self.data = arr

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class TapeNode:
    """One recorded op: inputs, output, and its backward rule."""

    __slots__ = ("op_name", "inputs", "output", "backward_fn")

    def __init__(
        self,
        op_name: str,
        inputs: Sequence[Tensor],
        output: Tensor,
        backward_fn: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]],
    ):
        self.op_name = op_name
        self.inputs = tuple(inputs)
        self.output = output
        self.backward_fn = backward_fn


_LOCAL = threading.local()


def _tape_stack() -> list:
    stack = getattr(_LOCAL, "stack", None)
    if stack is None:
        stack = []
        _LOCAL.stack = stack
    return stack


def active_tape() -> Optional["Tape"]:
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tape:
    """Ordered record of ops for one forward pass (single-threaded).

    Use as a context manager; ops executed inside the block are recorded.
    ``backward(root)`` seeds d(root)/d(root) = 1 and sweeps the records in
    reverse, accumulating gradients into every tensor that requires them.
    """

    def __init__(self):
        self.nodes: list[TapeNode] = []

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        stack = _tape_stack()
        assert stack and stack[-1] is self
        stack.pop()

    def record(self, node: TapeNode) -> None:
        self.nodes.append(node)

    def backward(self, root: Tensor) -> None:
        if root.data.size != 1:
            raise BackwardRootError(
                f"backward root must be scalar, got shape {root.shape}"
            )
        grads: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
        for node in reversed(self.nodes):
            gout = grads.pop(id(node.output), None)
            if gout is None:
                continue
            gins = node.backward_fn(gout)
            for tensor, gin in zip(node.inputs, gins):
                if gin is None:
                    continue
                key = id(tensor)
                if key in grads:
                    grads[key] = grads[key] + gin
                else:
                    grads[key] = gin
        # publish into the .grad slots of leaf/requested tensors
        seen: set[int] = set()
        candidates = [t for node in self.nodes for t in node.inputs]
        candidates.append(root)
        for tensor in candidates:
            key = id(tensor)
            if key in seen or not tensor.requires_grad:
                continue
            seen.add(key)
            gin = grads.get(key)
            if gin is None:
                continue
            if tensor.grad is None:
                tensor.grad = gin
            else:
                tensor.grad = tensor.grad + gin


def as_tensor(value, requires_grad: bool = False) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, requires_grad=requires_grad)
