"""Reverse-mode autodiff core: tensors, tape, ops, Adam, grad checking."""

from .gradcheck import grad_check
from .optim import AdamState, NonFiniteGradientError, adam_step
from .tensor import (
    BackwardRootError,
    ShapeMismatchError,
    Tape,
    TapeNode,
    Tensor,
    active_tape,
    as_tensor,
)
from . import ops

__all__ = [
    "AdamState",
    "BackwardRootError",
    "NonFiniteGradientError",
    "ShapeMismatchError",
    "Tape",
    "TapeNode",
    "Tensor",
    "active_tape",
    "adam_step",
    "as_tensor",
    "grad_check",
    "ops",
]
