"""Finite-difference verification of tape gradients."""

from __future__ import annotations

from typing import Callable, Sequence, Union

import numpy as np

from .tensor import Tape, Tensor


def grad_check(
    scalar_fn: Callable[..., Tensor],
    inputs: Union[Tensor, Sequence[Tensor]],
    h: float = 1e-6,
) -> float:
    """Compare tape gradients against central finite differences.

    ``scalar_fn`` receives the input tensors and must return a scalar
    tensor.  Returns the maximum elementwise relative error, with the
    denominator max(|analytic|, |numeric|, 1e-8).
    """
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    if isinstance(inputs, Tensor):
        inputs = [inputs]
    inputs = list(inputs)
    probes = [Tensor(t.data, requires_grad=True) for t in inputs]
    with Tape() as tape:
        out = scalar_fn(*probes)
    if not np.isfinite(out.data).all():
        raise FloatingPointError("scalar_fn produced a non-finite value")
    tape.backward(out)

    worst = 0.0
    for probe in probes:
        analytic = probe.grad
        if analytic is None:
            analytic = np.zeros_like(probe.data)
        base = probe.data
        flat = base.reshape(-1)
        numeric = np.zeros_like(flat)
        for i in range(flat.size):
            for sign, slot in ((+1.0, 0), (-1.0, 1)):
                shifted = flat.copy()
                shifted[i] += sign * h
                args = [
                    Tensor(shifted.reshape(base.shape)) if p is probe else Tensor(p.data)
                    for p in probes
                ]
                val = scalar_fn(*args)
                if not np.isfinite(val.data).all():
                    raise FloatingPointError(
                        "scalar_fn produced a non-finite value during probing"
                    )
                if slot == 0:
                    numeric[i] = val.item()
                else:
                    numeric[i] = (numeric[i] - val.item()) / (2.0 * h)
        numeric = numeric.reshape(base.shape)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
        err = np.abs(analytic - numeric) / denom
        if err.size:
            worst = max(worst, float(err.max()))
    return worst
