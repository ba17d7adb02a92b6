"""Differentiable tensor ops.

Every op validates shapes, computes its forward value eagerly, and (when
a tape is active) records a node carrying the backward rule.  Backward
rules return one gradient per input, or ``None`` for inputs that cannot
receive gradients (e.g. integer-like metadata is never a Tensor here).

Fused ops (conv1d, lstm_cell, layer_norm, softmax, ...) carry
hand-derived backward rules; multi_head_attention is a composite that
records its constituent primitives.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .tensor import ShapeMismatchError, Tape, TapeNode, Tensor, active_tape


def _record(op_name, inputs, out_data, backward_fn) -> Tensor:
    out = Tensor(out_data, requires_grad=any(t.requires_grad for t in inputs))
    tape = active_tape()
    if tape is not None:
        tape.record(TapeNode(op_name, inputs, out, backward_fn))
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcasted gradient back to the operand's shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatchError(
            f"{op}: shapes {a.shape} and {b.shape} are not broadcastable"
        ) from None


# ---------------------------------------------------------------------------
# elementwise / linear algebra
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("add", a, b)
    out = a.data + b.data

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _record("add", (a, b), out, backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("sub", a, b)
    out = a.data - b.data

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _record("sub", (a, b), out, backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("mul", a, b)
    out = a.data * b.data

    def backward(g):
        return (
            _unbroadcast(g * b.data, a.shape),
            _unbroadcast(g * a.data, b.shape),
        )

    return _record("mul", (a, b), out, backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product: 2D@2D, 3D@2D (stacked), or 3D@3D (batched)."""
    ad, bd = a.data, b.data
    need_a, need_b = a.requires_grad, b.requires_grad
    if ad.ndim == 2 and bd.ndim == 2:
        if ad.shape[1] != bd.shape[0]:
            raise ShapeMismatchError(
                f"matmul: inner dims {ad.shape[1]} != {bd.shape[0]} "
                f"for {ad.shape} @ {bd.shape}"
            )

        def backward(g):
            return (
                g @ bd.T if need_a else None,
                ad.T @ g if need_b else None,
            )

    elif ad.ndim == 3 and bd.ndim == 2:
        if ad.shape[2] != bd.shape[0]:
            raise ShapeMismatchError(
                f"matmul: inner dims {ad.shape[2]} != {bd.shape[0]} "
                f"for {ad.shape} @ {bd.shape}"
            )

        def backward(g):
            return (
                g @ bd.T if need_a else None,
                np.einsum("bti,btj->ij", ad, g, optimize=True) if need_b else None,
            )

    elif ad.ndim == 3 and bd.ndim == 3:
        if ad.shape[0] != bd.shape[0] or ad.shape[2] != bd.shape[1]:
            raise ShapeMismatchError(
                f"matmul: incompatible batched shapes {ad.shape} @ {bd.shape}"
            )

        def backward(g):
            return (
                g @ bd.transpose(0, 2, 1) if need_a else None,
                ad.transpose(0, 2, 1) @ g if need_b else None,
            )

    else:
        raise ShapeMismatchError(
            f"matmul: unsupported ranks {ad.shape} @ {bd.shape}"
        )
    return _record("matmul", (a, b), ad @ bd, backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _record("relu", (x,), x.data * mask, lambda g: (g * mask,))


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return _record("tanh", (x,), out, lambda g: (g * (1.0 - out * out),))


def sigmoid(x: Tensor) -> Tensor:
    out = _sigmoid(x.data)
    return _record("sigmoid", (x,), out, lambda g: (g * out * (1.0 - out),))


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return _record("exp", (x,), out, lambda g: (g * out,))


def log(x: Tensor) -> Tensor:
    out = np.log(x.data)
    return _record("log", (x,), out, lambda g: (g / x.data,))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # numerically stable two-sided form
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - dot),)

    return _record("softmax", (x,), out, backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    n = x.shape[-1]
    if gamma.shape != (n,) or beta.shape != (n,):
        raise ShapeMismatchError(
            f"layer_norm: gamma/beta shapes {gamma.shape}/{beta.shape} "
            f"do not match feature dim {n}"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = gamma.data * xhat + beta.data

    def backward(g):
        reduce_axes = tuple(range(g.ndim - 1))
        dbeta = g.sum(axis=reduce_axes)
        dgamma = (g * xhat).sum(axis=reduce_axes)
        gh = g * gamma.data
        dx = inv / n * (
            n * gh
            - gh.sum(axis=-1, keepdims=True)
            - xhat * (gh * xhat).sum(axis=-1, keepdims=True)
        )
        return dx, dgamma, dbeta

    return _record("layer_norm", (x, gamma, beta), out, backward)


# ---------------------------------------------------------------------------
# shape manipulation
# ---------------------------------------------------------------------------

def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeMismatchError(
            f"reshape: cannot view {x.shape} as {shape}"
        ) from None
    return _record("reshape", (x,), out, lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(int(a) for a in axes)
    if sorted(axes) != list(range(x.ndim)):
        raise ShapeMismatchError(f"transpose: axes {axes} invalid for rank {x.ndim}")
    inv = np.argsort(axes)
    out = x.data.transpose(axes)
    return _record("transpose", (x,), out, lambda g: (g.transpose(inv),))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeMismatchError("concat: empty input list")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        return tuple(
            np.take(g, np.arange(offsets[i], offsets[i + 1]), axis=axis)
            for i in range(len(tensors))
        )

    return _record("concat", tuple(tensors), out, backward)


def slice_axis(x: Tensor, axis: int, start: int, stop: int) -> Tensor:
    """Contiguous slice [start, stop) along one axis."""
    n = x.shape[axis]
    if not (0 <= start < stop <= n):
        raise ShapeMismatchError(
            f"slice: [{start}, {stop}) out of range for axis {axis} of size {n}"
        )
    idx = [slice(None)] * x.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    out = x.data[idx]

    def backward(g):
        full = np.zeros(x.shape, dtype=g.dtype)
        full[idx] = g
        return (full,)

    return _record("slice", (x,), out, backward)


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------

def sum_all(x: Tensor) -> Tensor:
    out = x.data.sum()
    return _record("sum", (x,), out, lambda g: (np.broadcast_to(g, x.shape).copy(),))


def mean_all(x: Tensor) -> Tensor:
    n = x.size
    out = x.data.mean()
    return _record(
        "mean", (x,), out, lambda g: (np.broadcast_to(g / n, x.shape).copy(),)
    )


def mean_pool_time(x: Tensor) -> Tensor:
    """Mean over the time axis of a (batch, time, features) tensor."""
    if x.ndim != 3:
        raise ShapeMismatchError(f"mean_pool_time: expected rank 3, got {x.shape}")
    t = x.shape[1]
    out = x.data.mean(axis=1)

    def backward(g):
        return (np.repeat(g[:, None, :] / t, t, axis=1),)

    return _record("mean_pool_time", (x,), out, backward)


# ---------------------------------------------------------------------------
# convolutions
# ---------------------------------------------------------------------------

def _conv_windows(x: np.ndarray, k: int, stride: int) -> np.ndarray:
    """Strided (B, C, L_out, K) view over the last axis (no copy)."""
    b, c, n = x.shape
    l_out = (n - k) // stride + 1
    s0, s1, s2 = x.strides
    return np.lib.stride_tricks.as_strided(
        x, shape=(b, c, l_out, k), strides=(s0, s1, s2 * stride, s2), writeable=False
    )


def _conv_scatter(g: np.ndarray, w: np.ndarray, stride: int, l_in: int) -> np.ndarray:
    """Adjoint of the conv gather: spread (B, O, L_out) back to (B, C, L_in)."""
    b, _, l_out = g.shape
    k = w.shape[2]
    contrib = np.einsum("boi,ock->bcik", g, w, optimize=True)
    out = np.zeros((b, w.shape[1], l_in), dtype=g.dtype)
    for j in range(k):
        out[:, :, j : j + l_out * stride : stride] += contrib[:, :, :, j]
    return out


def conv1d(x: Tensor, w: Tensor, stride: int = 1) -> Tensor:
    """1D valid (no padding) convolution.

    x: (batch, in_channels, length); w: (out_channels, in_channels, kernel).
    Output length is (length - kernel) // stride + 1.
    """
    if x.ndim != 3 or w.ndim != 3:
        raise ShapeMismatchError(
            f"conv1d: expected rank-3 input and kernel, got {x.shape}, {w.shape}"
        )
    if x.shape[1] != w.shape[1]:
        raise ShapeMismatchError(
            f"conv1d: input channels {x.shape[1]} != kernel channels {w.shape[1]}"
        )
    if x.shape[2] < w.shape[2]:
        raise ShapeMismatchError(
            f"conv1d: length {x.shape[2]} shorter than kernel {w.shape[2]}"
        )
    xd = np.ascontiguousarray(x.data)
    win = _conv_windows(xd, w.shape[2], stride)
    out = np.einsum("bcik,ock->boi", win, w.data, optimize=True)

    def backward(g):
        gx = _conv_scatter(g, w.data, stride, x.shape[2]) if x.requires_grad else None
        gw = np.einsum("bcik,boi->ock", win, g, optimize=True) if w.requires_grad else None
        return gx, gw

    return _record("conv1d", (x, w), out, backward)


def conv1d_transpose(
    y: Tensor, w: Tensor, stride: int = 1, output_length: Optional[int] = None
) -> Tensor:
    """Transposed 1D convolution: the exact adjoint of :func:`conv1d`.

    y: (batch, out_channels, l_out); w: (out_channels, in_channels, kernel).
    ``output_length`` selects the original input length when the forward
    conv discarded trailing samples; default is the minimal length
    (l_out - 1) * stride + kernel.
    """
    if y.ndim != 3 or w.ndim != 3:
        raise ShapeMismatchError(
            f"conv1d_transpose: expected rank-3 input and kernel, "
            f"got {y.shape}, {w.shape}"
        )
    if y.shape[1] != w.shape[0]:
        raise ShapeMismatchError(
            f"conv1d_transpose: channels {y.shape[1]} != kernel out {w.shape[0]}"
        )
    k = w.shape[2]
    l_out = y.shape[2]
    minimal = (l_out - 1) * stride + k
    l_in = minimal if output_length is None else int(output_length)
    if l_in < minimal:
        raise ShapeMismatchError(
            f"conv1d_transpose: output_length {l_in} < minimal {minimal}"
        )
    out = _conv_scatter(np.ascontiguousarray(y.data), w.data, stride, l_in)

    def backward(g):
        gc = np.ascontiguousarray(g)
        win = _conv_windows(gc, k, stride)
        win = win[:, :, :l_out]
        gy = np.einsum("bcik,ock->boi", win, w.data, optimize=True) if y.requires_grad else None
        gw = np.einsum("bcik,boi->ock", win, y.data, optimize=True) if w.requires_grad else None
        return gy, gw

    return _record("conv1d_transpose", (y, w), out, backward)


# ---------------------------------------------------------------------------
# recurrent cell
# ---------------------------------------------------------------------------

def lstm_cell(x: Tensor, hc: Tensor, w_ih: Tensor, w_hh: Tensor, b: Tensor) -> Tensor:
    """One LSTM step; state is packed as (batch, 2*hidden) = [h, c].

    Gate layout in the weight matrices is (input, forget, cell, output).
    Returns the packed next state [h', c'].
    """
    if hc.ndim != 2 or hc.shape[1] % 2 != 0:
        raise ShapeMismatchError(f"lstm_cell: bad state shape {hc.shape}")
    hidden = hc.shape[1] // 2
    if w_ih.shape != (x.shape[1], 4 * hidden) or w_hh.shape != (hidden, 4 * hidden):
        raise ShapeMismatchError(
            f"lstm_cell: weight shapes {w_ih.shape}/{w_hh.shape} do not match "
            f"input {x.shape[1]} and hidden {hidden}"
        )
    if b.shape != (4 * hidden,):
        raise ShapeMismatchError(f"lstm_cell: bias shape {b.shape}")
    h = hc.data[:, :hidden]
    c = hc.data[:, hidden:]
    gates = x.data @ w_ih.data + h @ w_hh.data + b.data
    i = _sigmoid(gates[:, :hidden])
    f = _sigmoid(gates[:, hidden : 2 * hidden])
    g_ = np.tanh(gates[:, 2 * hidden : 3 * hidden])
    o = _sigmoid(gates[:, 3 * hidden :])
    c_new = f * c + i * g_
    tc = np.tanh(c_new)
    h_new = o * tc
    out = np.concatenate([h_new, c_new], axis=1)

    def backward(grad):
        dh = grad[:, :hidden]
        dc_direct = grad[:, hidden:]
        do = dh * tc
        dc = dh * o * (1.0 - tc * tc) + dc_direct
        di = dc * g_
        df = dc * c
        dg = dc * i
        dc_prev = dc * f
        dgates = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g_ * g_),
                do * o * (1.0 - o),
            ],
            axis=1,
        )
        dx = dgates @ w_ih.data.T
        dh_prev = dgates @ w_hh.data.T
        dhc = np.concatenate([dh_prev, dc_prev], axis=1)
        dw_ih = x.data.T @ dgates
        dw_hh = h.T @ dgates
        db = dgates.sum(axis=0)
        return dx, dhc, dw_ih, dw_hh, db

    return _record("lstm_cell", (x, hc, w_ih, w_hh, b), out, backward)


# ---------------------------------------------------------------------------
# attention (composite)
# ---------------------------------------------------------------------------

def multi_head_attention(
    x: Tensor, wq: Tensor, wk: Tensor, wv: Tensor, wo: Tensor, n_heads: int
) -> Tensor:
    """Scaled dot-product self-attention over (batch, time, d_model).

    Composite op: records its primitive nodes, so gradients flow without
    a dedicated backward rule.
    """
    if x.ndim != 3:
        raise ShapeMismatchError(
            f"multi_head_attention: expected rank-3 input, got {x.shape}"
        )
    b, t, d = x.shape
    if d % n_heads != 0:
        raise ShapeMismatchError(
            f"multi_head_attention: d_model {d} not divisible by {n_heads} heads"
        )
    for name, w in (("wq", wq), ("wk", wk), ("wv", wv), ("wo", wo)):
        if w.shape != (d, d):
            raise ShapeMismatchError(
                f"multi_head_attention: {name} shape {w.shape} != ({d}, {d})"
            )
    dk = d // n_heads

    def split_heads(m: Tensor) -> Tensor:
        m = reshape(m, (b, t, n_heads, dk))
        m = transpose(m, (0, 2, 1, 3))
        return reshape(m, (b * n_heads, t, dk))

    q = split_heads(matmul(x, wq))
    k = split_heads(matmul(x, wk))
    v = split_heads(matmul(x, wv))
    scores = matmul(q, transpose(k, (0, 2, 1)))
    scores = mul(scores, Tensor(1.0 / np.sqrt(dk)))
    attn = softmax(scores)
    ctx = matmul(attn, v)
    ctx = reshape(ctx, (b, n_heads, t, dk))
    ctx = transpose(ctx, (0, 2, 1, 3))
    ctx = reshape(ctx, (b, t, d))
    return matmul(ctx, wo)


# ---------------------------------------------------------------------------
# generic dispatch
# ---------------------------------------------------------------------------

_DISPATCH = {
    "matmul": lambda inputs, p: matmul(*inputs),
    "add": lambda inputs, p: add(*inputs),
    "mul": lambda inputs, p: mul(*inputs),
    "sub": lambda inputs, p: sub(*inputs),
    "exp": lambda inputs, p: exp(*inputs),
    "log": lambda inputs, p: log(*inputs),
    "conv1d": lambda inputs, p: conv1d(*inputs, stride=p.get("stride", 1)),
    "conv1d_transpose": lambda inputs, p: conv1d_transpose(
        *inputs, stride=p.get("stride", 1), output_length=p.get("output_length")
    ),
    "lstm_cell": lambda inputs, p: lstm_cell(*inputs),
    "multi_head_attention": lambda inputs, p: multi_head_attention(
        *inputs, n_heads=p["n_heads"]
    ),
    "layer_norm": lambda inputs, p: layer_norm(*inputs, eps=p.get("eps", 1e-5)),
    "softmax": lambda inputs, p: softmax(*inputs),
    "relu": lambda inputs, p: relu(*inputs),
    "tanh": lambda inputs, p: tanh(*inputs),
    "sigmoid": lambda inputs, p: sigmoid(*inputs),
    "mean_pool_time": lambda inputs, p: mean_pool_time(*inputs),
    "reshape": lambda inputs, p: reshape(*inputs, shape=p["shape"]),
    "transpose": lambda inputs, p: transpose(*inputs, axes=p["axes"]),
    "concat": lambda inputs, p: concat(inputs, axis=p.get("axis", 0)),
    "slice": lambda inputs, p: slice_axis(
        *inputs, axis=p.get("axis", 0), start=p["start"], stop=p["stop"]
    ),
    "sum": lambda inputs, p: sum_all(*inputs),
    "mean": lambda inputs, p: mean_all(*inputs),
}


def op_forward_backward(op_name: str, inputs: Sequence[Tensor], params=None) -> Tensor:
    """Run a named op on the active tape.

    Single entry point used by generic callers; the module-level
    functions are the same ops with native signatures.
    """
    if op_name not in _DISPATCH:
        raise KeyError(f"unknown op {op_name!r}")
    return _DISPATCH[op_name](tuple(inputs), params or {})
