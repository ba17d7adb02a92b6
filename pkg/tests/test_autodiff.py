"""Gradient and tape-semantics tests for the autodiff core.

Every op is checked against central finite differences (the independent
oracle) over multiple seeds and shape configurations.
"""

import numpy as np
import pytest

from latentscope.autodiff import (
    AdamState,
    BackwardRootError,
    ShapeMismatchError,
    Tape,
    Tensor,
    adam_step,
    grad_check,
    ops,
)

SEEDS = [0, 1, 2]


def _projected(op_fn):
    """Wrap an op so it returns a scalar via a fixed random projection.

    The projection weights are drawn once on the first call and reused,
    so the wrapped function is stable under finite-difference probing.
    """
    state = {}

    def fn(*tensors):
        out = op_fn(*tensors)
        if "w" not in state:
            state["w"] = Tensor(np.random.default_rng(99).standard_normal(out.shape))
        return ops.sum_all(ops.mul(out, state["w"]))

    return fn


def _safe(rng, shape, margin=0.05):
    """Random values bounded away from 0 (keeps relu differentiable)."""
    x = rng.standard_normal(shape)
    return x + np.sign(x) * margin


# (op label, config index) -> callable(seed) returning (scalar_fn, inputs)
def _case_matmul(rng, cfg):
    if cfg == 0:
        a, b = rng.standard_normal((4, 3)), rng.standard_normal((3, 2))
    else:
        a, b = rng.standard_normal((2, 4, 3)), rng.standard_normal((2, 3, 5))
    return (_projected(ops.matmul), [Tensor(a), Tensor(b)])


def _case_binary(op):
    def build(rng, cfg):
        if cfg == 0:
            a, b = rng.standard_normal((5, 4)), rng.standard_normal((5, 4))
        else:
            a, b = rng.standard_normal((3, 4, 5)), rng.standard_normal((5,))
        return (_projected(op), [Tensor(a), Tensor(b)])

    return build


def _case_unary(op, safe=False):
    def build(rng, cfg):
        shape = (7,) if cfg == 0 else (3, 4)
        x = _safe(rng, shape) if safe else rng.standard_normal(shape)
        return (_projected(op), [Tensor(x)])

    return build


def _case_conv1d(rng, cfg):
    if cfg == 0:
        x = rng.standard_normal((2, 3, 12))
        w = rng.standard_normal((4, 3, 3))
        stride = 1
    else:
        x = rng.standard_normal((1, 2, 16))
        w = rng.standard_normal((3, 2, 5))
        stride = 3
    return (
        _projected(lambda u, v: ops.conv1d(u, v, stride=stride)),
        [Tensor(x), Tensor(w)],
    )


def _case_conv1d_transpose(rng, cfg):
    if cfg == 0:
        y = rng.standard_normal((2, 3, 5))
        w = rng.standard_normal((3, 2, 3))
        stride, out_len = 2, None
    else:
        y = rng.standard_normal((1, 2, 4))
        w = rng.standard_normal((2, 3, 4))
        stride, out_len = 3, 15
    return (
        _projected(
            lambda u, v: ops.conv1d_transpose(u, v, stride=stride, output_length=out_len)
        ),
        [Tensor(y), Tensor(w)],
    )


def _case_lstm_cell(rng, cfg):
    b, n_in, h = (2, 3, 4) if cfg == 0 else (3, 5, 2)
    x = rng.standard_normal((b, n_in))
    hc = rng.standard_normal((b, 2 * h))
    w_ih = rng.standard_normal((n_in, 4 * h)) * 0.5
    w_hh = rng.standard_normal((h, 4 * h)) * 0.5
    bias = rng.standard_normal(4 * h) * 0.5
    return (
        _projected(ops.lstm_cell),
        [Tensor(x), Tensor(hc), Tensor(w_ih), Tensor(w_hh), Tensor(bias)],
    )


def _case_mha(rng, cfg):
    b, t, d, heads = (1, 6, 8, 2) if cfg == 0 else (2, 4, 4, 1)
    x = rng.standard_normal((b, t, d))
    mats = [rng.standard_normal((d, d)) / np.sqrt(d) for _ in range(4)]
    return (
        _projected(
            lambda xx, q, k, v, o: ops.multi_head_attention(xx, q, k, v, o, n_heads=heads)
        ),
        [Tensor(x)] + [Tensor(m) for m in mats],
    )


def _case_layer_norm(rng, cfg):
    shape = (4, 6) if cfg == 0 else (2, 3, 5)
    x = rng.standard_normal(shape)
    gamma = rng.standard_normal(shape[-1]) + 1.0
    beta = rng.standard_normal(shape[-1])
    return (
        _projected(ops.layer_norm),
        [Tensor(x), Tensor(gamma), Tensor(beta)],
    )


def _case_mean_pool_time(rng, cfg):
    shape = (2, 5, 3) if cfg == 0 else (1, 4, 1)
    return (
        _projected(ops.mean_pool_time),
        [Tensor(rng.standard_normal(shape))],
    )


def _case_reshape(rng, cfg):
    shape, new = ((6, 4), (3, 8)) if cfg == 0 else ((2, 3, 4), (24,))
    return (
        _projected(lambda u: ops.reshape(u, new)),
        [Tensor(rng.standard_normal(shape))],
    )


def _case_concat(rng, cfg):
    if cfg == 0:
        shapes, axis = [(3, 2), (2, 2)], 0
    else:
        shapes, axis = [(2, 2, 1), (2, 2, 3)], 2
    return (
        _projected(lambda *ts: ops.concat(ts, axis=axis)),
        [Tensor(rng.standard_normal(s)) for s in shapes],
    )


def _case_slice(rng, cfg):
    if cfg == 0:
        shape, axis, lo, hi = (6, 4), 0, 1, 4
    else:
        shape, axis, lo, hi = (2, 8), 1, 3, 7
    return (
        _projected(lambda u: ops.slice_axis(u, axis, lo, hi)),
        [Tensor(rng.standard_normal(shape))],
    )


OP_CASES = {
    "matmul": _case_matmul,
    "add": _case_binary(ops.add),
    "mul": _case_binary(ops.mul),
    "sub": _case_binary(ops.sub),
    "conv1d": _case_conv1d,
    "conv1d_transpose": _case_conv1d_transpose,
    "lstm_cell": _case_lstm_cell,
    "multi_head_attention": _case_mha,
    "layer_norm": _case_layer_norm,
    "softmax": _case_unary(ops.softmax),
    "relu": _case_unary(ops.relu, safe=True),
    "tanh": _case_unary(ops.tanh),
    "sigmoid": _case_unary(ops.sigmoid),
    "exp": _case_unary(ops.exp),
    "mean_pool_time": _case_mean_pool_time,
    "reshape": _case_reshape,
    "concat": _case_concat,
    "slice": _case_slice,
}


@pytest.mark.parametrize("op_name", sorted(OP_CASES))
@pytest.mark.parametrize("seed", SEEDS)
@pytest.mark.parametrize("cfg", [0, 1])
def test_grad_check_all_ops(op_name, seed, cfg):
    rng = np.random.default_rng(seed)
    fn, inputs = OP_CASES[op_name](rng, cfg)
    err = grad_check(fn, inputs, h=1e-6)
    assert err < 1e-4, f"{op_name} cfg={cfg} seed={seed}: rel err {err}"


# ---------------------------------------------------------------------------
# spec examples
# ---------------------------------------------------------------------------

def test_matmul_identity():
    a = Tensor([[1.0, 2.0], [3.0, 4.0]])
    eye = Tensor(np.eye(2))
    out = ops.matmul(a, eye)
    np.testing.assert_array_equal(out.data, a.data)


def test_mean_pool_time_example():
    x = Tensor(np.array([1.0, 2.0, 3.0, 4.0]).reshape(1, 4, 1))
    out = ops.mean_pool_time(x)
    np.testing.assert_allclose(out.data, [[2.5]])


def test_conv1d_length_and_window_counts():
    # len 8, kernel 3, stride 1 -> len 6; with an all-ones kernel the
    # gradient of the output sum w.r.t. x counts the windows covering
    # each position: 1,2,3,3,3,3,2,1
    x = Tensor(np.arange(8.0).reshape(1, 1, 8), requires_grad=True)
    k = Tensor(np.ones((1, 1, 3)))
    with Tape() as tape:
        out = ops.conv1d(x, k, stride=1)
        total = ops.sum_all(out)
    assert out.shape == (1, 1, 6)
    tape.backward(total)
    np.testing.assert_allclose(
        x.grad.reshape(-1), [1, 2, 3, 3, 3, 3, 2, 1]
    )
    # cross-check against the finite-difference oracle
    err = grad_check(lambda u: ops.sum_all(ops.conv1d(u, k, stride=1)), Tensor(x.data))
    assert err < 1e-6


def test_grad_check_square_at_3():
    x = Tensor(np.array(3.0))
    err = grad_check(lambda t: ops.mul(t, t), x)
    assert err < 1e-8


def test_grad_check_softmax_cross_entropy():
    rng = np.random.default_rng(5)
    logits = Tensor(rng.standard_normal(5))
    onehot = Tensor(np.eye(5)[2])

    def ce(z):
        p = ops.softmax(z)
        return ops.sub(Tensor(0.0), ops.sum_all(ops.mul(onehot, ops.log(p))))

    assert grad_check(ce, logits) < 1e-4


def test_grad_check_attention_example():
    fn, inputs = _case_mha(np.random.default_rng(11), 0)
    assert grad_check(fn, inputs) < 1e-4


# ---------------------------------------------------------------------------
# tape semantics
# ---------------------------------------------------------------------------

def test_diamond_graph_linearity():
    # y = f(x) + g(x): gradient equals the sum of the path gradients
    x = Tensor(np.array([1.5, -0.5, 2.0]), requires_grad=True)
    with Tape() as tape:
        p1 = ops.mul(x, x)
        p2 = ops.mul(x, Tensor([3.0, 3.0, 3.0]))
        y = ops.sum_all(ops.add(p1, p2))
    tape.backward(y)
    np.testing.assert_allclose(x.grad, 2 * x.data + 3.0)


def test_deterministic_replay():
    def run():
        rng = np.random.default_rng(7)
        x = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        w = Tensor(rng.standard_normal((4, 2)), requires_grad=True)
        with Tape() as tape:
            out = ops.tanh(ops.matmul(x, w))
            loss = ops.sum_all(ops.mul(out, out))
        tape.backward(loss)
        return loss.data.copy(), x.grad.copy(), w.grad.copy()

    first = run()
    second = run()
    for a, b in zip(first, second):
        assert np.array_equal(a, b)


@pytest.mark.parametrize("seed", SEEDS)
def test_conv_transpose_is_adjoint(seed):
    rng = np.random.default_rng(seed)
    x = Tensor(rng.standard_normal((2, 3, 17)))
    k = Tensor(rng.standard_normal((4, 3, 5)))
    stride = 3
    y = Tensor(rng.standard_normal((2, 4, (17 - 5) // stride + 1)))
    lhs = float(np.sum(ops.conv1d(x, k, stride=stride).data * y.data))
    back = ops.conv1d_transpose(y, k, stride=stride, output_length=17)
    rhs = float(np.sum(x.data * back.data))
    assert abs(lhs - rhs) < 1e-10


def test_non_scalar_backward_root_rejected():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with Tape() as tape:
        y = ops.mul(x, x)
    with pytest.raises(BackwardRootError):
        tape.backward(y)


def test_shape_mismatch_names_op():
    with pytest.raises(ShapeMismatchError, match="matmul"):
        ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))
    with pytest.raises(ShapeMismatchError, match="conv1d"):
        ops.conv1d(Tensor(np.ones((1, 2, 8))), Tensor(np.ones((3, 5, 3))))


def test_op_dispatch_matches_native():
    a = Tensor(np.arange(6.0).reshape(2, 3))
    b = Tensor(np.arange(12.0).reshape(3, 4))
    via_dispatch = ops.op_forward_backward("matmul", [a, b])
    np.testing.assert_array_equal(via_dispatch.data, ops.matmul(a, b).data)
    with pytest.raises(KeyError):
        ops.op_forward_backward("not_an_op", [a])


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

def test_adam_zero_gradient_keeps_params():
    p = Tensor(np.array([1.0, -2.0]))
    state = AdamState(lr=0.1)
    adam_step({"p": p}, {"p": np.zeros(2)}, state)
    np.testing.assert_array_equal(p.data, [1.0, -2.0])
    assert state.step == 1


def test_adam_first_step_hand_evaluated():
    # bias correction makes the first step ~ lr * sign(g)
    p = Tensor(np.array(1.0))
    state = AdamState(lr=0.1, beta1=0.9, beta2=0.999, epsilon=1e-8)
    adam_step({"p": p}, {"p": np.array(1.0)}, state)
    m_hat = (0.1 * 1.0) / (1 - 0.9)
    v_hat = (0.001 * 1.0) / (1 - 0.999)
    expected = 1.0 - 0.1 * m_hat / (np.sqrt(v_hat) + 1e-8)
    np.testing.assert_allclose(p.item(), expected)
    assert abs(p.item() - 0.9) < 1e-6


def test_adam_descends_quadratic():
    p = Tensor(np.array(2.0))
    state = AdamState(lr=0.05)
    losses = []
    for _ in range(2):
        losses.append(p.item() ** 2)
        adam_step({"p": p}, {"p": np.array(2.0 * p.item())}, state)
    assert p.item() ** 2 < losses[0]
    assert losses[1] < losses[0]


def test_adam_rejects_non_finite_gradient():
    from latentscope.autodiff import NonFiniteGradientError

    p = Tensor(np.array([1.0]))
    with pytest.raises(NonFiniteGradientError, match="p"):
        adam_step({"p": p}, {"p": np.array([np.nan])}, AdamState())
