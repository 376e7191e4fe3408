import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from refground.ndauto import (
    NonFiniteError,
    ShapeError,
    Tensor,
    concat,
    grad_check,
    maximum,
    minimum,
    no_grad,
)


def rand(seed, shape, lo=-2.0, hi=2.0):
    return np.random.default_rng(seed).uniform(lo, hi, shape)


def test_softmax_uniform_on_equal_inputs():
    out = Tensor([0.0, 0.0, 0.0]).softmax(axis=0)
    np.testing.assert_allclose(out.data, [1 / 3, 1 / 3, 1 / 3], atol=1e-12)


def test_sigmoid_at_zero():
    assert Tensor([0.0]).sigmoid().item() == 0.5


def test_topk_direct_selection():
    out = Tensor([0.9, 0.1, 0.8, 0.7]).topk(2)
    np.testing.assert_allclose(out.data, [0.9, 0.8])


def test_topk_tie_prefers_lower_index():
    x = Tensor([1.0, 2.0, 2.0, 0.0], requires_grad=True)
    out = x.topk(2)
    out.sum().backward()
    np.testing.assert_array_equal(x.grad, [0.0, 1.0, 1.0, 0.0])
    # tie covering only one of the duplicates
    y = Tensor([2.0, 1.0, 2.0], requires_grad=True)
    y.topk(1).sum().backward()
    np.testing.assert_array_equal(y.grad, [1.0, 0.0, 0.0])


def test_max_tie_routes_to_lowest_index():
    x = Tensor([[1.0, 3.0, 3.0]], requires_grad=True)
    x.max(axis=1).sum().backward()
    np.testing.assert_array_equal(x.grad, [[0.0, 1.0, 0.0]])


def test_shape_mismatch_names_operation_and_shapes():
    with pytest.raises(ShapeError, match=r"matmul.*\(2, 3\).*\(2, 3\)"):
        Tensor(np.zeros((2, 3))) @ Tensor(np.zeros((2, 3)))
    with pytest.raises(ShapeError, match="add"):
        Tensor(np.zeros(3)) + Tensor(np.zeros(4))


def test_softmax_empty_axis_fails():
    with pytest.raises(ShapeError, match="softmax"):
        Tensor(np.zeros((2, 0))).softmax(axis=1)


def test_gradient_accumulation_is_exact():
    x = Tensor(rand(3, (5,)), requires_grad=True)
    (x.sigmoid().sum() + x.sigmoid().sum()).backward()
    double = x.grad.copy()
    x.zero_grad()
    x.sigmoid().sum().backward()
    np.testing.assert_array_equal(double, 2.0 * x.grad)


def test_no_grad_suppresses_graph():
    x = Tensor(rand(0, (3,)), requires_grad=True)
    with no_grad():
        y = x.sigmoid()
    assert not y.requires_grad and y._prev == ()


def test_backward_requires_scalar():
    x = Tensor(rand(0, (3,)), requires_grad=True)
    with pytest.raises(ValueError):
        (x * 2.0).backward()


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-30, 30), min_size=1, max_size=12))
def test_softmax_rows_sum_to_one(values):
    s = Tensor(np.array(values)).softmax(axis=0).data
    assert abs(s.sum() - 1.0) < 1e-9
    assert np.all(s >= 0.0) and np.all(s <= 1.0)


def _masked_fill_fn(t):
    mask = np.zeros(t.shape, dtype=bool)
    mask.reshape(-1)[::3] = True
    return t.masked_fill(mask, -3.0).sigmoid().sum()


PRIMITIVE_CASES = {
    "add": lambda t: (t + t * 0.5).sum(),
    "sub": lambda t: (t - t.sigmoid()).sum(),
    "mul": lambda t: (t * t).sum(),
    "div": lambda t: (t / (t.sigmoid() + 1.0)).sum(),
    "neg": lambda t: (-t).sigmoid().sum(),
    "matmul": lambda t: (t @ t.transpose(1, 0)).sum(),
    "exp": lambda t: (t * 0.3).exp().sum(),
    "log": lambda t: (t.sigmoid() + 0.5).log().sum(),
    "sigmoid": lambda t: t.sigmoid().sum(),
    "tanh": lambda t: t.tanh().sum(),
    "gelu": lambda t: t.gelu().sum(),
    "powr": lambda t: (t * t).powr(1.5).sum(),
    "abs": lambda t: t.abs().sum(),
    "clip": lambda t: t.clip(-1.5, 1.5).sigmoid().sum(),
    "sum_axis": lambda t: t.sum(axis=1).sigmoid().sum(),
    "mean_axis": lambda t: t.mean(axis=0).sigmoid().sum(),
    "max_axis": lambda t: t.max(axis=1).sum(),
    "topk": lambda t: t.topk(5).sum(),
    "reshape": lambda t: t.reshape(-1).sigmoid().sum(),
    "transpose": lambda t: t.transpose(1, 0).sigmoid().sum(),
    "broadcast": lambda t: t.reshape(4, 1, 4).broadcast_to((4, 3, 4)).sigmoid().sum(),
    "slice": lambda t: t[1:3, ::2].sigmoid().sum(),
    "gather": lambda t: t.gather(np.array([2, 0, 2]), axis=0).sum(),
    "masked_fill": _masked_fill_fn,
    "softmax": lambda t: (t.softmax(axis=1) * np.arange(4.0)).sum(),
    "l2_normalize": lambda t: (t.l2_normalize(axis=1) * np.arange(4.0)).sum(),
    "concat": lambda t: concat([t, t * 2.0], axis=1).sigmoid().sum(),
    "maximum": lambda t: maximum(t, t.sigmoid()).sum(),
    "minimum": lambda t: minimum(t, -t).sum(),
    "upsample_nearest": lambda t: t.reshape(2, 2, 4).upsample_nearest(2).sigmoid().sum(),
    "avg_pool2d": lambda t: t.reshape(4, 4, 1).avg_pool2d(2).sigmoid().sum(),
}


@pytest.mark.parametrize("name", sorted(PRIMITIVE_CASES))
def test_primitive_gradients_match_central_differences(name):
    fn = PRIMITIVE_CASES[name]
    for seed in range(10):
        x = Tensor(rand(seed, (4, 4)), requires_grad=True)
        assert grad_check(fn, x) < 1e-5, f"{name} failed at seed {seed}"


def test_grad_check_constant_function_zero_gradient():
    x = Tensor(rand(7, (4,)), requires_grad=True)
    assert grad_check(lambda t: Tensor([1.5]).sum() + 0.0 * t.sum(), x) == 0.0


def test_grad_check_flags_nonfinite_intermediate_with_op_name():
    x = Tensor(np.array([100.0, 200.0]), requires_grad=True)
    with np.errstate(over="ignore"):
        with pytest.raises(NonFiniteError, match="exp"):
            grad_check(lambda t: (t * 10.0).exp().sum(), x)


def test_gather_rejects_out_of_range():
    with pytest.raises(IndexError):
        Tensor(np.zeros((3, 2))).gather(np.array([3]), axis=0)


def test_avg_pool_preserves_constants_and_upsample_inverts():
    x = Tensor(np.full((4, 4, 2), 0.7))
    pooled = x.avg_pool2d(2)
    np.testing.assert_allclose(pooled.data, 0.7)
    up = pooled.upsample_nearest(2)
    np.testing.assert_allclose(up.data, 0.7)


def test_topk_out_of_range_k():
    with pytest.raises(ShapeError):
        Tensor(np.zeros(3)).topk(4)
    with pytest.raises(ShapeError):
        Tensor(np.zeros(3)).topk(0)
