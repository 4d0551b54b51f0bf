import math

import numpy as np
import pytest

from prodalign import diffcore as dc
from prodalign.diffcore import Tensor, grad_check


def test_relu_forward():
    out = dc.relu(dc.constant([-1.0, 2.0]))
    assert np.array_equal(out.data, [0.0, 2.0])


def test_softmax_symmetry():
    out = dc.softmax(dc.constant([0.0, 0.0]))
    assert np.allclose(out.data, [0.5, 0.5], atol=1e-15)


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(3)
    x = dc.constant(rng.normal(size=(7, 5)) * 10)
    out = dc.softmax(x)
    assert np.all(np.abs(out.data.sum(axis=1) - 1.0) <= 1e-12)


def test_matmul_all_ones():
    a = dc.constant(np.ones((2, 3)))
    b = dc.constant(np.ones((3, 1)))
    out = dc.matmul(a, b)
    assert out.shape == (2, 1)
    assert np.all(out.data == 3.0)


def test_matmul_shape_mismatch_names_op_and_shapes():
    with pytest.raises(dc.ShapeError) as e:
        dc.matmul(dc.constant(np.ones((2, 3))), dc.constant(np.ones((4, 1))))
    msg = str(e.value)
    assert "matmul" in msg and "(2, 3)" in msg and "(4, 1)" in msg


def test_add_shape_mismatch():
    with pytest.raises(dc.ShapeError):
        dc.add(dc.constant(np.ones((2, 3))), dc.constant(np.ones((3, 2))))


def test_cosine_sim_identical_direction():
    a = dc.constant([3.0, 4.0])
    b = dc.constant([3.0, 4.0])
    assert dc.cosine_sim(a, b).item() == pytest.approx(1.0, abs=1e-12)


def test_cosine_sim_orthogonal():
    assert dc.cosine_sim(dc.constant([1.0, 0.0]), dc.constant([0.0, 1.0])).item() == 0.0


def test_cosine_sim_closed_form():
    # 1/sqrt(2) for (1,0) vs (1,1)
    got = dc.cosine_sim(dc.constant([1.0, 0.0]), dc.constant([1.0, 1.0])).item()
    assert got == pytest.approx(math.sqrt(0.5), abs=1e-12)


def test_cosine_sim_zero_norm_errors():
    with pytest.raises(dc.ZeroNormError):
        dc.cosine_sim(dc.constant([0.0, 0.0]), dc.constant([1.0, 0.0]))


def test_backward_deterministic_bit_identical():
    rng = np.random.default_rng(0)
    w = dc.parameter(rng.normal(size=(4, 4)))
    x = dc.constant(rng.normal(size=(5, 4)))

    def run():
        w.zero_grad()
        h = dc.relu(dc.matmul(x, dc.transpose(w)))
        loss = dc.mean(dc.mul(h, h))
        loss.backward()
        return w.grad.copy()

    g1, g2 = run(), run()
    assert g1.tobytes() == g2.tobytes()


def test_grad_check_quadratic_exact():
    x = dc.parameter([3.0])

    def f():
        return dc.tsum(dc.mul(x, x))

    err = grad_check(f, [x])
    x.zero_grad()
    loss = f()
    loss.backward()
    assert x.grad[0] == pytest.approx(6.0, abs=1e-12)
    assert err < 1e-8


@pytest.mark.parametrize(
    "build",
    [
        lambda x: dc.tsum(dc.relu(x)),
        lambda x: dc.tsum(dc.sigmoid(x)),
        lambda x: dc.tsum(dc.softplus(x)),
        lambda x: dc.tsum(dc.exp(dc.scale(x, 0.3))),
        lambda x: dc.tsum(dc.softmax(x)),
        lambda x: dc.tsum(dc.logsumexp(x)),
        lambda x: dc.tsum(dc.l2_normalize(x)),
        lambda x: dc.mean(dc.mul(x, x)),
    ],
)
def test_grad_check_elementwise_ops(build):
    rng = np.random.default_rng(11)
    x = dc.parameter(rng.normal(size=(3, 4)) + 0.1)

    def f():
        return build(x)

    assert grad_check(f, [x]) < 1e-6


def test_grad_check_matmul_and_layer_norm():
    rng = np.random.default_rng(7)
    w = dc.parameter(rng.normal(size=(4, 6)))
    g = dc.parameter(rng.normal(size=(4,)))
    b = dc.parameter(rng.normal(size=(4,)))
    x = dc.constant(rng.normal(size=(5, 6)))

    def f():
        h = dc.matmul(x, dc.transpose(w))
        return dc.mean(dc.mul(dc.layer_norm(h, g, b), dc.layer_norm(h, g, b)))

    assert grad_check(f, [w, g, b]) < 1e-6


def test_grad_check_embedding_rowsel_concat():
    rng = np.random.default_rng(13)
    table = dc.parameter(rng.normal(size=(6, 3)))
    ids = np.array([0, 2, 2, 5])
    sel = np.array([1, 0, 2, 1])

    def f():
        e = dc.embedding(table, ids)
        m = dc.concat([e, dc.scale(e, 2.0)], axis=1)
        return dc.tsum(dc.rowsel(m, sel))

    assert grad_check(f, [table]) < 1e-8


def test_grad_check_mean_pool_and_stack_rows():
    rng = np.random.default_rng(17)
    v1 = dc.parameter(rng.normal(size=(4,)))
    v2 = dc.parameter(rng.normal(size=(4,)))

    def f():
        m = dc.stack_rows([v1, v2, dc.mul(v1, v2)])
        return dc.tsum(dc.mul(dc.mean_pool(m), dc.mean_pool(m)))

    assert grad_check(f, [v1, v2]) < 1e-6


def test_grad_check_cosine_sim_both_sides():
    rng = np.random.default_rng(19)
    a = dc.parameter(rng.normal(size=(5,)))
    b = dc.parameter(rng.normal(size=(5,)))

    def f():
        return dc.cosine_sim(a, b)

    assert grad_check(f, [a, b]) < 1e-7


def test_bias_add_broadcast_backward():
    rng = np.random.default_rng(23)
    b = dc.parameter(rng.normal(size=(3,)))
    x = dc.constant(rng.normal(size=(4, 3)))

    def f():
        return dc.tsum(dc.mul(dc.add(x, b), dc.add(x, b)))

    assert grad_check(f, [b]) < 1e-7


def test_layer_norm_epsilon_default():
    assert dc.tensor.LAYER_NORM_EPS == 1e-5


def test_gradients_accumulate_across_shared_subgraphs():
    x = dc.parameter([2.0])
    y = dc.mul(x, x)  # x^2
    z = dc.add(y, y)  # 2 x^2 -> dz/dx = 4x = 8
    z.backward()
    assert x.grad[0] == pytest.approx(8.0, abs=1e-12)


def test_logsumexp_matches_numpy_oracle():
    rng = np.random.default_rng(29)
    x = rng.normal(size=(4, 9)) * 30
    got = dc.logsumexp(dc.constant(x)).data
    want = np.log(np.exp(x - x.max(axis=1, keepdims=True)).sum(axis=1)) + x.max(axis=1)
    assert np.allclose(got, want, atol=1e-12)


def test_non_finite_loss_in_grad_check_errors():
    x = dc.parameter([0.0])

    def f():
        return dc.log(x)  # log(0) = -inf at base point

    with pytest.raises(dc.NonFiniteLossError):
        grad_check(f, [x])
