"""Autodiff stack: hand-computable values, gradient checks, Adam behavior."""

import numpy as np
import pytest

from avlab.errors import ShapeError
from avlab.rng import substream
from avlab.tinynet import Adam, Conv3d, gradcheck
from avlab.tinynet import tensor as tn
from avlab.tinynet.tensor import Tensor


def test_conv1d_hand_example():
    x = Tensor(np.array([[[1.0, 2.0, 3.0, 4.0]]], np.float64))
    w = Tensor(np.ones((1, 1, 3), np.float64))
    out = tn.conv1d(x, w, stride=1, padding=1)
    assert out.data.reshape(-1).tolist() == [3.0, 6.0, 9.0, 7.0]


def test_conv3d_identity_kernel():
    rng = substream(1, "conv3d-id")
    x = Tensor(rng.standard_normal((1, 1, 4, 4, 4)))
    w = np.zeros((1, 1, 1, 1, 1))
    w[0, 0, 0, 0, 0] = 1.0
    out = tn.conv3d(x, Tensor(w), (1, 1, 1), (0, 0, 0))
    assert np.allclose(out.data, x.data)


def test_adaptive_pool_constant_and_means():
    c = 2.75
    x = Tensor(np.full((1, 3, 6, 5, 4), c))
    out = tn.adaptive_avg_pool3d(x, (1, 1, 1))
    assert out.data.shape == (1, 3, 1, 1, 1)
    assert np.allclose(out.data, c)

    # uneven bins still average exactly over their spans
    v = np.arange(10, dtype=np.float64).reshape(1, 1, 10)
    out = tn.adaptive_avg_pool1d(Tensor(v), 4)
    spans = [(0, 3), (2, 5), (5, 8), (7, 10)]
    expected = [v[0, 0, s:e].mean() for s, e in spans]
    assert np.allclose(out.data.reshape(-1), expected)


def test_softmax_basics():
    out = tn.softmax(Tensor(np.zeros((1, 3))), axis=1)
    assert np.allclose(out.data, 1.0 / 3.0)

    rng = substream(2, "softmax")
    x = rng.standard_normal((5, 9))
    a = tn.softmax(Tensor(x), axis=1).data
    b = tn.softmax(Tensor(x + 13.7), axis=1).data
    assert np.abs(a.sum(axis=1) - 1.0).max() < 1e-6
    assert np.abs(a - b).max() < 1e-6
    assert (a > 0).all()


def test_bce_loss_values():
    half = Tensor(np.array([0.5]))
    assert float(tn.bce_loss(half, np.array([1.0])).data) == pytest.approx(np.log(2), rel=1e-6)
    assert float(tn.bce_loss(half, np.array([0.0])).data) == pytest.approx(np.log(2), rel=1e-6)
    # clamped at the boundary, stays finite
    hard = Tensor(np.array([0.0, 1.0]))
    assert np.isfinite(float(tn.bce_loss(hard, np.array([1.0, 0.0])).data))


def test_shape_errors_name_both_shapes():
    with pytest.raises(ShapeError) as err:
        tn.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 5))))
    assert "(2, 3)" in str(err.value) and "(4, 5)" in str(err.value)
    with pytest.raises(ShapeError) as err:
        tn.conv1d(Tensor(np.ones((1, 2, 8))), Tensor(np.ones((1, 3, 3))))
    assert "(1, 2, 8)" in str(err.value) and "(1, 3, 3)" in str(err.value)


def test_backward_accumulates_shared_node():
    x = Tensor(np.array([3.0]), requires_grad=True)
    y = tn.mul(x, x)  # d/dx x^2 = 2x
    tn.tsum(y).backward()
    assert np.allclose(x.grad, [6.0])


def test_adam_zero_grad_no_move():
    p = Tensor(np.array([1.0, -2.0], np.float32), requires_grad=True)
    opt = Adam([("p", p)], lr=0.1, weight_decay=0.0)
    p.grad = np.zeros(2, np.float32)
    before = p.data.copy()
    opt.step()
    assert np.array_equal(p.data, before)


def test_adam_first_step_magnitude():
    for g in (1e-4, 1.0, 50.0):
        p = Tensor(np.array([0.0]), requires_grad=True)
        opt = Adam([("p", p)], lr=1e-3)
        p.grad = np.array([g])
        opt.step()
        assert float(p.data[0]) == pytest.approx(-1e-3, rel=1e-3)


def test_adam_minimizes_quadratic():
    p = Tensor(np.array([1.0]), requires_grad=True)
    opt = Adam([("p", p)], lr=0.1)
    for _ in range(100):
        p.grad = 2.0 * p.data
        opt.step()
    assert abs(float(p.data[0])) < 0.5


def test_layer_init_deterministic():
    a = Conv3d(2, 3, (3, 3, 3), rng=substream(5, "init"))
    b = Conv3d(2, 3, (3, 3, 3), rng=substream(5, "init"))
    assert np.array_equal(a.weight.data, b.weight.data)
    assert np.array_equal(a.bias.data, b.bias.data)


def test_forward_deterministic_bits():
    rng = substream(6, "det")
    x = rng.standard_normal((2, 2, 6, 8, 8)).astype(np.float32)
    layer = Conv3d(2, 4, (3, 3, 3), (1, 2, 2), rng=substream(7, "w"))
    y1 = layer(Tensor(x)).data
    y2 = layer(Tensor(x)).data
    assert y1.tobytes() == y2.tobytes()


def test_linear_layer_gradients():
    rng = substream(8, "layergrad")
    x = rng.standard_normal((5, 4))

    def build(ts):
        out = tn.add(tn.matmul(Tensor(x), ts[0]), tn.reshape(ts[1], (1, -1)))
        return gradcheck.probe_sum(tn.relu(out))

    err = gradcheck.check_op(build, [rng.standard_normal((4, 3)), rng.standard_normal(3) + 2.0])
    assert err < 1e-4


def test_gradcheck_suite_ops_small():
    results = gradcheck.run_suite(seed=3, instances=2, include_model=False)
    for name, err in results.items():
        assert err < gradcheck.OPS_TOLERANCE, (name, err)


def test_conv1d_vs_conv3d_cross_check():
    # a (1, k) kernel conv3d on a (1, 1, L) volume equals conv1d
    rng = substream(9, "cross")
    x = rng.standard_normal((2, 3, 15))
    w = rng.standard_normal((4, 3, 5))
    out1 = tn.conv1d(Tensor(x), Tensor(w), stride=2, padding=2).data
    out3 = tn.conv3d(
        Tensor(x[:, :, None, None, :]), Tensor(w[:, :, None, None, :]),
        stride=(1, 1, 2), padding=(0, 0, 2),
    ).data
    assert np.allclose(out1, out3[:, :, 0, 0, :], atol=1e-12)
