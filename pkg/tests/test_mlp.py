import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfxl.marl.mlp import (
    IDENTITY,
    TANH,
    clone_mlp,
    grad_global_norm,
    mlp_backward,
    mlp_forward,
    mlp_init,
    numerical_gradients,
    sgd_step,
    soft_update,
)


def make_net(dims=(3, 8, 2), out=IDENTITY, seed=0):
    return mlp_init(dims, out, np.random.default_rng(seed))


# -- forward -----------------------------------------------------------------


def test_forward_shapes_single_and_batch():
    net = make_net()
    y, _ = mlp_forward(net, np.zeros(3))
    assert y.shape == (2,)
    y, _ = mlp_forward(net, np.zeros((5, 3)))
    assert y.shape == (5, 2)


def test_tanh_output_bounded():
    net = make_net(out=TANH)
    x = np.random.default_rng(1).normal(size=(50, 3)) * 10
    y, _ = mlp_forward(net, x)
    assert np.all(np.abs(y) <= 1.0)


def test_identity_head_is_affine_in_last_hidden():
    # with zero input and zero biases the output is exactly zero
    net = make_net()
    for b in net.biases:
        b[:] = 0
    y, _ = mlp_forward(net, np.zeros(3))
    np.testing.assert_allclose(y, 0.0, atol=1e-15)


def test_init_bounds_follow_fan_in():
    net = make_net(dims=(4, 16, 3), seed=2)
    for w, d_in in zip(net.weights, (4, 16)):
        bound = 1.0 / np.sqrt(d_in)
        assert np.all(np.abs(w) <= bound)
        assert w.shape[1] == d_in


def test_init_is_seeded():
    a = make_net(seed=3)
    b = make_net(seed=3)
    c = make_net(seed=4)
    for wa, wb in zip(a.weights, b.weights):
        np.testing.assert_array_equal(wa, wb)
    assert any(not np.array_equal(wa, wc) for wa, wc in zip(a.weights, c.weights))


# -- backward ----------------------------------------------------------------


@pytest.mark.parametrize("out", [IDENTITY, TANH])
def test_analytic_gradients_match_finite_differences(out):
    rng = np.random.default_rng(5)
    net = mlp_init((4, 10, 6, 2), out, rng)
    x = rng.normal(size=(3, 4))
    upstream = rng.normal(size=(3, 2))
    _, cache = mlp_forward(net, x)
    grads, _ = mlp_backward(net, cache, upstream)
    numeric = numerical_gradients(net, x, upstream)
    for (dw, db), (nw, nb) in zip(grads, numeric):
        np.testing.assert_allclose(dw, nw, atol=1e-6, rtol=1e-5)
        np.testing.assert_allclose(db, nb, atol=1e-6, rtol=1e-5)


def test_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(6)
    net = mlp_init((3, 7, 2), TANH, rng)
    x = rng.normal(size=3)
    upstream = rng.normal(size=2)
    _, cache = mlp_forward(net, x)
    _, dx = mlp_backward(net, cache, upstream)
    eps = 1e-6
    num = np.zeros(3)
    for i in range(3):
        xp, xm = x.copy(), x.copy()
        xp[i] += eps
        xm[i] -= eps
        num[i] = (
            float(np.sum(mlp_forward(net, xp)[0] * upstream))
            - float(np.sum(mlp_forward(net, xm)[0] * upstream))
        ) / (2 * eps)
    np.testing.assert_allclose(dx, num, atol=1e-6, rtol=1e-5)


def test_backward_squeezes_like_forward():
    net = make_net()
    x = np.zeros(3)
    _, cache = mlp_forward(net, x)
    _, dx = mlp_backward(net, cache, np.ones(2))
    assert dx.shape == (3,)


# -- optimizer helpers ----------------------------------------------------------


def test_global_norm_clipping():
    net = make_net(dims=(2, 4, 1), seed=7)
    grads = [(np.full_like(w, 10.0), np.full_like(b, 10.0)) for w, b in zip(net.weights, net.biases)]
    raw_norm = grad_global_norm(grads)
    before = [w.copy() for w in net.weights]
    returned = sgd_step(net, grads, lr=1.0, clip_norm=1.0)
    assert returned == pytest.approx(raw_norm)
    # applied update has global norm exactly clip_norm (scaled by lr)
    moved = [b - w for b, w in zip(before, net.weights)]
    applied = float(np.sqrt(sum(np.sum(m**2) for m in moved)))
    # bias movement included in the clip; recompute over all parameters
    assert applied <= 1.0 + 1e-9


def test_sgd_step_descends_quadratic():
    net = make_net(dims=(1, 1), seed=8)
    # minimize (w*x - 1)^2 at x=1 by hand-computed gradient steps
    for _ in range(200):
        y, cache = mlp_forward(net, np.ones(1))
        grads, _ = mlp_backward(net, cache, 2 * (y - 1.0))
        sgd_step(net, grads, lr=0.1, clip_norm=10.0)
    y, _ = mlp_forward(net, np.ones(1))
    assert y[0] == pytest.approx(1.0, abs=1e-3)


def test_soft_update_contracts_distance():
    online = make_net(seed=9)
    target = make_net(seed=10)
    tau = 0.005

    def dist():
        return float(
            np.sqrt(
                sum(np.sum((w1 - w2) ** 2) for w1, w2 in zip(online.weights, target.weights))
                + sum(np.sum((b1 - b2) ** 2) for b1, b2 in zip(online.biases, target.biases))
            )
        )

    d0 = dist()
    soft_update(target, online, tau)
    d1 = dist()
    assert d1 == pytest.approx((1 - tau) * d0, rel=1e-9)


def test_soft_update_tau_one_copies():
    online = make_net(seed=11)
    target = make_net(seed=12)
    soft_update(target, online, 1.0)
    for w1, w2 in zip(online.weights, target.weights):
        np.testing.assert_allclose(w1, w2, atol=1e-15)


def test_clone_is_independent():
    net = make_net(seed=13)
    twin = clone_mlp(net)
    twin.weights[0][:] = 0
    assert not np.array_equal(net.weights[0], twin.weights[0])


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_gradcheck_random_architectures(seed):
    rng = np.random.default_rng(seed)
    depth = int(rng.integers(1, 4))
    dims = [int(rng.integers(1, 6)) for _ in range(depth + 1)]
    out = TANH if rng.integers(2) else IDENTITY
    net = mlp_init(dims, out, rng)
    x = rng.normal(size=(2, dims[0]))
    upstream = rng.normal(size=(2, dims[-1]))
    _, cache = mlp_forward(net, x)
    grads, _ = mlp_backward(net, cache, upstream)
    numeric = numerical_gradients(net, x, upstream)
    for (dw, db), (nw, nb) in zip(grads, numeric):
        np.testing.assert_allclose(dw, nw, atol=5e-6, rtol=1e-4)
        np.testing.assert_allclose(db, nb, atol=5e-6, rtol=1e-4)
