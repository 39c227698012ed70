import numpy as np
import pytest

from scorelab.errors import DomainError, FormatError, NumericError
from scorelab.net import (
    Gradient,
    ScoreNetwork,
    backward,
    forward,
    init,
    load_checkpoint,
    save_checkpoint,
)


def kink_free_net(seed, const_schedule, width=4, depth=3, d=2, trunc_B=1e6):
    """Random net plus inputs with safe margins from ReLU kinks and the clip."""
    while True:
        rng = np.random.default_rng(seed)
        net = init(width, depth, d + 1, d, trunc_B, seed, const_schedule)
        for b in net.bs[:-1]:
            b += rng.uniform(0.05, 0.3, b.shape)  # move pre-activations off zero
        x = rng.uniform(-1, 1, (5, d))
        t = rng.uniform(0.2, 1.0, 5)
        xt = np.concatenate([x, t[:, None]], axis=1)
        margin, h = np.inf, xt
        for A, b in zip(net.As[:-1], net.bs[:-1]):
            z = h @ A.T + b
            margin = min(margin, float(np.abs(z).min()))
            h = np.maximum(z, 0.0)
        if margin > 1e-3:
            return net, x, t, rng.standard_normal((5, d))
        seed += 1000  # kink too close for finite differences; redraw


def flatten_params(net):
    return np.concatenate([a.reshape(-1) for a in net.As] + [b.reshape(-1) for b in net.bs])


def set_params(net, theta):
    pos = 0
    for a in net.As:
        a[...] = theta[pos : pos + a.size].reshape(a.shape)
        pos += a.size
    for b in net.bs:
        b[...] = theta[pos : pos + b.size].reshape(b.shape)
        pos += b.size


def test_zero_net_outputs_zero(const_schedule):
    net = init(4, 2, 3, 2, 10.0, 0, const_schedule)
    for a in net.As:
        a[...] = 0.0
    out = forward(net, np.array([[0.3, -0.2]]), 0.5)
    assert np.all(out == 0.0)


def test_truncation_clips_to_rho(const_schedule):
    net = init(2, 1, 2, 1, 10.0, 0, const_schedule)
    net.As[0][...] = 0.0
    net.bs[0][...] = 1e6  # huge positive hidden activations
    net.As[1][...] = 1.0
    t = np.log(2.0)  # sigma_t = sqrt(3)/2
    rho = float(net.rho(t))
    out = forward(net, np.array([[0.0]]), t)
    assert out[0, 0] == pytest.approx(rho)
    assert rho == pytest.approx(10.0 * np.sqrt(np.log(2.0)) / (np.sqrt(3.0) / 2), rel=1e-12)


def test_hand_built_relu_unit(const_schedule):
    # hidden unit 0 computes relu(x0); unit 1 is dead (W*L = 1 would force
    # the truncation threshold to zero, so use width 2)
    net = init(2, 1, 3, 2, 1e6, 0, const_schedule)
    net.As[0][...] = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    net.bs[0][...] = 0.0
    net.As[1][...] = np.array([[1.0, 0.0], [0.0, 0.0]])
    net.bs[1][...] = 0.0
    xs = np.linspace(-1, 1, 11)
    out = forward(net, np.stack([xs, 0.3 * np.ones(11)], axis=1), 0.4)
    assert np.allclose(out[:, 0], np.maximum(xs, 0.0))
    assert np.allclose(out[:, 1], 0.0)


def test_nonfinite_params_raise(const_schedule):
    net = init(3, 1, 2, 1, 10.0, 0, const_schedule)
    net.As[0][0, 0] = np.nan
    with pytest.raises(NumericError):
        forward(net, np.array([[0.1]]), 0.3)


def test_gradient_matches_finite_differences(const_schedule):
    # central-difference oracle over every parameter, kink-free draws
    for seed in range(6):
        net, x, t, target = kink_free_net(seed, const_schedule)
        theta0 = flatten_params(net)
        _, grad = backward(net, x, t, target)
        ana = np.concatenate(
            [g.reshape(-1) for g in grad.dAs] + [g.reshape(-1) for g in grad.dbs]
        )
        h = 1e-6
        num = np.empty_like(theta0)
        for i in range(theta0.size):
            for sign, store in ((1, "hi"), (-1, "lo")):
                theta = theta0.copy()
                theta[i] += sign * h
                set_params(net, theta)
                loss, _ = backward(net, x, t, target)
                if sign == 1:
                    hi = loss
                else:
                    lo = loss
            num[i] = (hi - lo) / (2 * h)
        set_params(net, theta0)
        denom = np.maximum(np.abs(num), 1e-8)
        assert np.max(np.abs(ana - num) / denom) < 1e-5


def test_zero_net_zero_target_gives_zero_loss(const_schedule):
    net = init(4, 2, 3, 2, 10.0, 0, const_schedule)
    for a in net.As:
        a[...] = 0.0
    loss, grad = backward(net, np.array([[0.5, 0.5]]), 0.6, np.zeros((1, 2)))
    assert loss == 0.0
    assert all(np.all(g == 0.0) for g in grad.dAs)


def test_single_linear_layer_least_squares_gradient():
    # closed-form oracle: loss = mean ||X A^T + b - Y||^2 over the batch
    from scorelab import kernels

    rng = np.random.default_rng(3)
    A = rng.standard_normal((2, 3))
    b = rng.standard_normal(2)
    X = rng.standard_normal((40, 3))
    Y = rng.standard_normal((40, 2))
    w = np.ones(40)
    rho = np.full(40, 1e9)
    loss, gA, gb = kernels.loss_grad([A], [b], X, rho, Y, w)
    R = X @ A.T + b - Y
    assert loss == pytest.approx(np.sum(R * R) / 40, rel=1e-12)
    assert np.allclose(gA[0], 2.0 / 40 * R.T @ X, rtol=1e-10)
    assert np.allclose(gb[0], 2.0 / 40 * R.sum(axis=0), rtol=1e-10)


def test_init_deterministic(const_schedule):
    a = init(8, 2, 3, 2, 10.0, 42, const_schedule)
    b = init(8, 2, 3, 2, 10.0, 42, const_schedule)
    assert all(np.array_equal(x, y) for x, y in zip(a.As, b.As))


def test_init_shapes_w1_l1(const_schedule):
    net = init(1, 1, 4, 3, 10.0, 0, const_schedule)
    assert net.As[0].shape == (1, 4)
    assert net.As[1].shape == (3, 1)


def test_init_variance_scaling(const_schedule):
    # Monte Carlo check of the 2/fan_in rule: with unit-variance inputs the
    # first-layer pre-activation variance is 2 * input variance (within 20%)
    rng = np.random.default_rng(0)
    u = rng.standard_normal((4000, 10))  # stands in for (x, t), unit variance
    zs = []
    for seed in range(30):
        net = init(16, 1, 10, 9, 10.0, seed, const_schedule)
        zs.append((u @ net.As[0].T).var())
    ratio = np.mean(zs) / u.var()
    assert abs(ratio - 2.0) < 0.4


def test_truncation_invariant_random_nets(const_schedule):
    rng = np.random.default_rng(7)
    for seed in range(20):
        net = init(int(rng.integers(2, 6)), int(rng.integers(1, 4)), 4, 3, 2.0, seed, const_schedule)
        for a in net.As:
            a *= 50.0  # force the clip to bind
        x = rng.uniform(-2, 2, (50, 3))
        t = rng.uniform(0.05, 2.0, 50)
        out = forward(net, x, t)
        rho = net.rho(t)
        assert np.all(np.abs(out) <= rho[:, None] + 1e-12)


def test_positive_homogeneity_zero_bias(const_schedule):
    rng = np.random.default_rng(11)
    net = init(6, 3, 4, 3, 1e12, 5, const_schedule)
    x = rng.uniform(-1, 1, (8, 3))
    t = np.full(8, 0.4)
    base = forward(net, x, t)
    for alpha in (0.5, 2.0, 7.0):
        scaled = forward(net, alpha * x, alpha * t)
        assert np.allclose(scaled, alpha * base, rtol=1e-10)


def test_checkpoint_round_trip_bit_exact(tmp_path, const_schedule):
    net = init(5, 2, 3, 2, 7.5, 13, const_schedule)
    path = tmp_path / "ckpt.npz"
    save_checkpoint(net, path, metadata={"note": "test", "step": 17})
    loaded, meta = load_checkpoint(path)
    assert meta == {"note": "test", "step": 17}
    assert loaded.width == net.width and loaded.depth == net.depth
    assert loaded.trunc_B == net.trunc_B
    assert loaded.schedule.kind == net.schedule.kind
    for a, b in zip(net.As + net.bs, loaded.As + loaded.bs):
        assert np.array_equal(a, b)


def test_checkpoint_rejects_foreign_file(tmp_path):
    path = tmp_path / "junk.npz"
    np.savez(path, meta='{"format": "other"}')
    with pytest.raises(FormatError):
        load_checkpoint(path)


def test_backward_validates_target_shape(const_schedule):
    net = init(3, 1, 3, 2, 10.0, 0, const_schedule)
    with pytest.raises(DomainError):
        backward(net, np.zeros((4, 2)), 0.5, np.zeros((3, 2)))
