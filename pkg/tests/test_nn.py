import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pvtsizing.nn import AdamState, FlatGradient, MlpNetwork, NonFiniteError, adam_step, mlp_forward, mlp_gradients

from oracles import adam_scalar, central_difference, naive_forward


def random_net(seed, sizes=None, act="tanh"):
    rng = np.random.default_rng(seed)
    if sizes is None:
        sizes = [int(rng.integers(1, 9)), int(rng.integers(2, 17)), int(rng.integers(2, 17)), int(rng.integers(1, 5))]
    return MlpNetwork.create(sizes, rng, act), rng


def test_param_count_matches_layer_formula():
    net, _ = random_net(0, [7, 64, 64, 3])
    assert net.param_count == 7 * 64 + 64 + 64 * 64 + 64 + 64 * 3 + 3
    assert net.flatten().shape == (net.param_count,)


@pytest.mark.parametrize("seed", range(5))
def test_flatten_unflatten_roundtrip_is_bit_exact(seed):
    net, _ = random_net(seed)
    flat = net.flatten()
    again = net.unflatten(flat)
    assert np.array_equal(again.flatten(), flat)
    for a, b in zip(net.weights, again.weights):
        assert np.array_equal(a, b)


def test_zero_network_outputs_zero():
    sizes = [3, 4, 2]
    net = MlpNetwork(sizes, [np.zeros((3, 4)), np.zeros((4, 2))], [np.zeros(4), np.zeros(2)], "identity")
    assert np.array_equal(mlp_forward(net, np.array([1.0, -2.0, 3.0])), np.zeros(2))


def test_identity_layer_passes_input_through():
    net = MlpNetwork([3, 3], [np.eye(3)], [np.zeros(3)], "identity")
    x = np.array([0.3, -1.5, 2.0])
    assert np.array_equal(mlp_forward(net, x), x)


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("act", ["tanh", "identity"])
def test_forward_matches_naive_oracle(seed, act):
    net, rng = random_net(seed, act=act)
    x = rng.normal(size=net.layer_sizes[0])
    expected = naive_forward(net.weights, net.biases, x, act == "tanh")
    assert np.allclose(mlp_forward(net, x), expected, rtol=1e-12, atol=1e-12)


def test_actor_outputs_lie_in_open_interval():
    net, rng = random_net(3, [7, 16, 16, 5], "tanh")
    out = mlp_forward(net, rng.normal(scale=50.0, size=(100, 7)))
    assert np.all(np.abs(out) <= 1.0)


def test_forward_rejects_wrong_input_size():
    net, _ = random_net(0, [4, 8, 2])
    with pytest.raises(ValueError, match="expects 4"):
        mlp_forward(net, np.zeros(3))


def test_forward_is_pure():
    net, rng = random_net(1)
    before = net.flatten().copy()
    x = rng.normal(size=net.layer_sizes[0])
    a = mlp_forward(net, x)
    b = mlp_forward(net, x)
    assert np.array_equal(a, b)
    assert np.array_equal(net.flatten(), before)


def test_zero_cotangent_gives_zero_gradients():
    net, rng = random_net(2)
    x = rng.normal(size=net.layer_sizes[0])
    g, dx = mlp_gradients(net, x, np.zeros(net.layer_sizes[-1]))
    assert not np.any(g.values)
    assert not np.any(dx)


def test_linear_layer_input_gradient_is_transpose_product():
    rng = np.random.default_rng(4)
    w = rng.normal(size=(3, 2))
    net = MlpNetwork([3, 2], [w], [np.zeros(2)], "identity")
    c = np.array([0.7, -1.2])
    _, dx = mlp_gradients(net, rng.normal(size=3), c)
    # package stores weights as (in, out), so y = W^T x and dy/dx . c = W c
    assert np.allclose(dx, w @ c, rtol=0, atol=1e-15)


def _max_rel_err(a, b):
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6)
    return float(np.max(np.abs(a - b) / scale))


@pytest.mark.parametrize("seed", range(24))
def test_parameter_gradients_match_central_differences(seed):
    net, rng = random_net(seed, act="tanh" if seed % 2 else "identity")
    x = rng.normal(size=net.layer_sizes[0])
    c = rng.normal(size=net.layer_sizes[-1])

    def f(theta):
        return float(mlp_forward(net.unflatten(theta), x) @ c)

    g, dx = mlp_gradients(net, x, c)
    assert _max_rel_err(g.values, central_difference(f, net.flatten())) <= 1e-4
    fx = central_difference(lambda z: float(mlp_forward(net, z) @ c), x)
    assert _max_rel_err(dx, fx) <= 1e-4


def test_scalar_output_two_layer_net_finite_difference():
    net, rng = random_net(99, [3, 5, 1], "identity")
    x = rng.normal(size=3)
    g, _ = mlp_gradients(net, x, np.array([1.0]))
    fd = central_difference(lambda t: float(mlp_forward(net.unflatten(t), x)[0]), net.flatten())
    assert _max_rel_err(g.values, fd) <= 1e-4


def test_batched_gradient_is_sum_of_rows_with_offset():
    net, rng = random_net(7, [4, 6, 6, 1], "identity")
    xs = rng.normal(size=(5, 4))
    cot = rng.normal(size=(5, 1))
    offset = rng.normal(size=6)
    g, _, first = mlp_gradients(net, xs, cot, offset, return_first_delta=True)
    rows = [mlp_gradients(net, xs[i], cot[i], offset)[0].values for i in range(5)]
    assert np.allclose(g.values, np.sum(rows, axis=0), atol=1e-12)

    def f(off):
        return float(np.sum(mlp_forward(net, xs, off) * cot))

    assert _max_rel_err(first.sum(axis=0), central_difference(f, offset)) <= 1e-4


def test_non_finite_gradient_names_layer():
    net, _ = random_net(0, [2, 3, 1], "identity")
    with pytest.raises(NonFiniteError, match="layer 1"):
        mlp_gradients(net, np.zeros(2), np.array([np.nan]))


def test_flat_gradient_rejects_non_finite():
    with pytest.raises(NonFiniteError):
        FlatGradient(np.array([1.0, np.inf]), "actor")


def test_adam_hand_value():
    state = AdamState.zeros(1, lr=1e-3)
    new, st1 = adam_step(np.array([1.0]), np.array([0.1]), state)
    assert st1.t == 1
    assert new[0] == pytest.approx(adam_scalar(1.0, 0.1, 1e-3, 0.9, 0.999, 1e-8), abs=1e-15)
    assert new[0] == pytest.approx(0.999, abs=1e-7)


def test_adam_zero_gradient_changes_nothing_but_counter():
    state = AdamState.zeros(3)
    params = np.array([1.0, -2.0, 0.5])
    new, st1 = adam_step(params, np.zeros(3), state)
    assert np.array_equal(new, params)
    assert np.array_equal(st1.m, state.m) and np.array_equal(st1.v, state.v)
    assert st1.t == 1


def test_adam_is_pure_and_deterministic():
    state = AdamState.zeros(2)
    p, g = np.array([0.3, 0.4]), np.array([0.5, -0.1])
    a = adam_step(p, g, state)
    b = adam_step(p, g, state)
    assert np.array_equal(a[0], b[0]) and a[1].t == b[1].t == 1
    assert state.t == 0 and not state.m.any()


def test_adam_refuses_nan():
    with pytest.raises(NonFiniteError, match="refusing"):
        adam_step(np.zeros(2), np.array([0.0, np.nan]), AdamState.zeros(2))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 20))
def test_adam_counter_increments_once_per_step(seed, steps):
    rng = np.random.default_rng(seed)
    state = AdamState.zeros(4)
    p = rng.normal(size=4)
    for _ in range(steps):
        p, state = adam_step(p, rng.normal(size=4), state)
    assert state.t == steps
    assert np.all(np.isfinite(p))
