import numpy as np
import pytest

from conftest import assert_grads_close, central_difference
from pdnet.errors import DomainError, FormatError, TrainingError
from pdnet.net import (AdamState, Layer, LayerSpec, NetworkWeights, adam_step, backward,
                       dense_specs, forward, init_weights, load_weights, minibatches,
                       save_weights)


def single_layer(W, b, activation="linear"):
    W = np.asarray(W, dtype=float)
    spec = LayerSpec(W.shape[0], W.shape[1], activation, False)
    return NetworkWeights([Layer(spec, W, np.asarray(b, dtype=float))])


def test_forward_zero_weights():
    net = init_weights(dense_specs(3, (4, 4), activation="relu", batch_norm=False), 0)
    for layer in net.layers:
        layer.W[:] = 0
    out, _ = forward(net, np.ones((2, 3)))
    assert np.all(out == 0)


def test_forward_identity_relu():
    out, _ = forward(single_layer(np.eye(2), [0, 0], "relu"), np.array([[-1.0, 2.0]]))
    np.testing.assert_array_equal(out, [[0.0, 2.0]])


def test_forward_hand_computed():
    net = single_layer([[0.5], [-2.0]], [0.25])
    out, _ = forward(net, np.array([[2.0, 3.0], [-1.0, 0.5]]))
    np.testing.assert_allclose(out, [[1.0 - 6.0 + 0.25], [-0.5 - 1.0 + 0.25]])


def test_relu6_clips():
    out, _ = forward(single_layer([[1.0]], [0.0], "relu6"), np.array([[-3.0], [2.0], [9.0]]))
    np.testing.assert_array_equal(out[:, 0], [0, 2, 6])


def test_shape_mismatch():
    net = single_layer(np.eye(2), [0, 0])
    with pytest.raises(DomainError):
        forward(net, np.ones((3, 3)))
    _, cache = forward(net, np.ones((3, 2)))
    with pytest.raises(DomainError):
        backward(net, cache, np.ones((3, 1)))
    with pytest.raises(DomainError):
        backward(single_layer(np.ones((3, 2)), [0, 0]), cache, np.ones((3, 2)))


def test_batch_norm_rejects_single_sample():
    net = init_weights(dense_specs(2, (3,)), 0)
    with pytest.raises(DomainError):
        forward(net, np.ones((1, 2)))
    forward(net, np.ones((1, 2)), "infer")


def test_batch_norm_normalizes():
    net = init_weights(dense_specs(4, (6,), activation="linear"), 1)
    x = np.random.default_rng(2).normal(3.0, 5.0, (64, 4))
    _, cache = forward(net, x)
    xhat = cache["layers"][0]["xhat"]
    np.testing.assert_allclose(xhat.mean(axis=0), 0, atol=1e-6)
    np.testing.assert_allclose(xhat.var(axis=0), 1, atol=1e-6)


def test_running_stats_momentum():
    net = init_weights(dense_specs(2, (3,), activation="linear"), 0)
    x = np.random.default_rng(0).normal(size=(8, 2))
    h = x @ net.layers[0].W
    forward(net, x)
    np.testing.assert_allclose(net.layers[0].running_mean, 0.1 * h.mean(axis=0))
    np.testing.assert_allclose(net.layers[0].running_var, 0.9 + 0.1 * h.var(axis=0))


def _gradient_trial(seed, activation, batch_norm, mode="train"):
    rng = np.random.default_rng(seed)
    n_in, widths, n_out = rng.integers(1, 4), tuple(rng.integers(2, 5, 2)), rng.integers(1, 3)
    net = init_weights(dense_specs(n_in, widths, n_out, activation, batch_norm), seed)
    for layer in net.layers:
        layer.b = rng.normal(0, 0.3, layer.b.shape)
        if layer.spec.batch_norm:
            layer.gamma = rng.uniform(0.5, 1.5, layer.gamma.shape)
            layer.beta = rng.normal(0, 0.3, layer.beta.shape)
            layer.running_mean = rng.normal(0, 0.3, layer.running_mean.shape)
            layer.running_var = rng.uniform(0.5, 2, layer.running_var.shape)
    if activation == "relu6":
        for layer in net.layers:
            layer.W *= 4  # push some pre-activations beyond 6
    x = rng.normal(size=(6, n_in))
    weights_out = rng.normal(size=(6, n_out))

    def loss():
        out, _ = forward(net, x, mode, update_stats=False)
        return float(np.sum(out * weights_out))

    _, cache = forward(net, x, mode, update_stats=False)
    grads, dx = backward(net, cache, weights_out)
    params = net.parameters() + [x]
    numeric = central_difference(loss, params)
    return grads + [dx], numeric


@pytest.mark.parametrize("activation", ["relu", "relu6", "linear"])
@pytest.mark.parametrize("batch_norm", [False, True])
def test_gradients_finite_difference(activation, batch_norm):
    for seed in range(50):
        analytic, numeric = _gradient_trial(seed, activation, batch_norm)
        assert_grads_close(analytic, numeric)


def test_gradients_infer_mode():
    for seed in range(10):
        analytic, numeric = _gradient_trial(seed, "relu", True, mode="infer")
        assert_grads_close(analytic, numeric)


def test_zero_output_gradient():
    net = init_weights(dense_specs(3, (4,), 2), 0)
    _, cache = forward(net, np.random.default_rng(0).normal(size=(5, 3)))
    grads, dx = backward(net, cache, np.zeros((5, 2)))
    assert all(np.all(g == 0) for g in grads) and np.all(dx == 0)


def test_scalar_chain_rule():
    net = single_layer([[0.7]], [0.1])
    x = np.array([[1.5]])
    _, cache = forward(net, x)
    grads, _ = backward(net, cache, np.array([[2.5]]))
    assert grads[0][0, 0] == 1.5 * 2.5
    assert grads[1][0] == 2.5


def test_adam_zero_gradient():
    p = [np.array([1.0, -2.0])]
    state = AdamState.create(p, 1e-3)
    adam_step(p, [np.zeros(2)], state)
    np.testing.assert_array_equal(p[0], [1.0, -2.0])
    assert state.step == 1


@pytest.mark.parametrize("g", [3.0, -0.2, 1e-6])
def test_adam_first_step(g):
    p = [np.array([0.5])]
    state = AdamState.create(p, 1e-2)
    adam_step(p, [np.array([g])], state)
    expected = 0.5 - 1e-2 * g / (abs(g) + 1e-8)
    assert p[0][0] == pytest.approx(expected, rel=1e-12)


def test_adam_non_finite_names_layer():
    net = init_weights(dense_specs(2, (3,), 1), 0)
    params = net.parameters()
    state = AdamState.create(params, 1e-3, net.owners())
    grads = [np.zeros_like(p) for p in params]
    grads[-2][0, 0] = np.nan
    with pytest.raises(TrainingError) as info:
        adam_step(params, grads, state)
    assert info.value.layer == 1


def _train_steps(seed):
    net = init_weights(dense_specs(3, (8, 8), 2), seed)
    rng = np.random.default_rng(99)
    x, y = rng.normal(size=(40, 3)), rng.normal(size=(40, 2))
    state = AdamState.create(net.parameters(), 1e-2, net.owners())
    for epoch in range(3):
        for idx in minibatches(40, 16, seed, epoch):
            out, cache = forward(net, x[idx])
            grads, _ = backward(net, cache, 2 * (out - y[idx]) / out.size)
            adam_step(net.parameters(), grads, state, 1e-4)
    return net


def test_training_is_deterministic():
    assert _train_steps(4) == _train_steps(4)
    assert not _train_steps(4) == _train_steps(5)


def test_minibatches():
    batches = minibatches(10, 3, 0, 0)
    assert [b.size for b in batches] == [3, 3, 4]
    assert sorted(np.concatenate(batches)) == list(range(10))
    assert [b.size for b in minibatches(11, 3, 0, 0)] == [3, 3, 3, 2]
    assert not np.array_equal(np.concatenate(minibatches(50, 8, 0, 0)),
                              np.concatenate(minibatches(50, 8, 0, 1)))


def test_init_distribution():
    net = init_weights(dense_specs(400, (800, 1600)), 7)
    for layer in net.layers:
        fan_in = layer.spec.input_dim
        assert layer.W.var() == pytest.approx(2.0 / fan_in, rel=0.2)
        assert np.all(layer.b == 0)
        assert np.all(layer.gamma == 1) and np.all(layer.beta == 0)
    assert init_weights(dense_specs(5, (4,), 2), 3) == init_weights(dense_specs(5, (4,), 2), 3)


def test_weights_round_trip(tmp_path):
    net = _train_steps(1)
    path = tmp_path / "w.pdnw"
    save_weights(net, path)
    back = load_weights(path)
    assert back == net
    x = np.random.default_rng(0).normal(size=(7, 3))
    assert np.array_equal(forward(net, x, "infer")[0], forward(back, x, "infer")[0])
    data = path.read_bytes()
    path.write_bytes(data[:-5])
    with pytest.raises(FormatError):
        load_weights(path)
    path.write_bytes(b"NOPE" + data[4:])
    with pytest.raises(FormatError, match="PDNW"):
        load_weights(path)
