from collections.abc import Callable
from pathlib import Path

import numpy as np
import pytest

import gestalt
from gestalt.errors import (
    DegenerateBatchError,
    InvalidLabelError,
    InvariantViolation,
    MissingPathError,
    ParseError,
    ShapeMismatchError,
)
from gestalt.nn import (
    LayerSpec,
    Network,
    OptimizerState,
    batchnorm_backward,
    batchnorm_forward,
    conv2d_backward,
    conv2d_forward,
    dropout_backward,
    dropout_forward,
    fc_backward,
    fc_forward,
    init_he_normal,
    init_xavier_modified,
    load_checkpoint,
    optimizer_step,
    pool2d_backward,
    pool2d_forward,
    relu_backward,
    relu_forward,
    save_checkpoint,
    softmax,
    softmax_cross_entropy,
)
from gestalt.nn.checkpoint import checkpoint_bytes

CASES = range(20)
EPS = 1e-6


def numeric_gradient(f: Callable[[], np.ndarray], x: np.ndarray, dout: np.ndarray) -> np.ndarray:
    """Central differences of sum(f() * dout) w.r.t. x, perturbing x in place"""
    grad = np.zeros_like(x)
    for index in np.ndindex(x.shape):
        original = x[index]
        x[index] = original + EPS
        plus = float((f() * dout).sum())
        x[index] = original - EPS
        minus = float((f() * dout).sum())
        x[index] = original
        grad[index] = (plus - minus) / (2 * EPS)
    return grad


def assert_gradient(analytic: np.ndarray, numeric: np.ndarray):
    np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-7)


@pytest.mark.parametrize("case", CASES)
def test_conv2d_gradients(case: int):
    rng = np.random.default_rng(case)
    stride, padding = 1 + case % 2, (case // 2) % 2
    x = rng.normal(size=(2, 3, 5, 5))
    weight = rng.normal(size=(4, 3, 3, 3))
    bias = rng.normal(size=4)
    out, cache = conv2d_forward(x, weight, bias, stride, padding)
    dout = rng.normal(size=out.shape)

    dx, dweight, dbias = conv2d_backward(dout, cache)

    forward = lambda: conv2d_forward(x, weight, bias, stride, padding)[0]  # noqa: E731
    assert_gradient(dx, numeric_gradient(forward, x, dout))
    assert_gradient(dweight, numeric_gradient(forward, weight, dout))
    assert_gradient(dbias, numeric_gradient(forward, bias, dout))


@pytest.mark.parametrize("case", CASES)
def test_batchnorm_gradients(case: int):
    rng = np.random.default_rng(case)
    shape = (4, 3, 2, 2) if case % 2 else (5, 4)
    x = rng.normal(size=shape) * 2 + 1
    gamma, beta = rng.normal(size=shape[1]), rng.normal(size=shape[1])
    running_mean, running_var = np.zeros(shape[1]), np.ones(shape[1])

    def forward() -> np.ndarray:
        return batchnorm_forward(x, gamma, beta, running_mean, running_var, True, update_stats=False)[0]

    out, cache = batchnorm_forward(x, gamma, beta, running_mean, running_var, True, update_stats=False)
    assert cache is not None
    dout = rng.normal(size=out.shape)

    dx, dgamma, dbeta = batchnorm_backward(dout, cache)

    assert_gradient(dx, numeric_gradient(forward, x, dout))
    assert_gradient(dgamma, numeric_gradient(forward, gamma, dout))
    assert_gradient(dbeta, numeric_gradient(forward, beta, dout))


@pytest.mark.parametrize("case", CASES)
def test_pool_gradients(case: int):
    rng = np.random.default_rng(case)
    kind = "max" if case % 2 else "avg"
    x = rng.normal(size=(2, 2, 6, 6))
    out, cache = pool2d_forward(x, kind)
    dout = rng.normal(size=out.shape)

    dx = pool2d_backward(dout, cache)

    assert_gradient(dx, numeric_gradient(lambda: pool2d_forward(x, kind)[0], x, dout))


@pytest.mark.parametrize("case", CASES)
def test_fc_gradients(case: int):
    rng = np.random.default_rng(case)
    x, weight, bias = rng.normal(size=(3, 5)), rng.normal(size=(5, 4)), rng.normal(size=4)
    out, cache = fc_forward(x, weight, bias)
    dout = rng.normal(size=out.shape)

    dx, dweight, dbias = fc_backward(dout, cache)

    forward = lambda: fc_forward(x, weight, bias)[0]  # noqa: E731
    assert_gradient(dx, numeric_gradient(forward, x, dout))
    assert_gradient(dweight, numeric_gradient(forward, weight, dout))
    assert_gradient(dbias, numeric_gradient(forward, bias, dout))


@pytest.mark.parametrize("case", CASES)
def test_relu_gradient(case: int):
    rng = np.random.default_rng(case)
    # keep inputs away from the kink
    x = rng.normal(size=(3, 7))
    x += np.sign(x) * 0.01
    out, mask = relu_forward(x)
    dout = rng.normal(size=out.shape)

    assert_gradient(relu_backward(dout, mask), numeric_gradient(lambda: relu_forward(x)[0], x, dout))


@pytest.mark.parametrize("case", CASES)
def test_dropout_gradient(case: int):
    rng = np.random.default_rng(case)
    x = rng.normal(size=(4, 6))

    def forward() -> np.ndarray:
        return dropout_forward(x, 0.5, True, np.random.default_rng(case))[0]

    out, mask = dropout_forward(x, 0.5, True, np.random.default_rng(case))
    dout = rng.normal(size=out.shape)

    assert_gradient(dropout_backward(dout, mask), numeric_gradient(forward, x, dout))


@pytest.mark.parametrize("case", CASES)
def test_softmax_cross_entropy_gradient(case: int):
    rng = np.random.default_rng(case)
    logits = rng.normal(size=(4, 5)) * 3
    labels = rng.integers(0, 5, size=4)
    weights = rng.uniform(0.5, 2.0, size=5) if case % 2 else None

    _, grad = softmax_cross_entropy(logits, labels, weights)

    numeric = numeric_gradient(lambda: np.array(softmax_cross_entropy(logits, labels, weights)[0]), logits, np.array(1.0))
    assert_gradient(grad, numeric)


def test_single_logit_vector_gradient_is_softmax_minus_one_hot():
    logits = np.array([1.0, 2.0, 0.5])
    loss, grad = softmax_cross_entropy(logits, 1)
    expected = softmax(logits)
    expected[1] -= 1
    np.testing.assert_allclose(grad, expected)
    assert loss == pytest.approx(-np.log(softmax(logits)[1]))


def test_cross_entropy_rejects_out_of_range_labels():
    with pytest.raises(InvalidLabelError):
        softmax_cross_entropy(np.zeros((2, 3)), np.array([0, 3]))


def test_softmax_is_stable_for_large_logits():
    probabilities = softmax(np.array([[1000.0, 1000.0, -1000.0]]))
    np.testing.assert_allclose(probabilities, [[0.5, 0.5, 0.0]])


def test_batchnorm_needs_two_samples_in_train_mode():
    with pytest.raises(DegenerateBatchError):
        batchnorm_forward(np.ones((1, 3)), np.ones(3), np.zeros(3), np.zeros(3), np.ones(3), True)


def test_batchnorm_running_statistics(rng: np.random.Generator):
    x = rng.normal(size=(6, 2)) * 3 + 2
    running_mean, running_var = np.zeros(2), np.ones(2)

    batchnorm_forward(x, np.ones(2), np.zeros(2), running_mean, running_var, True, momentum=0.9)

    np.testing.assert_allclose(running_mean, 0.1 * x.mean(axis=0))
    np.testing.assert_allclose(running_var, 0.9 + 0.1 * x.var(axis=0, ddof=1))


def test_batchnorm_infer_mode_uses_running_statistics(rng: np.random.Generator):
    x = rng.normal(size=(3, 2))
    out, cache = batchnorm_forward(x, np.full(2, 2.0), np.full(2, 0.5), np.full(2, 1.0), np.full(2, 4.0), False)
    assert cache is None
    np.testing.assert_allclose(out, 2.0 * (x - 1.0) / np.sqrt(4.0 + 1e-3) + 0.5)


def test_max_pool_ties_go_to_the_first_element():
    x = np.ones((1, 1, 2, 2))
    out, cache = pool2d_forward(x, "max")
    dx = pool2d_backward(np.ones_like(out), cache)
    np.testing.assert_array_equal(dx[0, 0], [[1.0, 0.0], [0.0, 0.0]])


def test_dropout_is_identity_when_not_training(rng: np.random.Generator):
    x = rng.normal(size=(2, 3))
    out, mask = dropout_forward(x, 0.5, False)
    assert out is x
    assert mask is None
    with pytest.raises(ValueError, match="dropout rate"):
        dropout_forward(x, 1.0, True)


def test_dropout_keeps_half_the_units_and_the_expected_value(rng: np.random.Generator):
    units = 10**5
    x = np.ones(units)

    out, _ = dropout_forward(x, 0.5, True, rng)

    sigma = np.sqrt(0.5 * 0.5 / units)
    assert abs((out > 0).mean() - 0.5) < 3 * sigma
    # survivors are 2, so the output standard deviation is 1
    assert abs(out.mean() - 1.0) < 3 / np.sqrt(units)


def test_conv_keeps_side_with_same_padding():
    out, _ = conv2d_forward(np.zeros((1, 1, 100, 100)), np.zeros((3, 1, 3, 3)), np.zeros(3), 1, 1)
    assert out.shape == (1, 3, 100, 100)


def test_conv_rejects_channel_mismatch():
    with pytest.raises(ShapeMismatchError):
        conv2d_forward(np.zeros((1, 2, 5, 5)), np.zeros((3, 1, 3, 3)), np.zeros(3))


def test_he_normal_variance():
    weights = init_he_normal((400, 500), seed=1)
    assert weights.std() == pytest.approx(np.sqrt(2 / 400), rel=0.02)
    assert abs(weights.mean()) < 0.002


def test_xavier_modified_variance():
    weights = init_xavier_modified((300, 100), scale=0.3, seed=2)
    assert weights.std() == pytest.approx(np.sqrt(0.3 * 2 / 400), rel=0.02)
    assert not init_xavier_modified((3, 4), scale=0.0).any()
    with pytest.raises(ValueError, match="scale"):
        init_xavier_modified((3, 4), scale=-1.0)


def test_adam_first_step_moves_by_the_learning_rate():
    params = {"w": np.array([1.0, -2.0, 0.5])}
    grads = {"w": np.array([0.3, -4.0, 1e-2])}
    state = OptimizerState.adam(0.01)

    optimizer_step(params, grads, state)

    np.testing.assert_allclose(params["w"], [0.99, -1.99, 0.49], atol=1e-6)
    assert state.timestep == 1


def test_adam_minimises_a_quadratic():
    params = {"w": np.array([1.0])}
    state = OptimizerState.adam(0.1)

    for _ in range(200):
        optimizer_step(params, {"w": 2 * params["w"]}, state)

    assert abs(params["w"][0]) < 1e-2


def test_sgd_momentum_accumulates_velocity():
    params = {"w": np.array([1.0])}
    state = OptimizerState.sgd(0.1, momentum=0.9)

    optimizer_step(params, {"w": np.array([1.0])}, state)
    optimizer_step(params, {"w": np.array([1.0])}, state)

    # velocities -0.1 then -0.19
    np.testing.assert_allclose(params["w"], [0.71])
    np.testing.assert_allclose(state.buffers()["velocity/w"], [-0.19])


def test_optimizer_rejects_gradient_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        optimizer_step({"w": np.zeros(3)}, {"w": np.zeros(2)}, OptimizerState.adam())


def tiny_specs() -> list[LayerSpec]:
    return [
        LayerSpec(kind="conv", channels=2),
        LayerSpec(kind="batchnorm"),
        LayerSpec(kind="relu"),
        LayerSpec(kind="pool"),
        LayerSpec(kind="flatten"),
        LayerSpec(kind="dense", units=3, head=True),
    ]


def smooth_specs() -> list[LayerSpec]:
    return [
        LayerSpec(kind="conv", channels=2),
        LayerSpec(kind="batchnorm"),
        LayerSpec(kind="pool", pool="avg"),
        LayerSpec(kind="flatten"),
        LayerSpec(kind="dense", units=3, head=True),
    ]


@pytest.mark.parametrize("case", CASES)
def test_network_parameter_gradients(case: int):
    rng = np.random.default_rng(case)
    network = Network(smooth_specs(), (1, 4, 4), seed=case, dtype=np.float64)
    x = rng.normal(size=(3, 1, 4, 4))
    labels = rng.integers(0, 3, size=3)

    def loss() -> np.ndarray:
        logits, _ = network.forward(x, train=True, update_stats=False)
        return np.array(softmax_cross_entropy(logits, labels)[0])

    logits, _ = network.forward(x, train=True, update_stats=False)
    _, dlogits = softmax_cross_entropy(logits, labels)
    network.backward(dlogits)
    gradients = {key: value.copy() for key, value in network.gradients().items()}

    for key, param in network.parameters().items():
        assert_gradient(gradients[key], numeric_gradient(loss, param, np.array(1.0)))


def test_network_shapes_and_names():
    network = Network(tiny_specs(), (1, 4, 4))
    assert network.output_shape == (3,)
    assert [layer.name for layer in network.layers] == ["conv0", "batchnorm0", "relu0", "pool0", "flatten0", "dense0"]
    assert network.head.name == "dense0"
    assert set(network.buffers()) == {"batchnorm0.running_mean", "batchnorm0.running_var"}
    with pytest.raises(ShapeMismatchError):
        network.forward(np.zeros((1, 1, 5, 5)))


def test_network_state_round_trip(rng: np.random.Generator):
    source = Network(tiny_specs(), (1, 4, 4), seed=1)
    target = Network(tiny_specs(), (1, 4, 4), seed=2)
    x = rng.normal(size=(2, 1, 4, 4))

    target.load_state(source.state())

    np.testing.assert_array_equal(source.forward(x)[0], target.forward(x)[0])


def test_network_captures_named_layers():
    network = Network(tiny_specs(), (1, 4, 4))
    _, captured = network.forward(np.zeros((2, 1, 4, 4)), capture=["pool0"])
    assert captured["pool0"].shape == (2, 2, 2, 2)


def test_debug_checks_catch_non_finite_activations(monkeypatch: pytest.MonkeyPatch):
    monkeypatch.setattr(gestalt, "system_config", gestalt.system_config.model_copy(update={"debug_checks": True}))
    network = Network(tiny_specs(), (1, 4, 4))
    x = np.zeros((2, 1, 4, 4))
    x[0, 0, 0, 0] = np.nan
    with pytest.raises(InvariantViolation):
        network.forward(x)


def test_checkpoint_round_trip_is_byte_stable(tmp_path: Path, rng: np.random.Generator):
    tensors = {"b": rng.normal(size=(2, 3)).astype(np.float32), "a": np.arange(4)}
    manifest = {"kind": "test", "classes": ["x", "y"]}

    save_checkpoint(tmp_path / "one.ckpt", tensors, manifest)
    save_checkpoint(tmp_path / "two.ckpt", dict(reversed(tensors.items())), manifest)
    loaded, loaded_manifest = load_checkpoint(tmp_path / "one.ckpt")

    assert (tmp_path / "one.ckpt").read_bytes() == (tmp_path / "two.ckpt").read_bytes()
    assert loaded.keys() == tensors.keys()
    for name, value in tensors.items():
        assert loaded[name].dtype == value.dtype
        np.testing.assert_array_equal(loaded[name], value)
    assert loaded_manifest["kind"] == "test"
    assert loaded_manifest["tensors"] == ["a", "b"]


def test_checkpoint_errors(tmp_path: Path):
    with pytest.raises(MissingPathError):
        load_checkpoint(tmp_path / "absent.ckpt")
    (tmp_path / "junk.ckpt").write_bytes(b"not a zip")
    with pytest.raises(ParseError):
        load_checkpoint(tmp_path / "junk.ckpt")
    old = checkpoint_bytes({}, {"format_version": 0})
    (tmp_path / "old.ckpt").write_bytes(old)
    with pytest.raises(ParseError, match="unsupported checkpoint format"):
        load_checkpoint(tmp_path / "old.ckpt")
