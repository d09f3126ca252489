import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradcheck import cases, check
from mcnfsp.games import load_game
from mcnfsp.nn import (
    SGD,
    Adam,
    CheckpointError,
    Conv2d,
    Dense,
    LossKind,
    Network,
    NetworkSpec,
    ParamStore,
    TrainingError,
    apply_gradients,
    dumps,
    loads,
    make_optimizer,
    mlp_spec,
    network_for,
    othello_spec,
)
from mcnfsp.nn.layers import parse_layer, softmax


@pytest.mark.parametrize("label,spec,kind", cases(), ids=[c[0] for c in cases()])
def test_gradients_match_finite_differences(label, spec, kind):
    assert check(spec, kind, seed=123, coords=25) < 1e-4


def test_conv_matches_direct_convolution():
    rng = np.random.default_rng(0)
    conv = Conv2d(2, 3, 3)
    p = {"W": rng.normal(size=(3, 2, 3, 3)), "b": rng.normal(size=3)}
    x = rng.normal(size=(1, 2, 4, 4))
    y, _ = conv.forward(x, p, False, None)
    padded = np.pad(x[0], ((0, 0), (1, 1), (1, 1)))
    for o in range(3):
        for i in range(4):
            for j in range(4):
                ref = (padded[:, i : i + 3, j : j + 3] * p["W"][o]).sum() + p["b"][o]
                assert np.isclose(y[0, o, i, j], ref)


def test_spec_description_round_trips():
    for spec in (othello_spec(value_head=True), mlp_spec(22, 3, dropout=0.1), mlp_spec(1, 2, softmax_head=False)):
        assert NetworkSpec.parse(spec.describe()) == spec
    assert parse_layer("dense(4, 2)") == Dense(4, 2)


def test_value_head_must_end_in_tanh():
    with pytest.raises(ValueError):
        NetworkSpec(4, (Dense(4, 4),), (Dense(4, 2),), (Dense(4, 1),))


def test_forward_shapes_and_probabilities():
    net = Network(network_for(load_game("othello4"), value_head=True))
    params = net.init_params(np.random.default_rng(0))
    x = np.random.default_rng(1).random((5, 33)).astype(np.float32)
    probs, value = net.forward(params, x)
    assert probs.shape == (5, 17) and value.shape == (5,)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-6)
    assert np.all(np.abs(value) <= 1.0)
    single, v = net.forward(params, x[0])
    assert single.shape == (17,) and np.ndim(v) == 0


def test_dropout_is_off_at_inference():
    net = Network(mlp_spec(3, 2, dropout=0.5))
    params = net.init_params(np.random.default_rng(0))
    x = np.ones((2, 3), dtype=np.float32)
    assert np.array_equal(net.forward(params, x)[0], net.forward(params, x)[0])
    with pytest.raises(ValueError):
        net.forward(params, x, train=True)


def test_loss_terms_decompose():
    net = Network(mlp_spec(3, 2, value_head=True))
    params = net.init_params(np.random.default_rng(0), dtype=np.float64)
    obs = np.random.default_rng(1).normal(size=(4, 3))
    pi = np.array([[1.0, 0.0]] * 4)
    z = np.array([1.0, -1.0, 0.0, 1.0])
    probs, value = net.forward(params, obs)
    loss, _, terms = net.loss_and_gradients(params, LossKind.POLICY_VALUE, obs, policy=pi, outcome=z)
    assert np.isclose(terms["policy"], -np.log(probs[:, 0]).mean())
    assert np.isclose(terms["value"], ((value - z) ** 2).mean())
    assert np.isclose(loss, terms["policy"] + terms["value"])


def test_cross_entropy_of_confident_match_is_near_zero():
    net = Network(mlp_spec(1, 2, hidden=()))
    params = ParamStore({"policy.0.W": np.array([[0.0, 0.0]]), "policy.0.b": np.array([40.0, 0.0])})
    loss, _, _ = net.loss_and_gradients(params, "cross_entropy", np.ones((3, 1)), policy=np.eye(2)[[0, 0, 0]])
    assert loss < 1e-12


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_loss_raises():
    net = Network(mlp_spec(2, 2, softmax_head=False))
    params = net.init_params(np.random.default_rng(0), dtype=np.float64)
    with pytest.raises(TrainingError):
        net.loss_and_gradients(params, "mse_q", np.full((1, 2), np.inf), actions=[0], targets=[0.0])


def test_sgd_step_is_exact():
    p = ParamStore({"w": np.array([1.0, 2.0])})
    g = ParamStore({"w": np.array([0.5, -1.0])})
    out = SGD(0.1).step(p, g)
    assert np.array_equal(out["w"], np.array([1.0, 2.0]) - 0.1 * np.array([0.5, -1.0]))
    assert np.array_equal(p["w"], [1.0, 2.0])  # out of place


def test_adam_first_step_moves_by_lr_times_sign():
    p = ParamStore({"w": np.array([0.0, 0.0, 0.0])})
    g = ParamStore({"w": np.array([3.0, -0.2, 0.0])})
    out = Adam(0.01).step(p, g)
    assert np.allclose(out["w"], [-0.01, 0.01, 0.0], atol=1e-8)


def test_optimizer_rejects_mismatched_grads():
    p = ParamStore({"w": np.zeros(2)})
    with pytest.raises(ValueError):
        apply_gradients(p, ParamStore({"v": np.zeros(2)}), make_optimizer("sgd", 0.1))
    with pytest.raises(ValueError):
        make_optimizer("rmsprop", 0.1)


def test_checkpoint_round_trip_is_bit_exact():
    spec = othello_spec(value_head=True)
    net = Network(spec)
    params = net.init_params(np.random.default_rng(5))
    blob = dumps(params, spec)
    back, back_spec = loads(blob)
    assert back_spec == spec and back.bit_equal(params)
    x = np.random.default_rng(6).random((10, 33)).astype(np.float32)
    a, av = net.forward(params, x)
    b, bv = Network(back_spec).forward(back, x)
    assert a.tobytes() == b.tobytes() and av.tobytes() == bv.tobytes()


@pytest.mark.parametrize("mutate", [
    lambda b: b"XXXXXXXX" + b[8:],
    lambda b: b[:8] + b"\x09\x00" + b[10:],
    lambda b: b[:-3],
    lambda b: b + b"\x00",
])
def test_corrupt_checkpoints_are_rejected(mutate):
    spec = mlp_spec(3, 2)
    blob = dumps(Network(spec).init_params(np.random.default_rng(0)), spec)
    with pytest.raises(CheckpointError):
        loads(mutate(blob))


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=8))
@settings(max_examples=100, deadline=None)
def test_softmax_is_a_distribution(z):
    p = softmax(np.array(z))
    assert np.isclose(p.sum(), 1.0) and np.all(p >= 0)


def test_param_store_checksum_tracks_content():
    a = ParamStore({"w": np.arange(3.0)})
    b = a.copy()
    assert a.checksum() == b.checksum() and a.bit_equal(b)
    b["w"][0] = 9.0
    assert a.checksum() != b.checksum() and not a.bit_equal(b)
