import numpy as np
import pytest

from evsnn import engine
from evsnn.engine import LifState, lif_step, run_layer, run_network, trace_lines
from evsnn.errors import DimensionMismatch, ShapeMismatch
from evsnn.network import LayerSpec, NetworkSpec, QuantWeights, parse_network, random_weights, reference_network

from nets import random_input, random_net
from oracle import brute_force


def test_lif_rest():
    state, s = lif_step(LifState.zeros(3, 1.0, 0.9), np.zeros(3))
    assert not s.any() and not state.potentials.any()


def test_lif_fires_at_threshold():
    state, s = lif_step(LifState.zeros(1, 0.7, 0.9), np.array([0.7]))
    assert s[0] == 1 and state.potentials[0] == 0


def test_lif_leak_closed_form():
    theta = 1.0
    state = LifState(np.array([0.5 * theta]), theta, 0.9)
    for _ in range(3):
        state, s = lif_step(state, np.zeros(1))
        assert not s.any()
    assert state.potentials[0] == pytest.approx(0.3645 * theta, abs=1e-12)


def test_lif_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        lif_step(LifState.zeros(3, 1.0, 0.9), np.zeros(2))


def test_pool_or_semantics():
    layer = LayerSpec(1, "pool", (1, 1, 1), (2, 2), 1, 2)
    x = np.zeros((1, 2, 2, 1), np.uint8)
    x[0, 1, 0, 0] = 1
    assert run_layer(layer, None, x).spikes.reshape(-1).tolist() == [1]
    x[0] = 1
    assert run_layer(layer, None, x).spikes.reshape(-1).tolist() == [1]


def test_zero_weight_conv_is_silent():
    layer = LayerSpec(1, "conv", (4, 4, 3), (3, 3), 3, 1, 1)
    x = np.ones((5, 4, 4, 2), np.uint8)
    out = run_layer(layer, np.zeros((3, 3, 2, 3)), x)
    assert out.spike_count == 0 and out.spikes.shape == (5, 4, 4, 3)


def test_single_neuron_trace():
    layer = LayerSpec(1, "full", (1,), theta=0.8, lam=0.9)
    x = np.zeros((6, 1), np.uint8)
    x[3] = 1
    out = run_layer(layer, np.array([[0.8]]), x)
    assert out.spikes[:, 0].tolist() == [0, 0, 0, 1, 0, 0]


def test_run_layer_shape_mismatch():
    layer = LayerSpec(1, "full", (2,))
    with pytest.raises(ShapeMismatch):
        run_layer(layer, np.zeros((3, 2)), np.zeros((1, 4), np.uint8))
    conv = LayerSpec(1, "conv", (2, 2, 1), (1, 1), 1)
    with pytest.raises(ShapeMismatch):
        run_layer(conv, np.zeros((1, 1, 2, 1)), np.zeros((1, 2, 2, 3), np.uint8))


def test_zero_input_reference():
    net = random_weights(reference_network(), np.random.default_rng(1))
    run = run_network(net, np.zeros((4, 128, 128, 2), np.uint8))
    assert all(o.spike_count == 0 for o in run.outputs)
    assert run.prediction == 0
    assert run.class_counts.shape == (11,)


def test_readout_tie_break():
    last = np.zeros((3, 4), np.uint8)
    last[:, 1] = 1
    last[:, 3] = 1
    assert engine.readout(last) == 1


def test_input_validation():
    net = parse_network("layer 0 input size=2x2x1\nlayer 1 full size=1\n")
    with pytest.raises(ShapeMismatch):
        run_network(net, np.zeros((3, 2, 2, 2)))
    with pytest.raises(ShapeMismatch):
        run_network(net, np.full((3, 2, 2, 1), 2))


@pytest.mark.parametrize("seed", range(20))
def test_oracle_agreement(seed):
    rng = np.random.default_rng(seed)
    net = random_net(rng)
    x = random_input(rng, net, int(rng.integers(1, 11)))
    run = run_network(net, x)
    expected = brute_force(net, x)
    for o, ref in zip(run.outputs, expected):
        assert o.spikes.reshape(len(x), -1).tolist() == ref


def test_determinism():
    rng = np.random.default_rng(3)
    net = random_net(rng)
    x = random_input(rng, net, 15)
    a, b = run_network(net, x), run_network(net, x)
    for oa, ob in zip(a.outputs, b.outputs):
        assert np.array_equal(oa.spikes, ob.spikes)
    assert np.array_equal(a.outputs[-1].state.potentials, b.outputs[-1].state.potentials)


def test_reset_and_rest_below_threshold():
    rng = np.random.default_rng(4)
    layer = LayerSpec(1, "full", (16,), theta=1.0, lam=0.9)
    w = rng.normal(0.3, 0.5, (20, 16))
    x = (rng.random((30, 20)) < 0.4).astype(np.uint8)
    state = LifState.zeros(16, 1.0, 0.9)
    currents = engine.dense_currents(w, x)
    for t in range(30):
        state, s = lif_step(state, currents[t])
        assert (state.potentials[s == 1] == 0).all()
        assert (state.potentials < 1.0).all()


def test_leak_geometric():
    v0 = np.array([0.9, -0.6, 0.2])
    state = LifState(v0.copy(), 1.0, 0.5)
    for k in range(1, 6):
        state, _ = lif_step(state, np.zeros(3))
        assert np.array_equal(state.potentials, v0 * 0.5**k)
    fixed = LifState(engine.to_fixed(v0, 12), 1.0, 0.5, 12)
    prev = np.abs(fixed.potentials)
    for _ in range(20):
        fixed, _ = lif_step(fixed, np.zeros(3, np.int64))
        assert (np.abs(fixed.potentials) <= prev).all()
        prev = np.abs(fixed.potentials)


def test_fixed_point_close_to_real():
    rng = np.random.default_rng(5)
    net = random_net(rng, max_layers=3)
    x = random_input(rng, net, 10)
    real = run_network(net, x)
    fixed = run_network(net, x, frac_bits=24)
    assert fixed.outputs[-1].state.potentials.dtype == np.int64
    # 24 fractional bits: only near-threshold ties could ever differ
    agree = np.mean(real.outputs[-1].spikes == fixed.outputs[-1].spikes)
    assert agree > 0.95


def test_fixed_point_exact_on_grid():
    net = parse_network("layer 0 input size=1x1x2\nlayer 1 full size=1 theta=1 lambda=0.5\n")
    net = net.with_weights({1: QuantWeights(np.array([[64], [32]]), 1 / 128)})
    x = np.array([[[[1, 0]]], [[[1, 1]]], [[[0, 0]]], [[[1, 1]]]], np.uint8)
    assert np.array_equal(run_network(net, x).outputs[1].spikes, run_network(net, x, frac_bits=8).outputs[1].spikes)
    # 0.5, 0.25 + 0.75 = 1.0 fires, 0, 0.75
    assert run_network(net, x).outputs[1].spikes.reshape(-1).tolist() == [0, 1, 0, 0]


def test_trace_lines():
    net = parse_network("layer 0 input size=1x1x2\nlayer 1 full size=2 theta=0.5\n")
    net = net.with_weights({1: QuantWeights(np.array([[127, 0], [0, 127]]), 1 / 127)})
    x = np.array([[[[1, 0]]], [[[0, 1]]]], np.uint8)
    run = run_network(net, x)
    lines = list(trace_lines(run.outputs, step_offset=10))
    assert lines == ["10,0,0", "10,1,0", "11,0,1", "11,1,1"]
    assert len(lines) == sum(o.spike_count for o in run.outputs)


def test_reference_output_width():
    net = random_weights(reference_network(), np.random.default_rng(0))
    rng = np.random.default_rng(0)
    x = (rng.random((5, 128, 128, 2)) < 0.05).astype(np.uint8)
    run = run_network(net, x)
    assert run.class_counts.shape == (11,)
    assert [o.spikes.shape[1:] for o in run.outputs] == [tuple(l.size) for l in net.layers]
