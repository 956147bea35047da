import numpy as np
import pytest

from evsnn import tiler
from evsnn.engine import run_network
from evsnn.errors import CoverageGap, OverlapDetected, PlanMismatch
from evsnn.network import parse_network, random_weights, reference_network
from evsnn.tiler import build_schedule, merge_streams, plan_layer, plan_tiles, run_tiled, split_stream

from nets import random_input, random_net


def test_plan_fits():
    plan = plan_layer(7, 11, 1024)
    assert plan.tiles == (range(0, 11),)


def test_plan_two_tiles():
    assert plan_layer(6, 512, 256).tiles == (range(0, 256), range(256, 512))


def test_plan_reference():
    plans = plan_tiles(reference_network(), 2048)
    sizes = [2048, 16384, 4096, 8192, 2048, 512, 11]
    assert [p.layer_index for p in plans] == list(range(1, 8))
    assert [len(p) for p in plans] == [-(-n // 2048) for n in sizes]
    assert len(plans[1]) == 8


@pytest.mark.parametrize("n, cap", [(1, 1), (10, 3), (64, 64), (65, 8), (7, 100)])
def test_plan_partition(n, cap):
    plan = plan_layer(1, n, cap)
    covered = [i for r in plan.tiles for i in r]
    assert covered == list(range(n))
    assert all(len(r) <= cap for r in plan.tiles)
    assert len(plan) == -(-n // cap)


def test_plan_rejects_zero_capacity():
    with pytest.raises(ValueError):
        plan_layer(1, 4, 0)


CONV_NET = "layer 0 input size=4x3x1\nlayer 1 conv size=4x3x2 kernel=3x3 features=2 padding=1\n"


def test_split_single_tile_identity():
    net = parse_network(CONV_NET)
    x = np.ones((2, 4, 3, 1), np.uint8)
    (stream,) = split_stream(net, x, plan_layer(1, 24, 24))
    assert stream.spikes is x


def test_split_dense_broadcast():
    net = parse_network("layer 0 input size=2x2x1\nlayer 1 full size=4\n")
    x = np.random.default_rng(0).integers(0, 2, (3, 2, 2, 1)).astype(np.uint8)
    streams = split_stream(net, x, plan_layer(1, 4, 2))
    assert len(streams) == 2 and all(np.array_equal(s.spikes, x) for s in streams)


def test_split_row_bands_with_halo():
    net = parse_network(CONV_NET)
    x = np.arange(4)[None, :, None, None] * np.ones((1, 4, 3, 1), int)
    # 2 output rows per band: 12 neurons per tile
    top, bottom = split_stream(net, x.astype(np.uint8), plan_layer(1, 24, 12))
    assert top.rows == range(0, 3) and top.row_padding == (1, 0)
    assert bottom.rows == range(1, 4) and bottom.row_padding == (0, 1)
    assert top.spikes[0, :, 0, 0].tolist() == [0, 1, 2]


def test_split_plan_mismatch():
    net = parse_network(CONV_NET)
    x = np.zeros((1, 4, 3, 1), np.uint8)
    with pytest.raises(PlanMismatch):
        split_stream(net, x, plan_layer(1, 20, 10))
    with pytest.raises(PlanMismatch):
        split_stream(net, np.zeros((1, 3, 3, 1), np.uint8), plan_layer(1, 24, 12))
    with pytest.raises(PlanMismatch):
        split_stream(net, x, plan_layer(5, 24, 12))


def test_merge_identity_and_order():
    plan = plan_layer(1, 4, 2)
    t0 = np.array([[1, 0]], np.uint8)
    t1 = np.array([[0, 1]], np.uint8)
    a = merge_streams([(range(0, 2), t0), (range(2, 4), t1)], plan)
    b = merge_streams([(range(2, 4), t1), (range(0, 2), t0)], plan)
    assert a.tolist() == b.tolist() == [[1, 0, 0, 1]]
    one = plan_layer(1, 4, 4)
    x = np.array([[0, 1, 1, 0]], np.uint8)
    assert np.array_equal(merge_streams([(range(0, 4), x)], one), x)


def test_merge_errors():
    plan = plan_layer(1, 4, 2)
    s = np.zeros((1, 2), np.uint8)
    with pytest.raises(OverlapDetected):
        merge_streams([(range(0, 2), s), (range(1, 3), s), (range(2, 4), s)], plan)
    with pytest.raises(CoverageGap):
        merge_streams([(range(0, 2), s)], plan)
    with pytest.raises(CoverageGap):
        merge_streams([(range(2, 4), s)], plan)
    with pytest.raises(CoverageGap):
        merge_streams([], plan)


def test_split_merge_round_trip():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = int(rng.integers(3, 60))
        cuts = np.sort(rng.choice(np.arange(1, n), 2, replace=False))
        bounds = [0, *cuts.tolist(), n]
        tiles = [range(a, b) for a, b in zip(bounds, bounds[1:])]
        plan = tiler.TilePlan(1, tuple(tiles), max(len(t) for t in tiles))
        x = rng.integers(0, 2, (int(rng.integers(1, 6)), n)).astype(np.uint8)
        parts = [(t, x[:, t.start:t.stop]) for t in tiles]
        rng.shuffle(parts)
        assert np.array_equal(merge_streams(parts, plan), x)


def test_schedule_legal_and_predicted():
    rng = np.random.default_rng(2)
    for _ in range(20):
        net = random_net(rng)
        cap = int(rng.integers(1, 20))
        run = run_tiled(net, random_input(rng, net, 3), cap)
        assert run.schedule.is_layer_synchronous()
        assert run.schedule.slots == build_schedule(net, plan_tiles(net, cap)).slots
        assert run.stats.slots == sum(len(p) for p in plan_tiles(net, cap))


def test_large_capacity_degenerates():
    rng = np.random.default_rng(8)
    net = random_net(rng)
    x = random_input(rng, net, 5)
    run = run_tiled(net, x, 10_000)
    assert [s.tile_index for s in run.schedule.slots] == [0] * (len(net) - 1)
    ref = run_network(net, x)
    assert all(np.array_equal(a.spikes, b.spikes) for a, b in zip(run.outputs, ref.outputs))


def test_toy_capacity_8():
    net = parse_network(
        "layer 0 input size=6x6x1\n"
        "layer 1 conv size=6x6x2 kernel=3x3 features=2 padding=1 theta=0.6\n"
        "layer 2 pool size=3x3x2 kernel=2x2\n"
        "layer 3 full size=4 theta=0.8\n"
    )
    net = random_weights(net, np.random.default_rng(0))
    x = (np.random.default_rng(1).random((12, 6, 6, 1)) < 0.4).astype(np.uint8)
    run, ref = run_tiled(net, x, 8), run_network(net, x)
    assert sum(o.spike_count for o in ref.outputs[1:]) > 0
    for a, b in zip(run.outputs, ref.outputs):
        assert np.array_equal(a.spikes, b.spikes)
    assert run.prediction == ref.prediction


def test_schedule_text():
    net = parse_network(CONV_NET)
    text = build_schedule(net, plan_tiles(net, 12)).to_text()
    assert text.splitlines() == [
        "slot 0: layer 1 tile 0 neurons [0, 12) input_rows [0, 3)",
        "slot 1: layer 1 tile 1 neurons [12, 24) input_rows [1, 4)",
    ]
