"""Acceptance criteria, one test each, at the stated tolerances.

Each test records its outcome through the ``criterion`` fixture; the terminal
summary prints one PASS/FAIL line per criterion.
"""

import time
from importlib import resources

import numpy as np

from evsnn import events, perf, synthetic
from evsnn.cli import main
from evsnn.engine import run_network
from evsnn.errors import SimulationError
from evsnn.network import (
    dump_weights,
    emit_network,
    format_size,
    load_weights,
    parse_network,
    random_weights,
    reference_network,
)
from evsnn.tiler import run_tiled
from evsnn.trainer import TrainConfig, forward_differentiable, init_params, train

from gradcheck import finite_difference_check
from nets import random_input, random_net
from oracle import brute_force

REF_NET = resources.files("evsnn.data").joinpath("dvs_gesture.net")


def test_1_energy_reproduction(criterion):
    r = perf.total_report(perf.load_power_profile(), perf.measured_durations(paper_replay=True))
    ok = (
        r.total_time_ms == 164.5
        and 7.6 <= r.total_energy_mj <= 7.8
        and 35.5 <= r.avg_active_power_mw <= 35.8
        and round(r.total_idle_power_mw, 9) == 17.7
    )
    criterion(
        "1 energy reproduction",
        ok,
        f"time={r.total_time_ms} ms energy={r.total_energy_mj:.4f} mJ "
        f"avg_active={r.avg_active_power_mw:.3f} mW idle={r.total_idle_power_mw:.4f} mW",
    )


def test_2_stage_energies(criterion):
    r = perf.total_report(perf.REFERENCE_PROFILE, perf.MEASURED_DURATIONS_MS)
    got = [r.stage(s).active_energy_mj for s in perf.STAGES]
    want = [(0.006, 0.001), (4.6, 0.2), (1.4, 0.05)]
    ok = all(abs(g - w) <= tol + 1e-12 for g, (w, tol) in zip(got, want))
    criterion("2 per-stage energies", ok, " ".join(f"{g:.4f}" for g in got) + " mJ (active)")


def test_3_shape_reproduction(criterion):
    net = parse_network(REF_NET.read_text(encoding="utf-8"))
    sizes = [format_size(l.size) for l in net.layers]
    expected = ["128x128x2", "32x32x2", "32x32x16", "16x16x16", "16x16x32", "8x8x32", "512", "11"]
    criterion("3 shape reproduction", sizes == expected, " ".join(sizes))


def test_4_tiled_equivalence(criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    failures = 0
    for _ in range(200):
        net = random_net(rng, max_layers=4, max_neurons=64)
        x = random_input(rng, net, int(rng.integers(1, 21)))
        largest = max(l.neurons for l in net.layers[1:])
        cap = int(rng.integers(1, largest + 1))
        tiled, ref = run_tiled(net, x, cap), run_network(net, x)
        same = all(np.array_equal(a.spikes, b.spikes) for a, b in zip(tiled.outputs, ref.outputs))
        failures += not same or tiled.prediction != ref.prediction
    net = random_weights(reference_network(), np.random.default_rng(0))
    window = events.window_stream(synthetic.blob_events(rng=np.random.default_rng(0)))[0]
    x = events.bin_events(window)
    tiled, ref = run_tiled(net, x, 2048), run_network(net, x)
    full_ok = all(np.array_equal(a.spikes, b.spikes) for a, b in zip(tiled.outputs, ref.outputs))
    full_ok = full_ok and np.array_equal(tiled.outputs[-1].spikes.sum(0), ref.class_counts)
    elapsed = time.perf_counter() - start
    criterion(
        "4 tiled/untiled equivalence",
        failures == 0 and full_ok and elapsed < 120,
        f"random mismatches={failures}/200 reference_net={'equal' if full_ok else 'DIFFERENT'} "
        f"({x.shape[0]} steps, {len(tiled.schedule)} slots) {elapsed:.1f}s",
    )


def test_5_oracle_equivalence(criterion):
    rng = np.random.default_rng(5)
    failures = 0
    for _ in range(100):
        net = random_net(rng, max_layers=4, max_neurons=64)
        x = random_input(rng, net, int(rng.integers(1, 21)))
        got = run_network(net, x)
        want = brute_force(net, x)
        failures += any(o.spikes.reshape(len(x), -1).tolist() != w for o, w in zip(got.outputs, want))
    criterion("5 engine oracle equivalence", failures == 0, f"mismatches={failures}/100")


def _n_params(net):
    return sum(w.values.size for w in net.weights if w is not None)


def test_6_gradient_checks(criterion):
    rng = np.random.default_rng(6)
    worst, checked, nets = 0.0, 0, 0
    toy = parse_network(
        "layer 0 input size=8x8x2\n"
        "layer 1 conv size=4x4x4 kernel=3x3 features=4 stride=2 padding=1 lambda=0.8\n"
        "layer 2 full size=2\n"
    )
    x = (rng.random((5, 8, 8, 2)) < 0.3).astype(np.uint8)
    w, n = finite_difference_check(toy, x, 1, params=init_params(toy, rng, 2.0))
    worst, checked, nets = max(worst, w), checked + n, nets + 1
    while nets < 8:
        net = random_net(rng, max_layers=3, max_neurons=32)
        if _n_params(net) > 1000 or _n_params(net) == 0:
            continue
        x = random_input(rng, net, int(rng.integers(2, 11)))
        w, n = finite_difference_check(net, x, int(rng.integers(net.num_classes)))
        worst, checked, nets = max(worst, w), checked + n, nets + 1
    consistent = 0
    for _ in range(50):
        net = random_net(rng)
        x = random_input(rng, net, 10)
        acts, _ = forward_differentiable(net, x)
        consistent += all(np.array_equal(a, o.spikes) for a, o in zip(acts, run_network(net, x).outputs))
    criterion(
        "6 gradient checks",
        worst < 1e-4 and consistent == 50,
        f"max rel err={worst:.2e} over {checked} params in {nets} nets; forward consistent {consistent}/50",
    )


def test_7_desk_scale_learning(criterion):
    net = parse_network(
        "layer 0 input size=8x8x2\nlayer 1 pool size=4x4x2 kernel=2x2\nlayer 2 full size=2\n"
    )
    data = synthetic.pattern_dataset(20, 10, (8, 8, 2), np.random.default_rng(0))
    config = TrainConfig(epochs=50, seed=0)
    a, b = train(net, data, config), train(net, data, config)
    best = max(m.accuracy for m in a.metrics)
    first = next((m.epoch for m in a.metrics if m.accuracy >= 0.9), None)
    deterministic = dump_weights(a.net) == dump_weights(b.net) and a.metrics == b.metrics
    criterion(
        "7 desk-scale learning",
        a.metrics[-1].accuracy >= 0.9 and deterministic,
        f"final acc={a.metrics[-1].accuracy:.3f} best={best:.3f} first>=0.9 at epoch {first} "
        f"deterministic={deterministic}",
    )


def test_8_actuation_latency(criterion):
    r = perf.total_report(perf.REFERENCE_PROFILE, perf.MEASURED_DURATIONS_MS, perf.ActuationSpec(50_000_000, 10))
    ok = abs(r.actuation_latency_us - 0.2) < 1e-12 and r.actuation_below_1us
    flag = r.to_dict()["actuation_below_1us"]
    criterion("8 actuation latency", ok and flag is True, f"{r.actuation_latency_us} us below_1us={flag}")


def _round_trips(rng):
    for _ in range(50):
        n = int(rng.integers(0, 40))
        ev = np.zeros(n, events.EVENT_DTYPE)
        ev["t"] = rng.integers(0, 2**32, n)
        ev["x"], ev["y"] = rng.integers(0, 128, (2, n))
        ev["p"] = rng.integers(0, 2, n)
        for fmt in ("text", "binary"):
            data = events.serialize_events(ev, fmt)
            if not np.array_equal(events.parse_events(data, fmt), ev):
                return f"events {fmt}"
    net = random_weights(reference_network(), rng)
    if parse_network(emit_network(net)) != reference_network():
        return "network config"
    if load_weights(reference_network(), dump_weights(net)) != net:
        return "weight file"
    r = perf.total_report(perf.REFERENCE_PROFILE, perf.MEASURED_DURATIONS_MS, predicted_class=1)
    if perf.PipelineReport.from_dict(r.to_dict()) != r:
        return "report"
    return None


def _fuzz(rng):
    alphabet = np.frombuffer(b"layer 0123456789inputpoolconvfull size=kernel=x,#\n\xff-.", np.uint8)
    for _ in range(500):
        raw = bytes(rng.integers(0, 256, int(rng.integers(0, 40)), dtype=np.uint8))
        mixed = bytes(rng.choice(alphabet, int(rng.integers(0, 60))))
        for data in (raw, mixed):
            for fmt in ("text", "binary"):
                try:
                    events.parse_events(data, fmt)
                except SimulationError:
                    pass
            try:
                parse_network(data.decode("utf-8", errors="replace"))
            except SimulationError:
                pass


def _cli_errors(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("1,2\n")
    cases = [
        ["run", "--network", str(REF_NET), "--events", str(tmp_path / "missing.bin")],
        ["run", "--network", str(REF_NET), "--events", str(bad)],
        ["run", "--network", str(tmp_path / "none.net"), "--events", str(bad)],
        ["plan-tiles", "--network", str(REF_NET), "--capacity", "0"],
        ["energy", "--cycles", "0"],
    ]
    for argv in cases:
        code = main(argv)
        out, err = capsys.readouterr()
        if code != 1 or out or err.count("\n") != 1:
            return " ".join(argv[:1])
    return None


def test_9_formats_and_cli_errors(criterion, tmp_path, capsys):
    rng = np.random.default_rng(9)
    broken = _round_trips(rng)
    crash = None
    try:
        _fuzz(rng)
    except Exception as exc:  # any non-diagnosed exception is a crash
        crash = repr(exc)
    cli = _cli_errors(tmp_path, capsys)
    criterion(
        "9 round-trips, fuzzing and CLI errors",
        broken is None and crash is None and cli is None,
        f"round-trip failure={broken} parser crash={crash} cli failure={cli}",
    )
