"""Command-line front end.

Subcommands::

    evsnn run --network NET --events EVENTS [--paper-replay] [--trace-dump PATH]
    evsnn plan-tiles --network NET [--capacity N]
    evsnn train --network NET (--data NPZ | --synthetic N) --out WEIGHTS
    evsnn energy [--power-profile INI] [--acquisition-ms ...]

Reports go to stdout. Failures print one ``error: ...`` line on stderr and
exit with status 1; nothing is written to stdout in that case.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import engine, events, perf, tiler, trainer
from .errors import SimulationError
from .network import dump_weights, emit_network, load_network


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(1, f"error: {self.prog}: {message}\n")


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text!r}")
    return v


def _nonneg_float(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text!r}")
    return v


def _read_network(path):
    if not Path(path).is_file():
        raise CliError(f"network config not found: {path}")
    return load_network(path)


def _read_profile(path):
    if path is not None and not Path(path).is_file():
        raise CliError(f"power profile not found: {path}")
    return perf.load_power_profile(path)


def _actuation(args):
    return perf.ActuationSpec(args.clock_hz, args.cycles)


def cmd_run(args) -> list[str]:
    net = _read_network(args.network)
    if not Path(args.events).is_file():
        raise CliError(f"events file not found: {args.events}")
    profile = _read_profile(args.power_profile)
    h, w, c = net.input_shape if len(net.input_shape) == 3 else (0, 0, 0)
    if c != 2:
        raise CliError(f"network input {net.input_shape} is not a two-polarity frame")
    stream = events.read_events(args.events, args.events_format, width=w, height=h)
    windows = events.window_stream(stream, args.window_ms, args.stride_ms)

    out, trace = [], []
    totals = tiler.RunStats()
    steps_seen = 0
    prediction = None
    spike_total = 0
    for k, win in enumerate(windows):
        x = events.bin_events(win, args.timestep_us, (h, w, c))
        run = tiler.run_tiled(net, x, args.capacity, input_events=len(win),
                              frac_bits=args.fixed_point)
        prediction = run.prediction
        spikes = sum(o.spike_count for o in run.outputs)
        spike_total += spikes
        for name in ("input_events", "stream_spikes", "inference_spikes", "slots"):
            setattr(totals, name, getattr(totals, name) + getattr(run.stats, name))
        counts = " ".join(str(int(v)) for v in run.outputs[-1].spikes.reshape(x.shape[0], -1).sum(0))
        out.append(f"window {k}: start_us={win.start_us} events={len(win)} class={prediction} counts=[{counts}]")
        if args.trace_dump:
            trace.extend(engine.trace_lines(run.outputs, steps_seen))
        steps_seen += x.shape[0]

    n = max(len(windows), 1)
    mean = perf.WorkloadStats(
        totals.input_events / n, totals.stream_spikes / n, totals.inference_spikes / n, totals.slots / n
    )
    durations = perf.measured_durations(mean, paper_replay=args.paper_replay)
    report = perf.total_report(
        profile,
        durations,
        _actuation(args),
        predicted_class=prediction,
        extra={
            "mode": "paper-replay" if args.paper_replay else "cost-model",
            "windows": len(windows),
            "total_spike_count": spike_total,
            "capacity": args.capacity,
        },
    )
    if args.trace_dump:
        Path(args.trace_dump).write_text("".join(line + "\n" for line in trace), encoding="utf-8")
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=1) + "\n", encoding="utf-8")
    out.append(report.to_text().rstrip("\n"))
    return out


def cmd_plan_tiles(args) -> list[str]:
    net = _read_network(args.network)
    plans = tiler.plan_tiles(net, args.capacity)
    text = tiler.plans_to_text(plans) + tiler.build_schedule(net, plans).to_text()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    return text.rstrip("\n").split("\n")


def _load_dataset(args, net):
    if args.synthetic:
        from .synthetic import pattern_dataset

        if len(net.input_shape) != 3:
            raise CliError("synthetic data needs an HxWxC network input")
        return pattern_dataset(
            args.synthetic, args.steps, net.input_shape, np.random.default_rng(args.seed),
            classes=min(net.num_classes, 2),
        )
    if not Path(args.data).is_file():
        raise CliError(f"dataset not found: {args.data}")
    with np.load(args.data) as npz:
        if "inputs" not in npz or "labels" not in npz:
            raise CliError(f"dataset {args.data} needs 'inputs' and 'labels' arrays")
        return trainer.SpikeDataset(npz["inputs"], npz["labels"])


def cmd_train(args) -> list[str]:
    net = _read_network(args.network)
    dataset = _load_dataset(args, net)
    config = trainer.TrainConfig(
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        momentum=args.momentum,
        seed=args.seed,
        bits=args.bits,
    )
    result = trainer.train(net, dataset, config)
    Path(args.out).write_bytes(dump_weights(result.net))
    if args.config_out:
        rel = Path(args.out).resolve()
        Path(args.config_out).write_text(emit_network(result.net, rel), encoding="utf-8")
    return ["epoch,loss,accuracy"] + [m.to_line() for m in result.metrics]


def cmd_energy(args) -> list[str]:
    profile = _read_profile(args.power_profile)
    durations = {
        perf.Stage.ACQUISITION: args.acquisition_ms,
        perf.Stage.PREPROCESSING: args.preprocessing_ms,
        perf.Stage.INFERENCE: args.inference_ms,
    }
    report = perf.total_report(profile, durations, _actuation(args))
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=1) + "\n", encoding="utf-8")
    return report.to_text().rstrip("\n").split("\n")


def _add_actuation(p):
    p.add_argument("--clock-hz", type=_positive_int, default=perf.DEFAULT_CLOCK_HZ)
    p.add_argument("--cycles", type=_positive_int, default=perf.DEFAULT_ACTUATION_CYCLES,
                   help="system clock cycles to update an actuation output")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="evsnn", description=__doc__.split("\n")[0], allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="classify a recording window by window", allow_abbrev=False)
    p.add_argument("--network", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--events-format", choices=("text", "binary"))
    p.add_argument("--window-ms", type=_positive_int, default=events.DEFAULT_WINDOW_MS)
    p.add_argument("--stride-ms", type=_positive_int)
    p.add_argument("--timestep-us", type=_positive_int, default=events.DEFAULT_TIMESTEP_US)
    p.add_argument("--capacity", type=_positive_int, default=tiler.DEFAULT_CAPACITY)
    p.add_argument("--fixed-point", type=_positive_int, metavar="FRAC_BITS")
    p.add_argument("--power-profile")
    p.add_argument("--paper-replay", action="store_true",
                   help="use the measured stage durations instead of the cost model")
    p.add_argument("--trace-dump", metavar="PATH")
    p.add_argument("--out", metavar="PATH", help="also write the report as JSON")
    _add_actuation(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("plan-tiles", help="print the tile plan and slot schedule", allow_abbrev=False)
    p.add_argument("--network", required=True)
    p.add_argument("--capacity", type=_positive_int, default=tiler.DEFAULT_CAPACITY)
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_plan_tiles)

    p = sub.add_parser("train", help="surrogate-gradient training", allow_abbrev=False)
    p.add_argument("--network", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", metavar="NPZ", help="arrays 'inputs' (N,T,...) and 'labels' (N,)")
    src.add_argument("--synthetic", type=_positive_int, metavar="N_PER_CLASS")
    p.add_argument("--steps", type=_positive_int, default=10, help="timesteps of synthetic samples")
    p.add_argument("--epochs", type=_nonneg_int, default=50)
    p.add_argument("--learning-rate", type=float, default=0.5)
    p.add_argument("--batch-size", type=_positive_int, default=8)
    p.add_argument("--momentum", type=_nonneg_float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bits", type=int, default=8, choices=range(2, 9), metavar="{2..8}")
    p.add_argument("--out", required=True, metavar="WEIGHTS")
    p.add_argument("--config-out", metavar="PATH", help="also write a config referencing WEIGHTS")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("energy", help="energy report from stage durations", allow_abbrev=False)
    p.add_argument("--power-profile")
    p.add_argument("--acquisition-ms", type=_nonneg_float, default=1.5)
    p.add_argument("--preprocessing-ms", type=_nonneg_float, default=131.0)
    p.add_argument("--inference-ms", type=_nonneg_float, default=32.0)
    p.add_argument("--out", metavar="PATH")
    _add_actuation(p)
    p.set_defaults(func=cmd_energy)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        lines = args.func(args)
    except (CliError, SimulationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        where = f" {exc.filename}" if exc.filename else ""
        print(f"error: I/O failure on{where}: {exc.strerror or exc}", file=sys.stderr)
        return 1
    sys.stdout.write("".join(line + "\n" for line in lines))
    return 0


if __name__ == "__main__":
    sys.exit(main())
