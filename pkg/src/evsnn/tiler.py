"""Capacity-constrained, time-multiplexed execution of a network.

A layer whose output exceeds the accelerator's neuron capacity is cut into
contiguous ranges of its flattened ``(h, w, c)`` output, each run as one
execution slot. Between layers the tile outputs are merged into a single
stream, which is then split again into the input streams of the next layer's
tiles: the full stream for full layers, a row band plus halo rows for conv
and pool layers. All slots of layer L run before any slot of layer L+1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import engine
from .errors import CoverageGap, OverlapDetected, PlanMismatch
from .network import NetworkSpec

DEFAULT_CAPACITY = 2048


@dataclass(frozen=True)
class TilePlan:
    layer_index: int
    tiles: tuple  # of range objects over the flattened output
    capacity: int

    @property
    def neurons(self) -> int:
        return self.tiles[-1].stop if self.tiles else 0

    def __len__(self):
        return len(self.tiles)


@dataclass(frozen=True)
class TileStream:
    """Input stream of one tile.

    ``rows`` is the input row range the stream covers (``None`` for a dense
    broadcast) and ``row_padding`` the zero rows implied above and below it.
    """

    tile: range
    spikes: np.ndarray
    rows: range | None = None
    row_padding: tuple | None = None

    @property
    def events(self) -> int:
        return int(self.spikes.sum())


class Slot(NamedTuple):
    layer_index: int
    tile_index: int
    neurons: range
    input_rows: range | None


@dataclass
class TiledSchedule:
    slots: list = field(default_factory=list)

    def __len__(self):
        return len(self.slots)

    def is_layer_synchronous(self) -> bool:
        layers = [s.layer_index for s in self.slots]
        return layers == sorted(layers)

    def to_text(self) -> str:
        lines = []
        for i, s in enumerate(self.slots):
            rows = "all" if s.input_rows is None else f"[{s.input_rows.start}, {s.input_rows.stop})"
            lines.append(
                f"slot {i}: layer {s.layer_index} tile {s.tile_index} "
                f"neurons [{s.neurons.start}, {s.neurons.stop}) input_rows {rows}"
            )
        return "\n".join(lines) + ("\n" if lines else "")


def plan_layer(layer_index: int, neurons: int, capacity: int) -> TilePlan:
    if capacity < 1:
        raise ValueError(f"capacity must be >= 1, got {capacity}")
    tiles = tuple(
        range(start, min(start + capacity, neurons)) for start in range(0, neurons, capacity)
    )
    return TilePlan(layer_index, tiles, capacity)


def plan_tiles(net: NetworkSpec, capacity: int = DEFAULT_CAPACITY) -> list[TilePlan]:
    """One plan per computing layer (the input layer is not planned)."""
    return [plan_layer(i, net.layers[i].neurons, capacity) for i in range(1, len(net))]


def plans_to_text(plans) -> str:
    lines = []
    for p in plans:
        lines.append(f"layer {p.layer_index}: {len(p)} tiles (capacity {p.capacity})")
        lines += [f"  tile {k}: [{r.start}, {r.stop})" for k, r in enumerate(p.tiles)]
    return "\n".join(lines) + "\n"


def _input_rows(layer, tile: range, in_rows: int):
    """Input rows (and implied padding) needed to compute the output rows of ``tile``."""
    h, w, c = layer.size
    per_row = w * c
    r0, r1 = tile.start // per_row, math.ceil(tile.stop / per_row)
    kh = layer.kernel[0]
    s = layer.stride
    pad = layer.padding if layer.kind == "conv" else 0
    a = r0 * s - pad
    b = (r1 - 1) * s + kh - pad
    lo, hi = max(a, 0), min(b, in_rows)
    return range(r0, r1), range(lo, hi), (lo - a, b - hi)


def split_stream(net: NetworkSpec, layer_input: np.ndarray, plan: TilePlan) -> list[TileStream]:
    """Cut the merged input stream of a layer into per-tile input streams."""
    if not 1 <= plan.layer_index < len(net):
        raise PlanMismatch(f"plan targets layer {plan.layer_index}, outside the network")
    layer = net.layers[plan.layer_index]
    if plan.neurons != layer.neurons:
        raise PlanMismatch(
            f"plan covers {plan.neurons} neurons, layer {layer.index} has {layer.neurons}"
        )
    expected = net.layers[plan.layer_index - 1].size
    if tuple(layer_input.shape[1:]) != tuple(expected):
        raise PlanMismatch(f"stream shape {layer_input.shape[1:]} != layer input {expected}")
    if len(plan) == 1:
        return [TileStream(plan.tiles[0], layer_input)]
    if layer.kind == "full":
        return [TileStream(t, layer_input) for t in plan.tiles]
    streams = []
    for t in plan.tiles:
        _, rows, padding = _input_rows(layer, t, layer_input.shape[1])
        streams.append(TileStream(t, layer_input[:, rows.start:rows.stop], rows, padding))
    return streams


def run_tile(net: NetworkSpec, layer_index: int, stream: TileStream, frac_bits=None) -> np.ndarray:
    """Execute one slot; returns ``(T, len(tile))`` spikes."""
    layer = net.layers[layer_index]
    weights = net.real_weights(layer_index)
    t = stream.tile
    if layer.kind == "full":
        out = engine.run_layer(layer, weights, stream.spikes, neurons=slice(t.start, t.stop),
                               frac_bits=frac_bits)
        return out.spikes
    if stream.rows is None:
        out = engine.run_layer(layer, weights, stream.spikes, frac_bits=frac_bits)
        return out.spikes.reshape(out.spikes.shape[0], -1)[:, t.start:t.stop]
    h, w, c = layer.size
    offset = (t.start // (w * c)) * w * c
    out = engine.run_layer(
        layer,
        weights,
        stream.spikes,
        row_padding=stream.row_padding,
        neurons=slice(t.start - offset, t.stop - offset),
        frac_bits=frac_bits,
    )
    return out.spikes


def build_schedule(net: NetworkSpec, plans) -> TiledSchedule:
    """Slot order implied by ``plans`` without executing anything."""
    schedule = TiledSchedule()
    for plan in plans:
        layer = net.layers[plan.layer_index]
        in_rows = net.layers[plan.layer_index - 1].size[0]
        for k, t in enumerate(plan.tiles):
            rows = None
            if len(plan) > 1 and layer.kind != "full":
                rows = _input_rows(layer, t, in_rows)[1]
            schedule.slots.append(Slot(plan.layer_index, k, t, rows))
    return schedule


def merge_streams(tile_outputs, plan: TilePlan, shape=None) -> np.ndarray:
    """Assemble per-tile outputs into one layer stream.

    ``tile_outputs`` is an iterable of ``(neuron_range, spikes)`` pairs in any
    order. The result is ``(T, n)``, or ``(T,) + shape`` when ``shape`` is given.
    """
    items = sorted(((r.start, r.stop, r, s) for r, s in tile_outputs), key=lambda i: i[:2])
    if not items:
        raise CoverageGap(f"no tile outputs for layer {plan.layer_index}")
    n = plan.neurons
    T = items[0][3].shape[0]
    out = np.zeros((T, n), dtype=np.uint8)
    pos = 0
    for start, stop, r, spikes in items:
        if start < pos:
            raise OverlapDetected(f"tile [{start}, {stop}) overlaps neurons below {pos}")
        if start > pos:
            raise CoverageGap(f"neurons [{pos}, {start}) of layer {plan.layer_index} not covered")
        if spikes.shape != (T, stop - start):
            raise PlanMismatch(f"tile [{start}, {stop}) output has shape {spikes.shape}")
        out[:, start:stop] = spikes
        pos = stop
    if pos != n:
        raise CoverageGap(f"neurons [{pos}, {n}) of layer {plan.layer_index} not covered")
    return out if shape is None else out.reshape((T,) + tuple(shape))


@dataclass
class RunStats:
    """Work counters consumed by the performance model."""

    input_events: int = 0
    stream_spikes: int = 0  # spikes moved through split/merge on the cluster
    inference_spikes: int = 0  # spikes emitted by the accelerator
    slots: int = 0


class TiledRun(NamedTuple):
    outputs: list
    prediction: int
    schedule: TiledSchedule
    stats: RunStats


def run_tiled(
    net: NetworkSpec,
    x: np.ndarray,
    capacity: int = DEFAULT_CAPACITY,
    *,
    frac_bits: int | None = None,
    input_events: int | None = None,
) -> TiledRun:
    """Layer-synchronous tiled execution; bit-identical to :func:`engine.run_network`.

    ``input_events`` records the raw event count of the window for the
    performance model; it defaults to the number of input spikes.
    """
    x = engine.check_input(net, x)
    plans = plan_tiles(net, capacity)
    schedule = TiledSchedule()
    stats = RunStats(input_events=int(x.sum()) if input_events is None else input_events)
    outputs = [engine.LayerOutput(x)]
    for plan in plans:
        layer = net.layers[plan.layer_index]
        streams = split_stream(net, outputs[-1].spikes, plan)
        results = []
        for k, stream in enumerate(streams):
            schedule.slots.append(Slot(plan.layer_index, k, stream.tile, stream.rows))
            spikes = run_tile(net, plan.layer_index, stream, frac_bits)
            results.append((stream.tile, spikes))
            stats.stream_spikes += stream.events
            stats.inference_spikes += int(spikes.sum())
        merged = merge_streams(results, plan, layer.size)
        stats.stream_spikes += int(merged.sum())
        outputs.append(engine.LayerOutput(merged))
    stats.slots = len(schedule)
    return TiledRun(outputs, engine.readout(outputs[-1].spikes), schedule, stats)
