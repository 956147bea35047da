"""Discrete-time leaky integrate-and-fire inference.

Per layer and timestep::

    V[t] = lam * V[t-1] + I[t]          (V[t-1] already reset where it fired)
    s[t] = V[t] >= theta
    V[t] = 0 where s[t]

Layers are evaluated one after another over the whole window; the network is
feed-forward, so this equals stepping every layer in lockstep.

Synaptic input is accumulated in a fixed order, ascending over
``(ky, kx, in_channel)`` for conv layers and over the input index for full
layers. Any partition of the output neurons (see :mod:`evsnn.tiler`)
therefore reproduces the untiled sums bit for bit.

Potentials are float64 by default. Passing ``frac_bits`` switches to
fixed-point: weights, threshold and leak are rounded to ``2**-frac_bits``
and potentials are int64, with the leak product floored.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatch, ShapeMismatch
from .network import LayerSpec, NetworkSpec


@dataclass
class LifState:
    potentials: np.ndarray
    theta: float
    lam: float
    frac_bits: int | None = None

    @classmethod
    def zeros(cls, n, theta, lam, frac_bits=None):
        dtype = np.float64 if frac_bits is None else np.int64
        return cls(np.zeros(n, dtype=dtype), theta, lam, frac_bits)


def to_fixed(x, frac_bits: int):
    return np.rint(np.asarray(x, dtype=np.float64) * (1 << frac_bits)).astype(np.int64)


def lif_step(state: LifState, current: np.ndarray) -> tuple[LifState, np.ndarray]:
    """Advance a population one timestep; returns the new state and spikes."""
    v = state.potentials
    current = np.asarray(current)
    if current.shape != v.shape:
        raise DimensionMismatch(f"input current shape {current.shape} != potentials {v.shape}")
    if state.frac_bits is None:
        v = state.lam * v + current
        fired = v >= state.theta
    else:
        f = state.frac_bits
        lam_q = int(to_fixed(state.lam, f))
        v = ((lam_q * v) >> f) + current
        fired = v >= int(to_fixed(state.theta, f))
    v = np.where(fired, v.dtype.type(0), v)
    return LifState(v, state.theta, state.lam, state.frac_bits), fired.astype(np.uint8)


def integrate(currents: np.ndarray, state: LifState) -> tuple[np.ndarray, LifState]:
    """Run :func:`lif_step` over a ``(T, n)`` current array."""
    spikes = np.zeros(currents.shape, dtype=np.uint8)
    for t in range(currents.shape[0]):
        state, spikes[t] = lif_step(state, currents[t])
    return spikes, state


def _taps(start, stride, count):
    return slice(start, start + stride * (count - 1) + 1, stride)


def spatial_currents(layer, weights, x, row_padding=None, frac_bits=None):
    """Synaptic input of a conv or pool layer, shape ``(T, Ho, Wo, C)``.

    ``row_padding=(top, bottom)`` overrides the layer's symmetric padding on
    the row axis; this is how a row-band slice of the input is evaluated.
    """
    T, H, W, C = x.shape
    kh, kw = layer.kernel
    s = layer.stride
    pad = layer.padding if layer.kind == "conv" else 0
    top, bottom = (pad, pad) if row_padding is None else row_padding
    ho = (top + H + bottom - kh) // s + 1
    wo = (W + 2 * pad - kw) // s + 1
    xp = np.pad(x, ((0, 0), (top, bottom), (pad, pad), (0, 0)))
    acc_dtype = np.float64 if frac_bits is None else np.int64
    if layer.kind == "pool":
        xp = xp.astype(acc_dtype) * (1 if frac_bits is None else 1 << frac_bits)
        acc = np.zeros((T, ho, wo, C), dtype=acc_dtype)
        for ky in range(kh):
            for kx in range(kw):
                acc += xp[:, _taps(ky, s, ho), _taps(kx, s, wo), :]
        return acc
    w = weights if frac_bits is None else to_fixed(weights, frac_bits)
    acc = np.zeros((T, ho, wo, w.shape[3]), dtype=acc_dtype)
    for ky in range(kh):
        for kx in range(kw):
            patch = xp[:, _taps(ky, s, ho), _taps(kx, s, wo), :]
            for ci in range(C):
                column = patch[..., ci]
                if not column.any():
                    continue
                acc += column[..., None] * w[ky, kx, ci]
    return acc


def dense_currents(weights, x, neurons=None, frac_bits=None):
    """Synaptic input of a full layer, shape ``(T, n_out)``."""
    T = x.shape[0]
    flat = x.reshape(T, -1)
    w = weights if neurons is None else weights[:, neurons]
    if frac_bits is not None:
        w = to_fixed(w, frac_bits)
    acc = np.zeros((T, w.shape[1]), dtype=np.float64 if frac_bits is None else np.int64)
    for k in np.flatnonzero(flat.any(axis=0)):
        acc += flat[:, k, None] * w[k]
    return acc


@dataclass
class LayerOutput:
    spikes: np.ndarray
    state: LifState | None = None

    @property
    def spike_count(self) -> int:
        return int(self.spikes.sum())


def run_layer(
    layer: LayerSpec,
    weights: np.ndarray | None,
    x: np.ndarray,
    state: LifState | None = None,
    *,
    row_padding: tuple[int, int] | None = None,
    neurons: slice | None = None,
    frac_bits: int | None = None,
) -> LayerOutput:
    """Evaluate one layer over all timesteps of ``x``.

    ``neurons`` restricts evaluation to a contiguous range of the layer's
    flattened output; the returned spikes are then ``(T, len(range))``. For
    conv/pool layers ``x`` may be a row band of the full input, in which case
    ``row_padding`` gives its effective top/bottom padding.
    """
    if layer.kind == "input":
        return LayerOutput(np.asarray(x, dtype=np.uint8))
    T = x.shape[0]
    if layer.kind in ("conv", "pool"):
        if x.ndim != 4 or (layer.kind == "conv" and x.shape[3] != weights.shape[2]):
            raise ShapeMismatch(f"{layer.kind} layer {layer.index} got input of shape {x.shape[1:]}")
        currents = spatial_currents(layer, weights, x, row_padding, frac_bits).reshape(T, -1)
        if neurons is not None:
            currents = currents[:, neurons]
        elif currents.shape[1] != layer.neurons:
            raise ShapeMismatch(f"layer {layer.index} input does not produce {layer.size}")
    else:
        if weights.shape[0] != int(np.prod(x.shape[1:])):
            raise ShapeMismatch(
                f"full layer {layer.index} expects {weights.shape[0]} inputs, got {x.shape[1:]}"
            )
        currents = dense_currents(weights, x, neurons, frac_bits)
    if state is None:
        state = LifState.zeros(currents.shape[1], layer.theta, layer.lam, frac_bits)
    spikes, state = integrate(currents, state)
    if neurons is None:
        spikes = spikes.reshape((T,) + tuple(layer.size))
    return LayerOutput(spikes, state)


class NetworkRun(NamedTuple):
    outputs: list
    prediction: int

    @property
    def class_counts(self) -> np.ndarray:
        last = self.outputs[-1].spikes
        return last.reshape(last.shape[0], -1).sum(axis=0)


def check_input(net: NetworkSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim < 2 or tuple(x.shape[1:]) != tuple(net.input_shape):
        raise ShapeMismatch(f"input shape {x.shape[1:]} != network input {net.input_shape}")
    if x.size and not np.isin(x, (0, 1)).all():
        raise ShapeMismatch("input spikes must be binary")
    return x.astype(np.uint8)


def readout(last: np.ndarray) -> int:
    """Spike-count argmax over the window; ties go to the lowest class."""
    counts = last.reshape(last.shape[0], -1).sum(axis=0)
    return int(np.argmax(counts))


def run_network(net: NetworkSpec, x: np.ndarray, *, frac_bits: int | None = None) -> NetworkRun:
    x = check_input(net, x)
    outputs = [LayerOutput(x)]
    for i in range(1, len(net)):
        outputs.append(
            run_layer(net.layers[i], net.real_weights(i), outputs[-1].spikes, frac_bits=frac_bits)
        )
    return NetworkRun(outputs, readout(outputs[-1].spikes))


def trace_lines(outputs, step_offset: int = 0):
    """Yield ``step,layer,neuron_index`` for every spike, in step-major order."""
    flat = [o.spikes.reshape(o.spikes.shape[0], -1) for o in outputs]
    if not flat:
        return
    for t in range(flat[0].shape[0]):
        for li, s in enumerate(flat):
            for n in np.flatnonzero(s[t]):
                yield f"{t + step_offset},{li},{n}"
