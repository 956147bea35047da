"""Surrogate-gradient training of the engine's LIF dynamics.

The forward pass repeats the engine's update exactly (same current
accumulation, same leak/integrate/fire/reset order) while caching the
pre-reset potentials ``U[t]``::

    U[t] = lam * V[t-1] + I[t]
    s[t] = H(U[t] - theta)
    V[t] = U[t] * (1 - s[t])

Backpropagation through time replaces ``H'`` by a rectangular surrogate of
width ``a`` centred on the threshold, and differentiates through both the
leak and the reset gate::

    dL/dU[t] = dL/ds[t] * h(U[t]) + dL/dV[t] * ((1 - s[t]) - U[t] * h(U[t]))
    dL/dV[t-1] = lam * dL/dU[t]

With ``relaxed=True`` the forward pass itself uses the surrogate's primitive
(a clipped ramp) instead of ``H``; the backward pass is then the exact
gradient of that relaxed forward, which is what finite differences check.

The loss is the mean squared error between output spike rates over the
window and a one-hot target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import engine
from .errors import CacheMissing, ClassOutOfRange, EmptyDataset, FixedPointUnsupported
from .network import NetworkSpec, quantize


@dataclass(frozen=True)
class SurrogateSpec:
    width: float = 1.0
    kind: str = "rectangular"

    def __post_init__(self):
        if self.kind != "rectangular":
            raise ValueError(f"unsupported surrogate {self.kind!r}")
        if not self.width > 0:
            raise ValueError("surrogate width must be positive")

    def derivative(self, u, theta):
        return (np.abs(u - theta) < self.width / 2) / self.width

    def relaxed(self, u, theta):
        return np.clip((u - theta) / self.width + 0.5, 0.0, 1.0)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    learning_rate: float = 0.5
    batch_size: int = 8
    momentum: float = 0.0
    seed: int = 0
    init_gain: float = 2.0
    bits: int = 8
    surrogate: SurrogateSpec = field(default_factory=SurrogateSpec)

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or not self.learning_rate > 0:
            raise ValueError("epochs must be >= 0, batch size >= 1, learning rate > 0")


class SpikeDataset(NamedTuple):
    inputs: np.ndarray  # (N, T, *input_shape), binary
    labels: np.ndarray  # (N,)

    def __len__(self):
        return len(self.labels)


@dataclass
class Caches:
    net: NetworkSpec
    params: list
    surrogate: SurrogateSpec
    relaxed: bool
    inputs: list = field(default_factory=list)  # per layer i: input to layer i
    potentials: list = field(default_factory=list)  # per layer i: U, (T, n)
    spikes: list = field(default_factory=list)  # per layer i: s, (T, n)

    @property
    def complete(self) -> bool:
        n = len(self.net)
        return len(self.inputs) == len(self.potentials) == len(self.spikes) == n


def real_params(net: NetworkSpec) -> list:
    return [net.real_weights(i) for i in range(len(net))]


def _layer_currents(layer, w, x):
    T = x.shape[0]
    if layer.kind == "full":
        return engine.dense_currents(w, x)
    return engine.spatial_currents(layer, w, x).reshape(T, -1)


def forward_differentiable(
    net: NetworkSpec,
    x: np.ndarray,
    surrogate: SurrogateSpec = SurrogateSpec(),
    *,
    params: list | None = None,
    relaxed: bool = False,
    frac_bits: int | None = None,
) -> tuple[list, Caches]:
    """Forward pass that records what :func:`backward` needs.

    Returns per-layer activations shaped like the engine's outputs (binary
    uint8 unless ``relaxed``) together with the caches.
    """
    if frac_bits is not None:
        raise FixedPointUnsupported("training runs in real arithmetic only")
    params = real_params(net) if params is None else params
    x = np.asarray(x)
    if relaxed:
        x = x.astype(np.float64)
    else:
        x = engine.check_input(net, x)
    T = x.shape[0]
    caches = Caches(net, params, surrogate, relaxed)
    caches.inputs.append(None)
    caches.potentials.append(None)
    caches.spikes.append(x.reshape(T, -1))
    acts = [x]
    for i in range(1, len(net)):
        layer = net.layers[i]
        xin = acts[-1]
        currents = _layer_currents(layer, params[i], xin)
        U = np.zeros_like(currents)
        S = np.zeros_like(currents)
        v = np.zeros(currents.shape[1])
        for t in range(T):
            U[t] = layer.lam * v + currents[t]
            if relaxed:
                S[t] = surrogate.relaxed(U[t], layer.theta)
            else:
                S[t] = U[t] >= layer.theta
            v = U[t] * (1.0 - S[t])
        caches.inputs.append(xin)
        caches.potentials.append(U)
        caches.spikes.append(S)
        out = S.reshape((T,) + tuple(layer.size))
        acts.append(out if relaxed else out.astype(np.uint8))
    return acts, caches


def output_rates(caches: Caches) -> np.ndarray:
    s = caches.spikes[-1]
    return s.sum(axis=0) / s.shape[0]


def one_hot(label: int, n: int) -> np.ndarray:
    if not 0 <= label < n:
        raise ClassOutOfRange(f"class {label} outside [0, {n})")
    y = np.zeros(n)
    y[label] = 1.0
    return y


def rate_loss(caches: Caches, label: int) -> float:
    r = output_rates(caches)
    y = one_hot(label, r.size)
    return float(np.mean((r - y) ** 2))


def backward_spikes(caches: Caches, grad_out: np.ndarray) -> list:
    """Weight gradients given ``dL/ds`` of the last layer, shape ``(T, n_out)``."""
    if caches is None or not caches.complete:
        raise CacheMissing("backward needs the caches of a completed forward pass")
    net, params, sur = caches.net, caches.params, caches.surrogate
    grads = [None] * len(net)
    g_s = np.asarray(grad_out, dtype=np.float64)
    for i in range(len(net) - 1, 0, -1):
        layer = net.layers[i]
        U, S = caches.potentials[i], caches.spikes[i]
        T = U.shape[0]
        h = sur.derivative(U, layer.theta)
        g_u = np.zeros_like(U)
        g_v = np.zeros(U.shape[1])
        for t in range(T - 1, -1, -1):
            g_u[t] = g_s[t] * h[t] + g_v * ((1.0 - S[t]) - U[t] * h[t])
            g_v = layer.lam * g_u[t]
        xin = caches.inputs[i]
        if layer.kind == "full":
            flat = xin.reshape(T, -1).astype(np.float64)
            grads[i] = flat.T @ g_u
            g_s = g_u @ params[i].T
        else:
            grads[i], g_x = _spatial_backward(layer, params[i], xin, g_u.reshape((T,) + tuple(layer.size)))
            g_s = g_x.reshape(T, -1)
    return grads


def _spatial_backward(layer, w, xin, g_i):
    T, H, W, C = xin.shape
    kh, kw = layer.kernel
    s = layer.stride
    pad = layer.padding if layer.kind == "conv" else 0
    ho, wo = g_i.shape[1:3]
    xp = np.pad(xin.astype(np.float64), ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    g_xp = np.zeros_like(xp)
    g_w = None if w is None else np.zeros_like(w)
    for ky in range(kh):
        for kx in range(kw):
            rows = slice(ky, ky + s * (ho - 1) + 1, s)
            cols = slice(kx, kx + s * (wo - 1) + 1, s)
            if layer.kind == "pool":
                g_xp[:, rows, cols, :] += g_i
            else:
                patch = xp[:, rows, cols, :]
                g_w[ky, kx] = np.tensordot(patch, g_i, axes=([0, 1, 2], [0, 1, 2]))
                g_xp[:, rows, cols, :] += g_i @ w[ky, kx].T
    return g_w, g_xp[:, pad:pad + H, pad:pad + W, :]


def backward(net: NetworkSpec, caches: Caches, target: int) -> list:
    """Gradients of the rate-coded MSE loss w.r.t. every layer's weights."""
    if caches is None or not caches.complete:
        raise CacheMissing("backward needs the caches of a completed forward pass")
    s = caches.spikes[-1]
    T, n = s.shape
    y = one_hot(target, n)
    g_rate = 2.0 * (s.sum(axis=0) / T - y) / n
    return backward_spikes(caches, np.broadcast_to(g_rate / T, (T, n)))


def loss_and_grads(net, params, x, label, surrogate, relaxed=False):
    _, caches = forward_differentiable(net, x, surrogate, params=params, relaxed=relaxed)
    return rate_loss(caches, label), backward(net, caches, label)


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    loss: float
    accuracy: float

    def to_line(self) -> str:
        return f"{self.epoch},{self.loss:.6f},{self.accuracy:.4f}"


@dataclass
class TrainResult:
    net: NetworkSpec  # quantized for deployment
    params: list  # final real-valued weights
    metrics: list


def evaluate(net, params, dataset: SpikeDataset, surrogate=SurrogateSpec()):
    """Mean loss and accuracy of real-valued ``params`` with the hard forward."""
    losses, correct = [], 0
    for x, label in zip(dataset.inputs, dataset.labels):
        _, caches = forward_differentiable(net, x, surrogate, params=params)
        losses.append(rate_loss(caches, int(label)))
        correct += int(engine.readout(caches.spikes[-1]) == label)
    return float(np.mean(losses)), correct / len(dataset)


def _check_dataset(net, dataset):
    if len(dataset) == 0:
        raise EmptyDataset("training needs at least one sample")
    labels = np.asarray(dataset.labels)
    if labels.min() < 0 or labels.max() >= net.num_classes:
        raise ClassOutOfRange(
            f"labels span [{labels.min()}, {labels.max()}], network has {net.num_classes} outputs"
        )


def init_params(net: NetworkSpec, rng: np.random.Generator, gain: float) -> list:
    """Real weights of ``net``, with all-zero layers drawn at random."""
    params = real_params(net)
    for i, w in enumerate(params):
        if w is not None and not w.any():
            fan_in = math.prod(w.shape[:-1])
            params[i] = rng.normal(0.0, gain * net.layers[i].theta / math.sqrt(fan_in), w.shape)
    return params


def train(net: NetworkSpec, dataset: SpikeDataset, config: TrainConfig = TrainConfig(), log=None) -> TrainResult:
    """Minibatch SGD over the dataset; deterministic for a given seed.

    ``log`` (optional callable) receives each :class:`EpochMetrics`.
    """
    _check_dataset(net, dataset)
    if config.epochs == 0:
        return TrainResult(net, real_params(net), [])
    rng = np.random.default_rng(config.seed)
    params = init_params(net, rng, config.init_gain)
    velocity = [None if p is None else np.zeros_like(p) for p in params]
    metrics = []
    n = len(dataset)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            total = [None if p is None else np.zeros_like(p) for p in params]
            for k in batch:
                _, grads = loss_and_grads(
                    net, params, dataset.inputs[k], int(dataset.labels[k]), config.surrogate
                )
                for i, g in enumerate(grads):
                    if g is not None:
                        total[i] += g
            for i, g in enumerate(total):
                if g is None:
                    continue
                velocity[i] = config.momentum * velocity[i] + g / len(batch)
                params[i] = params[i] - config.learning_rate * velocity[i]
        loss, acc = evaluate(net, params, dataset, config.surrogate)
        m = EpochMetrics(epoch, loss, acc)
        metrics.append(m)
        if log is not None:
            log(m)
    deployed = net.with_weights(
        {i: quantize(p, config.bits) for i, p in enumerate(params) if p is not None}
    )
    return TrainResult(deployed, params, metrics)
