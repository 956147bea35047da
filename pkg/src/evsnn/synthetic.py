"""Synthetic inputs: labeled spike patterns and gesture-like event streams."""

from __future__ import annotations

import numpy as np

from .events import EVENT_DTYPE, SENSOR_HEIGHT, SENSOR_WIDTH
from .trainer import SpikeDataset


def pattern_dataset(
    n_per_class: int,
    steps: int,
    shape=(8, 8, 2),
    rng: np.random.Generator | None = None,
    rate: float = 0.3,
    background: float = 0.02,
    classes: int = 2,
) -> SpikeDataset:
    """Classes fire preferentially in disjoint column bands of the frame.

    Class ``c`` has Bernoulli rate ``rate`` in band ``c`` and ``background``
    elsewhere; samples are interleaved by class.
    """
    rng = rng or np.random.default_rng(0)
    h, w, ch = shape
    bands = np.array_split(np.arange(w), classes)
    inputs, labels = [], []
    for _ in range(n_per_class):
        for c in range(classes):
            p = np.full(shape, background)
            p[:, bands[c], :] = rate
            inputs.append((rng.random((steps,) + tuple(shape)) < p).astype(np.uint8))
            labels.append(c)
    return SpikeDataset(np.stack(inputs), np.array(labels))


def blob_events(
    duration_ms: int = 300,
    rate_hz: float = 200_000.0,
    rng: np.random.Generator | None = None,
    width: int = SENSOR_WIDTH,
    height: int = SENSOR_HEIGHT,
    radius: float = 12.0,
    noise: float = 0.05,
    orbit_hz: float = 1.5,
) -> np.ndarray:
    """Events from a blob circling the frame centre, plus uniform noise.

    Events arrive as a Poisson process of ``rate_hz``; a fraction ``noise``
    is scattered uniformly, the rest is drawn around the moving blob. ON
    events lead the blob's motion and OFF events trail it.
    """
    rng = rng or np.random.default_rng(0)
    duration_us = duration_ms * 1000
    n = rng.poisson(rate_hz * duration_ms / 1000.0)
    t = np.sort(rng.integers(0, duration_us, n))
    phase = 2 * np.pi * orbit_hz * t / 1e6
    cx = width / 2 + width / 4 * np.cos(phase)
    cy = height / 2 + height / 4 * np.sin(phase)
    dx, dy = rng.normal(0, radius / 2, (2, n))
    # direction of motion is the phase derivative of (cos, sin)
    ahead = (-np.sin(phase) * dx + np.cos(phase) * dy) > 0
    x = np.clip(np.rint(cx + dx), 0, width - 1)
    y = np.clip(np.rint(cy + dy), 0, height - 1)
    is_noise = rng.random(n) < noise
    x[is_noise] = rng.integers(0, width, is_noise.sum())
    y[is_noise] = rng.integers(0, height, is_noise.sum())
    out = np.zeros(n, dtype=EVENT_DTYPE)
    out["t"], out["x"], out["y"] = t, x, y
    out["p"] = np.where(is_noise, rng.integers(0, 2, n), ahead)
    return out
