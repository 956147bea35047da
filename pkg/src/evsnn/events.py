"""DVS event ingestion: parsing, windowing and dense time binning.

Events are held in numpy structured arrays with dtype :data:`EVENT_DTYPE`
(fields ``t`` in microseconds, ``x``, ``y``, ``p``). :class:`DvsEvent` is the
record-level view used when a single event is handled on its own.

Two on-disk formats are supported:

* text: UTF-8 lines ``t_us,x,y,p`` (decimal, no spaces); lines starting with
  ``#`` are comments.
* binary: little-endian 10-byte records ``u32 t_us, u16 x, u16 y, u8 p,
  u8 reserved`` with no header; ``reserved`` must be zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .errors import (
    CoordinateOutOfRange,
    InvalidWindow,
    MalformedRecord,
    NonMonotonicTimestamp,
    ShapeMismatch,
)

SENSOR_WIDTH = 128
SENSOR_HEIGHT = 128
DEFAULT_WINDOW_MS = 300
DEFAULT_TIMESTEP_US = 1000

EVENT_DTYPE = np.dtype([("t", "<i8"), ("x", "<i4"), ("y", "<i4"), ("p", "u1")])

_BINARY_DTYPE = np.dtype(
    [("t", "<u4"), ("x", "<u2"), ("y", "<u2"), ("p", "u1"), ("reserved", "u1")]
)
RECORD_SIZE = _BINARY_DTYPE.itemsize  # 10


class DvsEvent(NamedTuple):
    t: int
    x: int
    y: int
    polarity: int


@dataclass(frozen=True)
class EventWindow:
    events: np.ndarray
    start_us: int
    end_us: int

    def __len__(self):
        return len(self.events)

    @property
    def length_us(self) -> int:
        return self.end_us - self.start_us


def make_events(records: Iterable) -> np.ndarray:
    """Build an event array from ``(t, x, y, p)`` tuples or :class:`DvsEvent`s."""
    return np.array([tuple(r) for r in records], dtype=EVENT_DTYPE)


def as_records(events: np.ndarray) -> list[DvsEvent]:
    return [DvsEvent(int(e["t"]), int(e["x"]), int(e["y"]), int(e["p"])) for e in events]


def _validate(events, width, height, strict):
    if len(events) == 0:
        return
    bad = (events["x"] >= width) | (events["y"] >= height) | (events["x"] < 0) | (events["y"] < 0)
    if bad.any():
        i = int(np.argmax(bad))
        e = events[i]
        raise CoordinateOutOfRange(
            f"record {i}: ({e['x']}, {e['y']}) outside {width}x{height} sensor"
        )
    if (events["p"] > 1).any():
        i = int(np.argmax(events["p"] > 1))
        raise CoordinateOutOfRange(f"record {i}: polarity {events['p'][i]} not in {{0, 1}}")
    if strict:
        dec = np.diff(events["t"]) < 0
        if dec.any():
            i = int(np.argmax(dec)) + 1
            raise NonMonotonicTimestamp(f"record {i}: timestamp {events['t'][i]} goes backwards")


def _parse_text(data: bytes) -> np.ndarray:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedRecord(f"undecodable bytes at offset {exc.start}") from None
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line or line.startswith("#"):
            continue
        fields = line.split(",")
        if len(fields) != 4:
            raise MalformedRecord(f"line {lineno}: expected 4 fields, got {len(fields)}")
        # ASCII only: str.isdigit() accepts other Unicode digits
        if not all(f.isascii() and f.isdigit() for f in fields):
            raise MalformedRecord(f"line {lineno}: fields must be non-negative decimals")
        rows.append(tuple(int(f) for f in fields))
    if not rows:
        return np.zeros(0, dtype=EVENT_DTYPE)
    ts, xs, ys, ps = zip(*rows)
    if max(ts) > np.iinfo(np.int64).max:
        raise MalformedRecord("timestamp too large")
    if max(xs) > np.iinfo(np.int32).max or max(ys) > np.iinfo(np.int32).max:
        raise CoordinateOutOfRange("coordinate too large")
    if max(ps) > 1:
        i = next(i for i, p in enumerate(ps) if p > 1)
        raise CoordinateOutOfRange(f"record {i}: polarity {ps[i]} not in {{0, 1}}")
    out = np.zeros(len(rows), dtype=EVENT_DTYPE)
    out["t"], out["x"], out["y"], out["p"] = ts, xs, ys, ps
    return out


def _parse_binary(data: bytes) -> np.ndarray:
    if len(data) % RECORD_SIZE:
        raise MalformedRecord(
            f"binary stream length {len(data)} is not a multiple of {RECORD_SIZE}"
        )
    raw = np.frombuffer(data, dtype=_BINARY_DTYPE)
    if (raw["reserved"] != 0).any():
        i = int(np.argmax(raw["reserved"] != 0))
        raise MalformedRecord(f"record {i}: reserved byte is {raw['reserved'][i]}, expected 0")
    out = np.zeros(len(raw), dtype=EVENT_DTYPE)
    for name in ("t", "x", "y", "p"):
        out[name] = raw[name]
    return out


def parse_events(
    data: bytes,
    format: str = "text",
    *,
    width: int = SENSOR_WIDTH,
    height: int = SENSOR_HEIGHT,
    strict: bool = False,
) -> np.ndarray:
    """Parse a raw event stream, preserving file order.

    With ``strict=True`` a timestamp smaller than its predecessor raises
    :class:`NonMonotonicTimestamp`.
    """
    if format == "text":
        events = _parse_text(data)
    elif format == "binary":
        events = _parse_binary(data)
    else:
        raise ValueError(f"unknown event format {format!r}")
    _validate(events, width, height, strict)
    return events


def serialize_events(events: np.ndarray, format: str = "text") -> bytes:
    if format == "text":
        return "".join(
            f"{int(e['t'])},{int(e['x'])},{int(e['y'])},{int(e['p'])}\n" for e in events
        ).encode("utf-8")
    if format == "binary":
        if len(events) and (
            events["t"].min() < 0
            or events["t"].max() > np.iinfo(np.uint32).max
            or events["x"].max() > 0xFFFF
            or events["y"].max() > 0xFFFF
        ):
            raise ValueError("event fields do not fit the binary record layout")
        raw = np.zeros(len(events), dtype=_BINARY_DTYPE)
        for name in ("t", "x", "y", "p"):
            raw[name] = events[name]
        return raw.tobytes()
    raise ValueError(f"unknown event format {format!r}")


def format_for_path(path) -> str:
    return "binary" if Path(path).suffix.lower() in (".bin", ".evt", ".dat") else "text"


def read_events(path, format: str | None = None, **kwargs) -> np.ndarray:
    path = Path(path)
    return parse_events(path.read_bytes(), format or format_for_path(path), **kwargs)


def write_events(path, events: np.ndarray, format: str | None = None) -> None:
    path = Path(path)
    path.write_bytes(serialize_events(events, format or format_for_path(path)))


def window_stream(
    events: np.ndarray, window_ms: int = DEFAULT_WINDOW_MS, stride_ms: int | None = None
) -> list[EventWindow]:
    """Cut a time-sorted stream into fixed-length windows.

    Windows start at the first timestamp and advance by ``stride_ms`` until
    the last timestamp is covered. Overlapping windows (stride < window) and
    gaps (stride > window) are both allowed. An empty stream yields no windows.
    """
    if stride_ms is None:
        stride_ms = window_ms
    if window_ms <= 0 or stride_ms <= 0:
        raise InvalidWindow(f"window ({window_ms} ms) and stride ({stride_ms} ms) must be positive")
    if len(events) == 0:
        return []
    t = events["t"]
    if (np.diff(t) < 0).any():
        raise NonMonotonicTimestamp("window_stream requires events sorted by timestamp")
    length, stride = window_ms * 1000, stride_ms * 1000
    t0, t_last = int(t[0]), int(t[-1])
    windows = []
    start = t0
    while start <= t_last:
        end = start + length
        lo, hi = np.searchsorted(t, [start, end], side="left")
        windows.append(EventWindow(events[lo:hi], start, end))
        start += stride
    return windows


def bin_events(
    window: EventWindow,
    timestep_us: int = DEFAULT_TIMESTEP_US,
    shape: tuple[int, int, int] = (SENSOR_HEIGHT, SENSOR_WIDTH, 2),
) -> np.ndarray:
    """Rasterize a window into a binary ``(steps, h, w, 2)`` uint8 tensor.

    Channel ``c`` carries polarity ``c``. Several events landing in the same
    (step, pixel, polarity) cell produce a single spike. A trailing partial
    timestep becomes a (shorter) final step.
    """
    if timestep_us <= 0:
        raise InvalidWindow(f"timestep must be positive, got {timestep_us}")
    h, w, c = shape
    if c != 2:
        raise ShapeMismatch(f"DVS input needs 2 polarity channels, got {c}")
    steps = math.ceil(window.length_us / timestep_us)
    out = np.zeros((steps, h, w, c), dtype=np.uint8)
    ev = window.events
    if len(ev) == 0:
        return out
    if (ev["x"] >= w).any() or (ev["y"] >= h).any() or (ev["x"] < 0).any() or (ev["y"] < 0).any():
        raise ShapeMismatch(f"event coordinates fall outside a {h}x{w} frame")
    rel = ev["t"] - window.start_us
    if (rel < 0).any() or (rel >= window.length_us).any():
        raise ShapeMismatch("event timestamps fall outside the window bounds")
    out[rel // timestep_us, ev["y"], ev["x"], ev["p"]] = 1
    return out
