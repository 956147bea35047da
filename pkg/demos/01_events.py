"""
Event streams, windows and spike tensors
========================================

A DVS camera reports (t, x, y, polarity) tuples instead of frames. Here we
make a synthetic recording, write it in both file formats, cut it into
300 ms windows and bin one window into a (T, H, W, 2) spike tensor.
"""

import tempfile
from pathlib import Path

import numpy as np

from evsnn import events, synthetic

rng = np.random.default_rng(0)
ev = synthetic.blob_events(duration_ms=900, rng=rng)
print(len(ev), "events, dtype", ev.dtype)
print("first records:", events.as_records(ev[:3]))

# text is one "t,x,y,p" line per event; binary is 10 bytes per event
tmp = Path(tempfile.mkdtemp())
events.write_events(tmp / "rec.txt", ev)
events.write_events(tmp / "rec.bin", ev)
for name in ("rec.txt", "rec.bin"):
    size = (tmp / name).stat().st_size
    back = events.read_events(tmp / name)
    print(f"{name}: {size} bytes, round trip equal: {np.array_equal(back, ev)}")

# non-overlapping 300 ms windows, starting at the first event
windows = events.window_stream(ev, window_ms=300)
for w in windows:
    print(f"window [{w.start_us}, {w.end_us}) us: {len(w)} events")

# 1 ms timesteps; repeated events in the same step and pixel clamp to 1
x = events.bin_events(windows[0], timestep_us=1000)
print("spike tensor", x.shape, x.dtype, "spikes:", int(x.sum()))
print("ON/OFF split:", x[..., 1].sum(), x[..., 0].sum())

# the blob circles the centre: mean spike position per 100 ms
for k in range(3):
    ys, xs = np.nonzero(x[100 * k:100 * (k + 1)].any(axis=(0, 3)))
    print(f"  {100 * k}-{100 * (k + 1)} ms  centre ~ ({xs.mean():.0f}, {ys.mean():.0f})")
