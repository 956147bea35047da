"""
Training on DVS128 Gesture recordings (manual, not run in CI)
=============================================================

This script shows how to attempt the full gesture task. It needs the
dataset converted to one event file per sample plus a labels CSV
("file,label" rows) and takes hours of CPU time at full resolution.

    python demos/06_dvs128_harness.py DATA_DIR labels.csv --epochs 30

Every sample is cut to its first 300 ms window and binned at 1 ms. Expect
low accuracy from this plain numpy trainer without augmentation or tuning.
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from evsnn import events, network, trainer

p = argparse.ArgumentParser()
p.add_argument("data_dir", type=Path)
p.add_argument("labels", type=Path)
p.add_argument("--epochs", type=int, default=30)
p.add_argument("--timestep-us", type=int, default=1000)
p.add_argument("--limit", type=int, help="use only the first N samples")
p.add_argument("--out", default="dvs128.bin")
args = p.parse_args()

with open(args.labels, newline="") as fh:
    rows = [(r[0], int(r[1])) for r in csv.reader(fh) if r and not r[0].startswith("#")]
rows = rows[: args.limit]

inputs, labels = [], []
for name, label in rows:
    ev = events.read_events(args.data_dir / name)
    win = events.window_stream(ev)[0]
    inputs.append(events.bin_events(win, args.timestep_us))
    labels.append(label)
T = min(x.shape[0] for x in inputs)
data = trainer.SpikeDataset(np.stack([x[:T] for x in inputs]), np.array(labels))
print("samples:", data.inputs.shape)

net = network.reference_network()
result = trainer.train(net, data, trainer.TrainConfig(epochs=args.epochs), log=lambda m: print(m.to_line()))
Path(args.out).write_bytes(network.dump_weights(result.net))
print("weights written to", args.out)
