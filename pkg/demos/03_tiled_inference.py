"""
Tiled execution under a neuron-capacity limit
=============================================

The accelerator holds a bounded number of output neurons. Bigger layers are
run as several tiles, one after another, with the spike streams split before
and merged after each layer. The result must match untiled inference bit for
bit.
"""

import time

import numpy as np

from evsnn import engine, events, network, synthetic, tiler

net = network.random_weights(network.reference_network(), np.random.default_rng(0))
window = events.window_stream(synthetic.blob_events(rng=np.random.default_rng(0)))[0]
x = events.bin_events(window)

for plan in tiler.plan_tiles(net, 2048):
    layer = net.layers[plan.layer_index]
    print(f"layer {plan.layer_index} ({layer.kind}, {layer.neurons} neurons): {len(plan)} tile(s)")

t0 = time.perf_counter()
ref = engine.run_network(net, x)
t1 = time.perf_counter()
run = tiler.run_tiled(net, x, capacity=2048, input_events=len(window))
t2 = time.perf_counter()
print(f"untiled {t1 - t0:.2f}s, tiled {t2 - t1:.2f}s, {len(run.schedule)} slots")

same = all(np.array_equal(a.spikes, b.spikes) for a, b in zip(run.outputs, ref.outputs))
print("identical spike trains:", same)
print("class counts:", ref.class_counts, "-> class", ref.prediction)

# first conv layer: 8 row bands, each reading its rows plus a halo
for slot in run.schedule.slots:
    if slot.layer_index == 2:
        print(f"  tile {slot.tile_index}: neurons [{slot.neurons.start}, {slot.neurons.stop})"
              f" input rows [{slot.input_rows.start}, {slot.input_rows.stop})")

# smaller capacities only add slots
for cap in (4096, 1024, 256):
    r = tiler.run_tiled(net, x[:50], cap)
    print(f"capacity {cap}: {len(r.schedule)} slots, prediction {r.prediction}")

print("work counters:", run.stats)
