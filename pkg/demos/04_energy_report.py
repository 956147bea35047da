"""
Stage energy and the affine cost model
======================================

Each pipeline stage runs on one power domain while the other two idle. With
the measured durations the report gives 164.5 ms and about 7.68 mJ per
prediction. The cost model maps simulator work counters to durations; its
coefficients are calibrated on one reference window, regenerated here.
"""

import numpy as np

from evsnn import events, network, perf, synthetic, tiler

profile = perf.load_power_profile()
report = perf.total_report(profile, perf.measured_durations(paper_replay=True))
print(report.to_text())

# average active power is active energy over total time; the total-energy
# average is reported next to it under a different key
print(f"active-energy average {report.avg_active_power_mw:.2f} mW, "
      f"total-energy average {report.avg_total_power_mw:.2f} mW")

# regenerate the reference workload counters
net = network.random_weights(network.reference_network(), np.random.default_rng(0))
window = events.window_stream(synthetic.blob_events(rng=np.random.default_rng(0)))[0]
run = tiler.run_tiled(net, events.bin_events(window), 2048, input_events=len(window))
print("measured counters: ", run.stats)
print("REFERENCE_WORKLOAD:", perf.REFERENCE_WORKLOAD)

model = perf.DEFAULT_COST_MODEL
for k, v in model.to_dict().items():
    print(f"  {k:>24} = {v:.6g}")
print("durations:", {s.value: round(t, 3) for s, t in perf.measured_durations(run.stats).items()})

# a busier window takes longer in preprocessing and inference
busy = perf.WorkloadStats(2 * run.stats.input_events, 2 * run.stats.stream_spikes,
                          2 * run.stats.inference_spikes, run.stats.slots)
print("2x work:", {s.value: round(t, 3) for s, t in model.durations(busy).items()})

# closing the loop: actuation takes a few clock cycles
for cycles in (10, 50, 200):
    print(f"{cycles} cycles @ 50 MHz = {perf.actuation_latency(50_000_000, cycles):.1f} us")
