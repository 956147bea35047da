"""Functional and performance simulator of an event-camera to spiking-network
to actuation pipeline on a tiled neuromorphic accelerator."""

from .engine import LifState, lif_step, run_layer, run_network
from .events import bin_events, parse_events, serialize_events, window_stream
from .network import (
    LayerSpec,
    NetworkSpec,
    emit_network,
    infer_shape,
    load_network,
    parse_network,
    reference_network,
)
from .perf import REFERENCE_PROFILE, stage_energy, total_report
from .tiler import merge_streams, plan_tiles, run_tiled, split_stream

__version__ = "0.1.0"
