"""Stage-wise latency, power and energy accounting for one inference.

The pipeline has three stages, each run by one power domain while the other
two sit clock-gated:

=============  ========  ===========================================
stage          domain    work
=============  ========  ===========================================
acquisition    fc        DVS events read through the camera interface
preprocessing  cluster   split/merge of spike streams between tiles
inference      sne       tiled LIF evaluation
=============  ========  ===========================================

Units: power in mW, time in ms, energy in mJ (mW * ms = uJ = 1e-3 mJ).
"""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from importlib import resources

from .errors import InstrumentationMissing, MissingStage, UnknownStage


class Stage(str, Enum):
    ACQUISITION = "acquisition"
    PREPROCESSING = "preprocessing"
    INFERENCE = "inference"


STAGES = tuple(Stage)
STAGE_COMPONENT = {
    Stage.ACQUISITION: "fc",
    Stage.PREPROCESSING: "cluster",
    Stage.INFERENCE: "sne",
}
COMPONENTS = ("fc", "cluster", "sne")

MEASURED_DURATIONS_MS = {
    Stage.ACQUISITION: 1.5,
    Stage.PREPROCESSING: 131.0,
    Stage.INFERENCE: 32.0,
}

DEFAULT_CLOCK_HZ = 50_000_000
DEFAULT_ACTUATION_CYCLES = 10


def as_stage(stage) -> Stage:
    try:
        return Stage(stage)
    except ValueError:
        raise UnknownStage(f"unknown stage {stage!r}") from None


@dataclass(frozen=True)
class ComponentPower:
    idle_mw: float
    active_mw: float


@dataclass(frozen=True)
class PowerProfile:
    components: dict
    vdd_v: float | None = None

    def __post_init__(self):
        for name in COMPONENTS:
            if name not in self.components:
                raise ValueError(f"power profile lacks component {name!r}")
        for name, p in self.components.items():
            if not (p.idle_mw > 0 and p.active_mw > 0):
                raise ValueError(f"{name}: powers must be positive")
            if p.idle_mw > p.active_mw:
                raise ValueError(f"{name}: idle power {p.idle_mw} exceeds active {p.active_mw}")

    def idle(self, component: str) -> float:
        return self.components[component].idle_mw

    def active(self, component: str) -> float:
        return self.components[component].active_mw

    @property
    def total_idle_mw(self) -> float:
        return sum(self.idle(c) for c in COMPONENTS)


REFERENCE_PROFILE = PowerProfile(
    {
        "fc": ComponentPower(3.5, 3.8),
        "cluster": ComponentPower(6.5, 34.0),
        "sne": ComponentPower(7.7, 44.0),
    },
    vdd_v=0.65,
)


def parse_power_profile(text: str) -> PowerProfile:
    """Read an INI profile: one ``[fc]``/``[cluster]``/``[sne]`` section each
    with ``idle_mw`` and ``active_mw``, plus optional ``[supply] vdd_v``."""
    cp = configparser.ConfigParser()
    cp.read_string(text)
    comps = {}
    for name in COMPONENTS:
        if not cp.has_section(name):
            raise ValueError(f"power profile lacks section [{name}]")
        comps[name] = ComponentPower(
            cp.getfloat(name, "idle_mw"), cp.getfloat(name, "active_mw")
        )
    vdd = cp.getfloat("supply", "vdd_v") if cp.has_option("supply", "vdd_v") else None
    return PowerProfile(comps, vdd)


def load_power_profile(path=None) -> PowerProfile:
    if path is None:
        text = resources.files("evsnn.data").joinpath("reference_power.ini").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return parse_power_profile(text)


@dataclass(frozen=True)
class StageMetrics:
    stage: Stage
    component: str
    duration_ms: float
    active_energy_mj: float
    idle_energy_others_mj: float

    @property
    def energy_mj(self) -> float:
        return self.active_energy_mj + self.idle_energy_others_mj


def stage_energy(profile: PowerProfile, stage, duration_ms: float) -> StageMetrics:
    stage = as_stage(stage)
    if duration_ms < 0 or not math.isfinite(duration_ms):
        raise ValueError(f"stage duration must be a finite non-negative number, got {duration_ms}")
    comp = STAGE_COMPONENT[stage]
    idle_others = sum(profile.idle(c) for c in COMPONENTS if c != comp)
    return StageMetrics(
        stage,
        comp,
        float(duration_ms),
        profile.active(comp) * duration_ms * 1e-3,
        idle_others * duration_ms * 1e-3,
    )


def actuation_latency(clock_hz: int, cycles: int) -> float:
    """Latency in microseconds of ``cycles`` system-clock cycles."""
    if clock_hz <= 0:
        raise ValueError(f"clock frequency must be positive, got {clock_hz}")
    if cycles <= 0:
        raise ValueError(f"cycle count must be positive, got {cycles}")
    return cycles / clock_hz * 1e6


@dataclass(frozen=True)
class ActuationSpec:
    clock_hz: int = DEFAULT_CLOCK_HZ
    cycles: int = DEFAULT_ACTUATION_CYCLES


ENERGY_NOTE = (
    "stage active_energy_mJ counts the running domain only; stage energy_mJ adds the "
    "idle power of the clock-gated domains; total_energy_mJ sums stage energy_mJ"
)


@dataclass(frozen=True)
class PipelineReport:
    stages: tuple
    total_time_ms: float
    total_energy_mj: float
    active_energy_mj: float
    avg_active_power_mw: float
    avg_total_power_mw: float
    total_idle_power_mw: float
    averages_defined: bool
    actuation_clock_hz: int
    actuation_cycles: int
    actuation_latency_us: float
    predicted_class: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def actuation_below_1us(self) -> bool:
        return self.actuation_latency_us < 1.0

    def stage(self, stage) -> StageMetrics:
        stage = as_stage(stage)
        return next(s for s in self.stages if s.stage == stage)

    def to_dict(self) -> dict:
        """Flat map with full-precision values; keys are stable."""
        out = {}
        for s in self.stages:
            p = f"stage.{s.stage.value}."
            out[p + "component"] = s.component
            out[p + "time_ms"] = s.duration_ms
            out[p + "active_energy_mJ"] = s.active_energy_mj
            out[p + "idle_energy_mJ"] = s.idle_energy_others_mj
            out[p + "energy_mJ"] = s.energy_mj
        out.update(
            {
                "total_time_ms": self.total_time_ms,
                "total_energy_mJ": self.total_energy_mj,
                "active_energy_mJ": self.active_energy_mj,
                "avg_active_power_mW": self.avg_active_power_mw,
                "avg_total_power_mW": self.avg_total_power_mw,
                "total_idle_power_mW": self.total_idle_power_mw,
                "averages_defined": self.averages_defined,
                "actuation_clock_hz": self.actuation_clock_hz,
                "actuation_cycles": self.actuation_cycles,
                "actuation_latency_us": self.actuation_latency_us,
                "actuation_below_1us": self.actuation_below_1us,
            }
        )
        if self.predicted_class is not None:
            out["predicted_class"] = self.predicted_class
        for k, v in self.extra.items():
            out[f"extra.{k}"] = v
        out["energy_note"] = ENERGY_NOTE
        return out

    @classmethod
    def from_dict(cls, d: dict) -> PipelineReport:
        stages = []
        for st in STAGES:
            p = f"stage.{st.value}."
            if p + "time_ms" not in d:
                continue
            stages.append(
                StageMetrics(
                    st,
                    d[p + "component"],
                    d[p + "time_ms"],
                    d[p + "active_energy_mJ"],
                    d[p + "idle_energy_mJ"],
                )
            )
        return cls(
            tuple(stages),
            d["total_time_ms"],
            d["total_energy_mJ"],
            d["active_energy_mJ"],
            d["avg_active_power_mW"],
            d["avg_total_power_mW"],
            d["total_idle_power_mW"],
            d["averages_defined"],
            d["actuation_clock_hz"],
            d["actuation_cycles"],
            d["actuation_latency_us"],
            d.get("predicted_class"),
            {k[6:]: v for k, v in d.items() if k.startswith("extra.")},
        )

    def to_text(self) -> str:
        """``key: value`` lines; energies of single stages keep 4 decimals, the
        rest 2."""
        lines = []
        for k, v in self.to_dict().items():
            lines.append(f"{k}: {_fmt(k, v)}")
        return "\n".join(lines) + "\n"


def _fmt(key, value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        digits = 4 if key.startswith("stage.") or key.endswith("_us") else 2
        return format(round(value, digits), "g")
    return str(value)


def parse_report_text(text: str) -> dict:
    """Inverse of :meth:`PipelineReport.to_text` at the printed precision."""
    out = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, sep, value = line.partition(": ")
        if not sep:
            raise ValueError(f"not a 'key: value' line: {line!r}")
        out[key] = _unfmt(value)
    return out


def _unfmt(value):
    if value in ("true", "false"):
        return value == "true"
    for conv in (int, float):
        try:
            return conv(value)
        except ValueError:
            pass
    return value


def total_report(
    profile: PowerProfile,
    durations: dict,
    actuation: ActuationSpec = ActuationSpec(),
    predicted_class: int | None = None,
    extra: dict | None = None,
) -> PipelineReport:
    """Combine per-stage durations into a :class:`PipelineReport`.

    Total energy is the active energy of every stage plus the idle energy of
    the domains not active in it. Average active power is active energy over
    total time; average total power is total energy over total time.
    """
    durations = {as_stage(k): v for k, v in durations.items()}
    missing = [s.value for s in STAGES if s not in durations]
    if missing:
        raise MissingStage(f"no duration for stage(s) {', '.join(missing)}")
    stages = tuple(stage_energy(profile, s, durations[s]) for s in STAGES)
    total_time = sum(s.duration_ms for s in stages)
    active = sum(s.active_energy_mj for s in stages)
    total = sum(s.energy_mj for s in stages)
    defined = total_time > 0
    return PipelineReport(
        stages=stages,
        total_time_ms=total_time,
        total_energy_mj=total,
        active_energy_mj=active,
        avg_active_power_mw=active / total_time * 1e3 if defined else 0.0,
        avg_total_power_mw=total / total_time * 1e3 if defined else 0.0,
        total_idle_power_mw=profile.total_idle_mw,
        averages_defined=defined,
        actuation_clock_hz=actuation.clock_hz,
        actuation_cycles=actuation.cycles,
        actuation_latency_us=actuation_latency(actuation.clock_hz, actuation.cycles),
        predicted_class=predicted_class,
        extra=dict(extra or {}),
    )


# -- cost model ---------------------------------------------------------------


@dataclass(frozen=True)
class CostModel:
    """Affine per-stage cost model.

    acquisition   = fixed + per_event * input events
    preprocessing = fixed + per_stream_spike * spikes moved by split/merge
    inference     = fixed + per_slot * execution slots + per_spike * emitted spikes
    """

    acquisition_fixed_ms: float
    per_event_ms: float
    preprocessing_fixed_ms: float
    per_stream_spike_ms: float
    inference_fixed_ms: float
    per_slot_ms: float
    per_inference_spike_ms: float

    def durations(self, stats) -> dict:
        return {
            Stage.ACQUISITION: self.acquisition_fixed_ms + self.per_event_ms * stats.input_events,
            Stage.PREPROCESSING: self.preprocessing_fixed_ms
            + self.per_stream_spike_ms * stats.stream_spikes,
            Stage.INFERENCE: self.inference_fixed_ms
            + self.per_slot_ms * stats.slots
            + self.per_inference_spike_ms * stats.inference_spikes,
        }

    @classmethod
    def calibrated(cls, stats, targets=None, fixed_fraction: float = 0.1, slot_fraction: float = 0.5):
        """Coefficients that map ``stats`` exactly onto ``targets``.

        ``fixed_fraction`` of each stage's target is charged as fixed cost and
        the rest to its work counters; inference splits its variable part
        between slots (``slot_fraction``) and spikes. A counter that is zero
        in ``stats`` has its share folded into the fixed cost.
        """
        targets = {as_stage(k): v for k, v in (targets or MEASURED_DURATIONS_MS).items()}

        def split(target, *units):
            var = (1.0 - fixed_fraction) * target
            coeffs, fixed = [], fixed_fraction * target
            for share, n in units:
                if n > 0:
                    coeffs.append(share * var / n)
                else:
                    coeffs.append(0.0)
                    fixed += share * var
            return fixed, coeffs

        a_fixed, (a_ev,) = split(targets[Stage.ACQUISITION], (1.0, stats.input_events))
        p_fixed, (p_sp,) = split(targets[Stage.PREPROCESSING], (1.0, stats.stream_spikes))
        i_fixed, (i_slot, i_sp) = split(
            targets[Stage.INFERENCE],
            (slot_fraction, stats.slots),
            (1.0 - slot_fraction, stats.inference_spikes),
        )
        return cls(a_fixed, a_ev, p_fixed, p_sp, i_fixed, i_slot, i_sp)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class WorkloadStats:
    """Same counters as :class:`evsnn.tiler.RunStats`, frozen."""

    input_events: int
    stream_spikes: int
    inference_spikes: int
    slots: int


# Counters of one 300 ms window of synthetic.blob_events(rng=default_rng(0))
# run through the reference network with random_weights(default_rng(0)) at
# capacity 2048; demos/04_energy_report.py regenerates them.
REFERENCE_WORKLOAD = WorkloadStats(
    input_events=60_097, stream_spikes=690_635, inference_spikes=304_514, slots=18
)

DEFAULT_COST_MODEL = CostModel.calibrated(REFERENCE_WORKLOAD)


def measured_durations(stats=None, *, model: CostModel | None = None, paper_replay: bool = False) -> dict:
    """Per-stage durations in ms for one inference.

    ``paper_replay`` returns the measured stage durations and ignores
    ``stats``; otherwise ``stats`` (a :class:`RunStats`) is required.
    """
    if paper_replay:
        return dict(MEASURED_DURATIONS_MS)
    if stats is None:
        raise InstrumentationMissing("run statistics are required unless paper_replay is set")
    return (model or DEFAULT_COST_MODEL).durations(stats)
