"""Quasi-static time-series engine: event timeline, control update, power flow, recording."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Sequence

from .inverter import (Aggregator, ConstantPowerFactor, ControlMode, InverterUnit, VoltVarCurve,
                       VoltWattCurve, aggregate_injection)
from .network import (CIGRE_LV_LOADS, InvalidArgument, LineSegment, NetworkModel,
                      build_cigre_lv_residential, build_network, to_inductive_variant)
from .powerflow import ComplexPower, PowerFlowSolution, SolverOptions, prepare, solve

_T_EPS = 1e-9


class Variant(str, Enum):
    RESISTIVE = "resistive"
    INDUCTIVE = "inductive"


@dataclass(frozen=True)
class SetIrradiance:
    frac: float

    def __post_init__(self):
        if not 0.0 <= self.frac <= 1.0:
            raise InvalidArgument(f"irradiance fraction must lie in [0, 1], got {self.frac}")


@dataclass(frozen=True)
class SetSlackVoltage:
    pu: float

    def __post_init__(self):
        if not 0.5 < self.pu < 1.5:
            raise InvalidArgument(f"slack voltage must lie in (0.5, 1.5), got {self.pu}")


@dataclass(frozen=True)
class Event:
    time: float
    action: SetIrradiance | SetSlackVoltage

    def __post_init__(self):
        if self.time < 0:
            raise InvalidArgument(f"event time must be non-negative, got {self.time}")


@dataclass(frozen=True)
class ScenarioTimeline:
    events: tuple[Event, ...] = ()
    duration: float = 20.0
    dt: float = 0.01

    def __post_init__(self):
        if not self.duration >= 0:
            raise InvalidArgument("duration must be non-negative")
        if not self.dt > 0 or (self.duration > 0 and self.dt > self.duration):
            raise InvalidArgument(f"need 0 < dt <= duration, got dt={self.dt}")
        times = [e.time for e in self.events]
        if times != sorted(times):
            raise InvalidArgument("events must be sorted by time")
        if times and times[-1] > self.duration:
            raise InvalidArgument("event after the end of the timeline")

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.duration / self.dt + _T_EPS))


def default_timeline(dt: float = 0.01) -> ScenarioTimeline:
    return ScenarioTimeline(
        events=(
            Event(5.0, SetIrradiance(0.5)),
            Event(10.0, SetIrradiance(1.0)),
            Event(13.0, SetSlackVoltage(1.2)),
            Event(17.0, SetSlackVoltage(1.0)),
        ),
        duration=20.0,
        dt=dt,
    )


def ambient_at(timeline: ScenarioTimeline, t: float) -> tuple[float, float]:
    """(irradiance, slack voltage) in force at ``t``; an event applies from its own time on."""
    if not -_T_EPS <= t <= timeline.duration + _T_EPS:
        raise InvalidArgument(f"t={t} outside [0, {timeline.duration}]")
    irradiance, slack_v = 1.0, 1.0
    for ev in timeline.events:
        if ev.time > t + _T_EPS:
            break
        if isinstance(ev.action, SetIrradiance):
            irradiance = ev.action.frac
        else:
            slack_v = ev.action.pu
    return irradiance, slack_v


@dataclass(frozen=True)
class AggregatorSpec:
    bus: str
    units: int = 5
    s_rated: float = 10.0
    p_stc: float = 9.5
    mode: ControlMode = field(default_factory=ConstantPowerFactor)
    ramp: float = 2.0
    filter_tau: float = 0.1

    def __post_init__(self):
        if self.units < 1:
            raise InvalidArgument("an aggregator needs at least one unit")
        # unit-level invariants
        InverterUnit(self.s_rated, self.p_stc, self.mode, self.ramp, self.filter_tau)

    def build(self, agg_id: str) -> Aggregator:
        return Aggregator(agg_id, self.bus, [
            InverterUnit(self.s_rated, self.p_stc, self.mode, self.ramp, self.filter_tau)
            for _ in range(self.units)
        ])


@dataclass(frozen=True)
class Topology:
    """Feeder override: line rows, load rows and optionally an explicit bus list."""

    lines: tuple[LineSegment, ...]
    loads: tuple[tuple[str, float, float], ...] = CIGRE_LV_LOADS
    buses: tuple[str, ...] | None = None
    slack_bus: str = "R1"


@dataclass(frozen=True)
class ScenarioSpec:
    variant: Variant = Variant.RESISTIVE
    a1: AggregatorSpec = field(default_factory=lambda: AggregatorSpec("R17"))
    a2: AggregatorSpec = field(default_factory=lambda: AggregatorSpec("R18"))
    timeline: ScenarioTimeline = field(default_factory=default_timeline)
    topology: Topology | None = None

    @property
    def a1_mode(self) -> ControlMode:
        return self.a1.mode

    @property
    def a2_mode(self) -> ControlMode:
        return self.a2.mode

    def network(self) -> NetworkModel:
        if self.topology is None:
            net = build_cigre_lv_residential()
        else:
            t = self.topology
            net = build_network(list(t.lines), list(t.loads), t.slack_bus,
                                list(t.buses) if t.buses is not None else None)
        return to_inductive_variant(net) if self.variant is Variant.INDUCTIVE else net

    def aggregators(self) -> list[Aggregator]:
        return [self.a1.build("A1"), self.a2.build("A2")]


@dataclass(frozen=True)
class AggregatorReading:
    p: float  # kW
    q: float  # kVAR
    pf: float
    v: float  # pu


def power_factor(p: float, q: float) -> float:
    s = math.hypot(p, q)
    return p / s if s > 0 else 1.0


@dataclass(frozen=True)
class TimeSeriesRecord:
    time: float
    aggregators: dict[str, AggregatorReading]
    slack_v: float
    irradiance: float
    solver_iterations: int
    converged: bool


Observer = Callable[[int, TimeSeriesRecord, PowerFlowSolution, Sequence[Aggregator]], None]


def run(spec: ScenarioSpec, net: NetworkModel | None = None,
        aggs: Sequence[Aggregator] | None = None, observer: Observer | None = None,
        opts: SolverOptions = SolverOptions()) -> list[TimeSeriesRecord]:
    """Simulate ``spec`` and return one record per step, ``t = k * dt``.

    Controls act on the previous step's solved PCC voltage (the slack setpoint
    at the first step). Non-converged steps are flagged and the run continues;
    a structurally invalid feeder raises TopologyError before the first step.
    """
    net = spec.network() if net is None else net
    aggs = spec.aggregators() if aggs is None else list(aggs)
    topo = prepare(net)
    for agg in aggs:
        if agg.bus not in topo.index:
            raise InvalidArgument(f"aggregator {agg.id} at unknown bus {agg.bus}")
    tl = spec.timeline
    base = net.base_power
    v_meas: dict[str, float] = {}
    records = []
    for k in range(tl.n_steps + 1):
        t = k * tl.dt
        irradiance, slack_v = ambient_at(tl, t)
        step_net = net if net.slack.voltage_setpoint == slack_v else net.with_slack_voltage(slack_v)
        injections: dict[str, ComplexPower] = {}
        outputs = {}
        for agg in aggs:
            s = aggregate_injection(agg, v_meas.get(agg.id, slack_v), irradiance, tl.dt)
            outputs[agg.id] = s
            prev = injections.get(agg.bus, ComplexPower())
            injections[agg.bus] = prev + ComplexPower(s.p / base, s.q / base)
        sol = solve(step_net, injections, opts, topology=topo)
        readings = {}
        for agg in aggs:
            s = outputs[agg.id]
            v = sol.vm(agg.bus)
            if sol.converged:
                v_meas[agg.id] = v
            readings[agg.id] = AggregatorReading(s.p, s.q, power_factor(s.p, s.q), v)
        rec = TimeSeriesRecord(t, readings, slack_v, irradiance, sol.iterations, sol.converged)
        records.append(rec)
        if observer is not None:
            observer(k, rec, sol, aggs)
    return records


def default_mode(kind: type, s_rated: float, p_stc: float) -> ControlMode:
    if kind is ConstantPowerFactor:
        return ConstantPowerFactor(0.95)
    if kind is VoltVarCurve:
        return VoltVarCurve.for_rating(s_rated)
    return VoltWattCurve(p_rated=p_stc)


A2_MODE_KINDS = (ConstantPowerFactor, VoltVarCurve, VoltWattCurve)


def experiment_matrix(base: ScenarioSpec) -> list[ScenarioSpec]:
    """{resistive, inductive} x A2 in {CPF, Volt-VAR, Volt-Watt}, A1 held at CPF 0.95 lagging.

    A2 keeps its configured curve when its kind matches; other modes take defaults.
    """
    a1_absorbs = base.a1.mode.absorbs if isinstance(base.a1.mode, ConstantPowerFactor) else False
    a1 = replace(base.a1, mode=ConstantPowerFactor(0.95, a1_absorbs))
    specs = []
    for variant in Variant:
        for kind in A2_MODE_KINDS:
            if isinstance(base.a2.mode, kind):
                mode = base.a2.mode
            else:
                mode = default_mode(kind, base.a2.s_rated, base.a2.p_stc)
            specs.append(replace(base, variant=variant, a1=a1, a2=replace(base.a2, mode=mode)))
    return specs


@dataclass(frozen=True)
class WindowStats:
    mean: float
    min: float
    max: float


@dataclass(frozen=True)
class AggregatorSummary:
    p: WindowStats
    q: WindowStats
    v: WindowStats
    pf: WindowStats
    max_abs_dp_dt: float  # kW/s


def _stats(xs: list[float]) -> WindowStats:
    return WindowStats(math.fsum(xs) / len(xs), min(xs), max(xs))


def summarize_window(records: Sequence[TimeSeriesRecord], t_start: float,
                     t_end: float) -> dict[str, AggregatorSummary]:
    """Per-aggregator statistics over records with ``t_start <= t < t_end``."""
    if not t_start < t_end:
        raise InvalidArgument(f"empty window [{t_start}, {t_end})")
    window = [r for r in records if t_start - _T_EPS <= r.time < t_end - _T_EPS]
    if not window:
        raise InvalidArgument(f"no records in [{t_start}, {t_end})")
    out = {}
    for agg_id in window[0].aggregators:
        ps = [r.aggregators[agg_id].p for r in window]
        slopes = [abs(b.aggregators[agg_id].p - a.aggregators[agg_id].p) / (b.time - a.time)
                  for a, b in zip(window, window[1:])]
        out[agg_id] = AggregatorSummary(
            p=_stats(ps),
            q=_stats([r.aggregators[agg_id].q for r in window]),
            v=_stats([r.aggregators[agg_id].v for r in window]),
            pf=_stats([r.aggregators[agg_id].pf for r in window]),
            max_abs_dp_dt=max(slopes, default=0.0),
        )
    return out


def run_matrix(base: ScenarioSpec) -> dict[tuple[str, str], list[TimeSeriesRecord]]:
    """Run all six matrix specs sequentially, keyed by (variant, A2 mode name)."""
    from .inverter import mode_name

    return {(spec.variant.value, mode_name(spec.a2_mode)): run(spec)
            for spec in experiment_matrix(base)}
