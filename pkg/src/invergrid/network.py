"""Radial LV feeder model and the CIGRE LV residential benchmark."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

DEFAULT_FREQUENCY = 50.0
DEFAULT_BASE_POWER = 100.0  # kVA
DEFAULT_BASE_VOLTAGE = 400.0  # V line-to-line


class CableType(str, Enum):
    UG1 = "UG1"
    UG3 = "UG3"
    CUSTOM = "Custom"


# (ohm/km, mH/km)
CABLE_DATA = {
    CableType.UG1: (0.287, 0.5316),
    CableType.UG3: (1.152, 1.4579),
}


@dataclass(frozen=True)
class Bus:
    id: str
    nominal_voltage: float = DEFAULT_BASE_VOLTAGE


@dataclass(frozen=True)
class LineSegment:
    from_bus: str
    to_bus: str
    resistance_per_km: float
    inductance_per_km: float  # mH/km
    length: float  # km
    cable_type: CableType = CableType.CUSTOM

    @classmethod
    def of_cable(cls, from_bus: str, to_bus: str, cable: CableType | str, length: float) -> LineSegment:
        cable = CableType(cable)
        r, l = CABLE_DATA[cable]
        return cls(from_bus, to_bus, r, l, length, cable)

    def reactance_per_km(self, frequency: float = DEFAULT_FREQUENCY) -> float:
        return 2.0 * math.pi * frequency * self.inductance_per_km * 1e-3

    def impedance_ohm(self, frequency: float = DEFAULT_FREQUENCY) -> complex:
        return complex(self.resistance_per_km, self.reactance_per_km(frequency)) * self.length


@dataclass(frozen=True)
class Load:
    bus: str
    active_power: float  # kW
    reactive_power: float  # kVAR


@dataclass(frozen=True)
class SlackSource:
    bus: str
    voltage_setpoint: float = 1.0


@dataclass(frozen=True)
class NetworkModel:
    """Immutable radial network.

    ``source_impedance`` is an optional per-unit impedance between the ideal
    slack source and the slack bus.
    """

    buses: tuple[Bus, ...]
    lines: tuple[LineSegment, ...]
    loads: tuple[Load, ...]
    slack: SlackSource
    frequency: float = DEFAULT_FREQUENCY
    base_power: float = DEFAULT_BASE_POWER
    base_voltage: float = DEFAULT_BASE_VOLTAGE
    source_impedance: complex = 0j

    @property
    def bus_ids(self) -> tuple[str, ...]:
        return tuple(b.id for b in self.buses)

    def with_slack_voltage(self, voltage: float) -> NetworkModel:
        return replace(self, slack=replace(self.slack, voltage_setpoint=voltage))


class InvalidArgument(ValueError):
    pass


def line_impedance_pu(seg: LineSegment, base_power: float, base_voltage: float,
                      frequency: float = DEFAULT_FREQUENCY) -> complex:
    """Series impedance of ``seg`` in per unit; ``base_power`` in kVA, ``base_voltage`` in V."""
    if base_power <= 0 or base_voltage <= 0:
        raise InvalidArgument(f"bases must be positive, got {base_power} kVA / {base_voltage} V")
    z_base = base_voltage**2 / (base_power * 1e3)
    return seg.impedance_ohm(frequency) / z_base


def validate(net: NetworkModel) -> list[str]:
    """Return a list of invariant violations; empty when ``net`` is a valid radial feeder."""
    violations: list[str] = []
    ids = [b.id for b in net.buses]
    seen: set[str] = set()
    for bus_id in ids:
        if bus_id in seen:
            violations.append(f"duplicate id: bus {bus_id}")
        seen.add(bus_id)
    for b in net.buses:
        if not b.nominal_voltage > 0:
            violations.append(f"bus {b.id}: nominal_voltage must be positive")

    for seg in net.lines:
        name = f"line {seg.from_bus}-{seg.to_bus}"
        for end in (seg.from_bus, seg.to_bus):
            if end not in seen:
                violations.append(f"{name}: unknown bus {end}")
        if seg.from_bus == seg.to_bus:
            violations.append(f"{name}: self-loop")
        if seg.resistance_per_km < 0:
            violations.append(f"{name}: negative resistance")
        if seg.inductance_per_km < 0:
            violations.append(f"{name}: negative inductance")
        if not seg.length > 0:
            violations.append(f"{name}: length must be positive")

    for load in net.loads:
        if load.bus not in seen:
            violations.append(f"load at {load.bus}: unknown bus")
        if load.active_power < 0:
            violations.append(f"load at {load.bus}: negative active power")

    if net.slack.bus not in seen:
        violations.append(f"slack: unknown bus {net.slack.bus}")
    if not 0.5 < net.slack.voltage_setpoint < 1.5:
        violations.append(f"slack: voltage setpoint {net.slack.voltage_setpoint} outside (0.5, 1.5)")
    if net.frequency <= 0:
        violations.append("frequency must be positive")
    if net.base_power <= 0 or net.base_voltage <= 0:
        violations.append("base values must be positive")

    violations.extend(_topology_violations(net, seen))
    return violations


def _topology_violations(net: NetworkModel, bus_ids: set[str]) -> list[str]:
    out = []
    if len(net.lines) != len(bus_ids) - 1:
        out.append(f"not radial: {len(net.lines)} lines for {len(bus_ids)} buses")
    # union-find for cycles and connectivity
    parent = {b: b for b in bus_ids}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for seg in net.lines:
        if seg.from_bus not in parent or seg.to_bus not in parent:
            continue
        a, b = find(seg.from_bus), find(seg.to_bus)
        if a == b:
            out.append(f"not radial: line {seg.from_bus}-{seg.to_bus} closes a cycle")
        else:
            parent[a] = b
    roots = {find(b) for b in bus_ids}
    if len(roots) > 1:
        out.append(f"not connected: {len(roots)} islands")
    return out


# Table I loads, kW / kVAR
CIGRE_LV_LOADS = (
    ("R1", 190.0, 62.45),
    ("R11", 14.25, 4.68),
    ("R15", 49.4, 16.24),
    ("R16", 52.25, 17.17),
    ("R17", 33.25, 10.93),
    ("R18", 44.65, 14.68),
)

TRUNK_SEGMENT_KM = 0.035
LATERAL_SEGMENT_KM = 0.030


def cigre_lv_topology() -> list[tuple[str, str, CableType, float]]:
    """(from, to, cable, km) rows of the residential feeder."""
    rows = [(f"R{i}", f"R{i + 1}", CableType.UG1, TRUNK_SEGMENT_KM) for i in range(1, 10)]
    laterals = [("R3", "R11"), ("R4", "R15"), ("R6", "R16"), ("R9", "R17"), ("R10", "R18")]
    rows += [(a, b, CableType.UG3, LATERAL_SEGMENT_KM) for a, b in laterals]
    return rows


def build_network(lines: list[tuple[str, str, CableType | str, float]] | list[LineSegment],
                  loads: list[tuple[str, float, float]], slack_bus: str = "R1",
                  buses: list[str] | None = None, **kwargs) -> NetworkModel:
    """Assemble a network from plain rows; bus order follows first appearance."""
    segs = [s if isinstance(s, LineSegment) else LineSegment.of_cable(*s) for s in lines]
    if buses is None:
        buses = [slack_bus]
        for seg in segs:
            for b in (seg.from_bus, seg.to_bus):
                if b not in buses:
                    buses.append(b)
    return NetworkModel(
        buses=tuple(Bus(b) for b in buses),
        lines=tuple(segs),
        loads=tuple(Load(*row) for row in loads),
        slack=SlackSource(slack_bus),
        **kwargs,
    )


def build_cigre_lv_residential() -> NetworkModel:
    net = build_network(cigre_lv_topology(), list(CIGRE_LV_LOADS))
    problems = validate(net)
    if problems:
        raise AssertionError(f"benchmark feeder invalid: {problems}")
    return net


def to_inductive_variant(net: NetworkModel, ratio: float = 5.0) -> NetworkModel:
    """Copy of ``net`` with every line's reactance set to ``ratio`` times its resistance."""
    w = 2.0 * math.pi * net.frequency
    lines = tuple(replace(seg, inductance_per_km=ratio * seg.resistance_per_km / w * 1e3)
                  for seg in net.lines)
    return replace(net, lines=lines)
