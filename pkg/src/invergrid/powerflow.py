"""Backward/forward sweep power flow for radial feeders, plus two-bus voltage-drop diagnostics.

All quantities in this module are per unit on the network's base unless noted.
Power is injection-positive: loads enter the solver as negative injections.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Mapping

from .network import InvalidArgument, NetworkModel, line_impedance_pu, validate


class SingularVoltage(ZeroDivisionError):
    pass


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class ComplexPower:
    p: float = 0.0
    q: float = 0.0

    @property
    def s(self) -> complex:
        return complex(self.p, self.q)

    def __add__(self, other: ComplexPower) -> ComplexPower:
        return ComplexPower(self.p + other.p, self.q + other.q)

    def __sub__(self, other: ComplexPower) -> ComplexPower:
        return ComplexPower(self.p - other.p, self.q - other.q)

    @classmethod
    def from_complex(cls, s: complex) -> ComplexPower:
        return cls(s.real, s.imag)


@dataclass(frozen=True)
class VoltagePhasor:
    magnitude: float
    angle: float = 0.0

    @property
    def phasor(self) -> complex:
        return cmath.rect(self.magnitude, self.angle)

    @classmethod
    def from_complex(cls, v: complex) -> VoltagePhasor:
        return cls(abs(v), cmath.phase(v))


def _check_voltage(v: VoltagePhasor) -> None:
    if not v.magnitude > 0:
        raise SingularVoltage(f"voltage magnitude must be positive, got {v.magnitude}")


# -- two-bus relations -------------------------------------------------------

def branch_current(s: ComplexPower, v: VoltagePhasor) -> complex:
    """Current drawn by a power ``s`` at voltage ``v``: conj(S / V)."""
    _check_voltage(v)
    return (s.s / v.phasor).conjugate()


def voltage_drop_complex(s: ComplexPower, v: VoltagePhasor, z: complex) -> complex:
    """Drop across ``z`` feeding ``s`` at a bus whose voltage is the angle reference.

    Real part (PR + QX)/|V|, imaginary part (PX - QR)/|V|.
    """
    _check_voltage(v)
    r, x = z.real, z.imag
    return complex(s.p * r + s.q * x, s.p * x - s.q * r) / v.magnitude


def voltage_drop_magnitude(s: ComplexPower, v: VoltagePhasor, z: complex) -> float:
    """In-phase approximation of the drop magnitude, (PR + QX)/|V|."""
    _check_voltage(v)
    return (s.p * z.real + s.q * z.imag) / v.magnitude


def sensitivity(z: complex, v: VoltagePhasor) -> tuple[float, float]:
    """(d|dV|/dP, d|dV|/dQ) = (R/|V|, X/|V|)."""
    _check_voltage(v)
    return z.real / v.magnitude, z.imag / v.magnitude


class Regime(str, Enum):
    RESISTIVE = "ResistiveDominant"
    INDUCTIVE = "InductiveDominant"
    MIXED = "Mixed"


def classify_regime(net: NetworkModel, threshold: float = 2.0) -> Regime:
    """Classify by the unweighted mean per-line R/X (or X/R) ratio."""
    rx, xr = [], []
    for seg in net.lines:
        r, x = seg.resistance_per_km, seg.reactance_per_km(net.frequency)
        rx.append(r / x if x > 0 else math.inf)
        xr.append(x / r if r > 0 else math.inf)
    if not rx:
        return Regime.MIXED
    if sum(rx) / len(rx) > threshold:
        return Regime.RESISTIVE
    if sum(xr) / len(xr) > threshold:
        return Regime.INDUCTIVE
    return Regime.MIXED


def two_bus_voltage(s_load: ComplexPower, z: complex, v_source: float = 1.0) -> float:
    """Closed-form |V_B| for a source at ``v_source`` feeding a constant-power load over ``z``.

    Larger root of |V|^4 + (2(PR + QX) - Vs^2)|V|^2 + |S|^2 |Z|^2 = 0.
    """
    p, q, r, x = s_load.p, s_load.q, z.real, z.imag
    b = v_source**2 - 2.0 * (p * r + q * x)
    disc = b * b - 4.0 * (p * p + q * q) * (r * r + x * x)
    if disc < 0:
        raise ValueError("no power-flow solution: load beyond the maximum transfer")
    return math.sqrt((b + math.sqrt(disc)) / 2.0)


# -- sweep solver ------------------------------------------------------------

@dataclass(frozen=True)
class SolverOptions:
    tolerance: float = 1e-8
    max_iterations: int = 50
    collapse_voltage: float = 0.3


@dataclass(frozen=True)
class PowerFlowSolution:
    voltages: dict[str, VoltagePhasor]
    slack_injection: ComplexPower
    losses: ComplexPower
    iterations: int
    converged: bool
    max_mismatch: float

    def vm(self, bus: str) -> float:
        return self.voltages[bus].magnitude


@dataclass(frozen=True)
class _Topology:
    order: tuple[int, ...]  # root first, parents before children
    parent: tuple[int, ...]  # -1 for root
    z: tuple[complex, ...]  # impedance of the branch feeding each bus
    index: dict[str, int]
    ids: tuple[str, ...]


@lru_cache(maxsize=64)
def _topology(buses, lines, slack_bus, base_power, base_voltage, frequency) -> _Topology:
    ids = tuple(b.id for b in buses)
    index = {b: i for i, b in enumerate(ids)}
    adj: list[list[tuple[int, complex]]] = [[] for _ in ids]
    for seg in lines:
        z = line_impedance_pu(seg, base_power, base_voltage, frequency)
        a, b = index[seg.from_bus], index[seg.to_bus]
        adj[a].append((b, z))
        adj[b].append((a, z))
    root = index[slack_bus]
    parent = [-1] * len(ids)
    zs = [0j] * len(ids)
    order = [root]
    seen = {root}
    for node in order:  # breadth-first, list grows while iterating
        for nb, z in adj[node]:
            if nb not in seen:
                seen.add(nb)
                parent[nb] = node
                zs[nb] = z
                order.append(nb)
    return _Topology(tuple(order), tuple(parent), tuple(zs), index, ids)


def prepare(net: NetworkModel) -> _Topology:
    problems = validate(net)
    if problems:
        raise TopologyError("; ".join(problems))
    return _topology(net.buses, net.lines, net.slack.bus, net.base_power, net.base_voltage,
                     net.frequency)


def solve(net: NetworkModel, injections: Mapping[str, ComplexPower] | None = None,
          opts: SolverOptions = SolverOptions(), topology: _Topology | None = None
          ) -> PowerFlowSolution:
    """Solve the feeder for its loads plus the given per-unit injections.

    Raises TopologyError for an invalid or non-radial network. Divergence is
    reported through ``converged`` rather than raised. ``topology`` skips
    validation when the caller already holds ``prepare(net)`` for this feeder.
    """
    topo = topology if topology is not None else prepare(net)
    n = len(topo.ids)
    base = net.base_power
    s_inj = [0j] * n
    for load in net.loads:
        s_inj[topo.index[load.bus]] -= complex(load.active_power, load.reactive_power) / base
    for bus, s in (injections or {}).items():
        if bus not in topo.index:
            raise InvalidArgument(f"injection at unknown bus {bus}")
        s_inj[topo.index[bus]] += complex(s.p, s.q)
    return _sweep(topo, s_inj, net.slack.voltage_setpoint, net.source_impedance, opts)


def _sweep(topo: _Topology, s_inj: list[complex], v_set: float, z_src: complex,
           opts: SolverOptions) -> PowerFlowSolution:
    order, parent, z = topo.order, topo.parent, topo.z
    backward = order[::-1]
    root = order[0]
    n = len(order)
    v = [complex(v_set, 0.0)] * n
    j = [0j] * n  # current into each bus's subtree (through its feeding branch)
    converged = False
    mismatch = math.inf
    it = 0
    for it in range(1, opts.max_iterations + 1):
        # backward: accumulate consumption currents from leaves
        for b in range(n):
            j[b] = -(s_inj[b] / v[b]).conjugate()
        for b in backward:
            pb = parent[b]
            if pb >= 0:
                j[pb] += j[b]
        # forward: Ohm's-law drops from the source
        dv_max = 0.0
        new_root = v_set - z_src * j[root]
        dv_max = abs(new_root - v[root])
        v[root] = new_root
        for b in order[1:]:
            nv = v[parent[b]] - z[b] * j[b]
            d = abs(nv - v[b])
            if d > dv_max:
                dv_max = d
            v[b] = nv
        if not all(abs(x) > opts.collapse_voltage for x in v) or not math.isfinite(dv_max):
            break
        mismatch = _mismatch(topo, s_inj, v)
        if dv_max <= opts.tolerance and mismatch <= opts.tolerance:
            converged = True
            break

    # branch currents consistent with the final voltages
    jf = [-(s_inj[b] / v[b]).conjugate() if v[b] != 0 else complex(math.nan) for b in range(n)]
    for b in backward:
        if parent[b] >= 0:
            jf[parent[b]] += jf[b]
    loss = z_src * abs(jf[root]) ** 2
    for b in order[1:]:
        loss += z[b] * abs(jf[b]) ** 2
    slack = v_set * jf[root].conjugate()
    return PowerFlowSolution(
        voltages={topo.ids[b]: VoltagePhasor.from_complex(v[b]) for b in range(n)},
        slack_injection=ComplexPower.from_complex(slack),
        losses=ComplexPower.from_complex(loss),
        iterations=it,
        converged=converged,
        max_mismatch=mismatch,
    )


def _mismatch(topo: _Topology, s_inj: list[complex], v: list[complex]) -> float:
    """Largest nodal power mismatch for voltages ``v``, branch currents from Ohm's law.

    Returns 0.0 when a zero-impedance branch makes the currents unrecoverable;
    the voltage-update criterion then decides convergence alone.
    """
    out = [0j] * len(v)  # net current leaving each bus into the network
    for b in topo.order[1:]:
        if topo.z[b] == 0:
            return 0.0
        i_branch = (v[topo.parent[b]] - v[b]) / topo.z[b]
        out[topo.parent[b]] += i_branch
        out[b] -= i_branch
    worst = 0.0
    for b in topo.order[1:]:
        worst = max(worst, abs(v[b] * out[b].conjugate() - s_inj[b]))
    return worst
