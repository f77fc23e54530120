"""Smart-inverter control: CPF, Volt-VAR and Volt-Watt laws, ramp limiting, capability clamp.

Powers here are physical (kW / kVAR), injection-positive under the generator
convention: q > 0 injects reactive power and raises the local voltage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

from .network import InvalidArgument
from .powerflow import ComplexPower


@dataclass(frozen=True)
class ConstantPowerFactor:
    pf: float = 0.95
    absorbs: bool = False  # lagging read as absorption when True

    def __post_init__(self):
        if not 0 < self.pf <= 1:
            raise InvalidArgument(f"power factor must lie in (0, 1], got {self.pf}")


@dataclass(frozen=True)
class VoltVarCurve:
    """Symmetric Volt-VAR droop; the slope is derived so the three branches join."""

    v1: float = 0.95
    v_ref: float = 1.00
    v2: float = 1.05
    q_max: float = 4.4  # kVAR

    def __post_init__(self):
        if not self.v1 < self.v_ref < self.v2:
            raise InvalidArgument(f"need v1 < v_ref < v2, got {self.v1}, {self.v_ref}, {self.v2}")
        if not self.q_max > 0:
            raise InvalidArgument("q_max must be positive")
        if not math.isclose(self.v_ref - self.v1, self.v2 - self.v_ref, rel_tol=1e-9, abs_tol=1e-12):
            raise InvalidArgument("Volt-VAR breakpoints must be symmetric about v_ref for a continuous curve")

    @property
    def droop(self) -> float:
        return -self.q_max / (self.v2 - self.v_ref)

    @classmethod
    def for_rating(cls, s_rated: float, **kw) -> VoltVarCurve:
        kw.setdefault("q_max", 0.44 * s_rated)
        return cls(**kw)


@dataclass(frozen=True)
class VoltWattCurve:
    v_ref: float = 1.05
    v2: float = 1.10
    p_rated: float = 9.5  # kW

    def __post_init__(self):
        if not self.v_ref < self.v2:
            raise InvalidArgument(f"need v_ref < v2, got {self.v_ref}, {self.v2}")
        if not self.p_rated > 0:
            raise InvalidArgument("p_rated must be positive")

    @property
    def droop(self) -> float:
        return self.p_rated / (self.v2 - self.v_ref)


ControlMode = Union[ConstantPowerFactor, VoltVarCurve, VoltWattCurve]

MODE_NAMES = {ConstantPowerFactor: "cpf", VoltVarCurve: "volt_var", VoltWattCurve: "volt_watt"}


def mode_name(mode: ControlMode) -> str:
    return MODE_NAMES[type(mode)]


def pv_available_power(p_stc: float, irradiance_frac: float) -> float:
    if not 0.0 <= irradiance_frac <= 1.0:
        raise InvalidArgument(f"irradiance fraction must lie in [0, 1], got {irradiance_frac}")
    return irradiance_frac * p_stc


def cpf_setpoint(p_avail: float, pf: float, absorbs: bool = False) -> ComplexPower:
    if not 0 < pf <= 1:
        raise InvalidArgument(f"power factor must lie in (0, 1], got {pf}")
    q = p_avail * math.tan(math.acos(pf))
    return ComplexPower(p_avail, -q if absorbs else q)


def volt_var_q(curve: VoltVarCurve, v: float) -> float:
    if v <= curve.v1:
        return curve.q_max
    if v >= curve.v2:
        return -curve.q_max
    return curve.droop * (v - curve.v_ref)


def volt_watt_p(curve: VoltWattCurve, v: float, p_avail: float) -> float:
    if v <= curve.v_ref:
        p = curve.p_rated
    elif v >= curve.v2:
        p = 0.0
    else:
        p = curve.p_rated - curve.droop * (v - curve.v_ref)
    return min(p, p_avail)


def _toward(prev: float, target: float, budget: float) -> float:
    if abs(target - prev) <= budget:
        return target
    return prev + math.copysign(budget, target - prev)


def ramp_limit(prev: ComplexPower, target: ComplexPower, ramp: float, dt: float,
               s_rated: float) -> ComplexPower:
    """Move each axis toward ``target`` by at most ``ramp * s_rated * dt``."""
    if not dt > 0:
        raise InvalidArgument(f"dt must be positive, got {dt}")
    budget = ramp * s_rated * dt
    return ComplexPower(_toward(prev.p, target.p, budget), _toward(prev.q, target.q, budget))


def capability_clamp(sp: ComplexPower, s_rated: float, mode: ControlMode) -> ComplexPower:
    """Pull ``sp`` onto the apparent-power circle by trimming the non-priority axis.

    Volt-VAR keeps Q and trims P; the other modes keep P and trim |Q|.
    """
    if sp.p * sp.p + sp.q * sp.q <= s_rated * s_rated:
        return sp
    if isinstance(mode, VoltVarCurve):
        q = max(-s_rated, min(s_rated, sp.q))
        p = math.copysign(math.sqrt(max(s_rated * s_rated - q * q, 0.0)), sp.p)
        return ComplexPower(p, q)
    p = max(-s_rated, min(s_rated, sp.p))
    q = math.copysign(math.sqrt(max(s_rated * s_rated - p * p, 0.0)), sp.q)
    return ComplexPower(p, q)


@dataclass
class InverterUnit:
    s_rated: float = 10.0  # kVA
    p_stc: float = 9.5  # kW at full irradiance
    mode: ControlMode = field(default_factory=ConstantPowerFactor)
    ramp: float = 2.0  # per unit of s_rated per second
    filter_tau: float = 0.1  # s; 0 disables the measurement filter
    state: ComplexPower | None = None
    v_meas: float | None = None

    def __post_init__(self):
        if not self.s_rated > 0:
            raise InvalidArgument("s_rated must be positive")
        if not 0 < self.p_stc <= self.s_rated:
            raise InvalidArgument("need 0 < p_stc <= s_rated")
        if not self.ramp > 0:
            raise InvalidArgument("ramp limit must be positive")
        if self.filter_tau < 0:
            raise InvalidArgument("filter time constant must be non-negative")

    def target(self, v: float, irradiance_frac: float) -> ComplexPower:
        p_avail = pv_available_power(self.p_stc, irradiance_frac)
        mode = self.mode
        if isinstance(mode, ConstantPowerFactor):
            return cpf_setpoint(p_avail, mode.pf, mode.absorbs)
        if isinstance(mode, VoltVarCurve):
            return ComplexPower(p_avail, volt_var_q(mode, v))
        return ComplexPower(volt_watt_p(mode, v, p_avail), 0.0)

    def measure(self, v_pcc: float, dt: float) -> float:
        if self.v_meas is None or self.filter_tau == 0:
            self.v_meas = v_pcc
        else:
            self.v_meas += -math.expm1(-dt / self.filter_tau) * (v_pcc - self.v_meas)
        return self.v_meas

    def reset(self) -> None:
        self.state = None
        self.v_meas = None


def step_unit(unit: InverterUnit, v_pcc: float, irradiance_frac: float, dt: float) -> ComplexPower:
    """Advance one control period and return the new (p, q) command in kW / kVAR.

    A unit without stored state starts settled at its mode target.
    """
    if not v_pcc > 0:
        raise InvalidArgument(f"PCC voltage must be positive, got {v_pcc}")
    v = unit.measure(v_pcc, dt)
    target = unit.target(v, irradiance_frac)
    if unit.state is None:
        cmd = target
    else:
        cmd = ramp_limit(unit.state, target, unit.ramp, dt, unit.s_rated)
    cmd = capability_clamp(cmd, unit.s_rated, unit.mode)
    unit.state = cmd
    return cmd


@dataclass
class Aggregator:
    id: str
    bus: str
    units: list[InverterUnit]

    def __post_init__(self):
        if not self.units:
            raise InvalidArgument(f"aggregator {self.id} has no units")

    @property
    def s_rated(self) -> float:
        return sum(u.s_rated for u in self.units)


def aggregate_injection(agg: Aggregator, v_pcc: float, irradiance_frac: float, dt: float) -> ComplexPower:
    p = q = 0.0
    for unit in agg.units:
        cmd = step_unit(unit, v_pcc, irradiance_frac, dt)
        p += cmd.p
        q += cmd.q
    return ComplexPower(p, q)
