"""Plain-text scenario configuration.

Line-oriented ``key = value`` pairs grouped under ``[network]``, ``[a1]``,
``[a2]`` and ``[timeline]`` headers; ``section.key = value`` works anywhere.
``#`` starts a comment. Row-valued keys (``line``, ``load``, ``bus``,
``event``) may repeat::

    [network]
    variant = inductive
    line = R1, R2, UG1, 35          # from, to, cable, length_m
    line = R2, R3, Custom, 20, 0.5, 0.3   # ... r_ohm_per_km, l_mh_per_km
    load = R3, 10, 2                # bus, kW, kVAR

    [a2]
    mode = volt_var
    v1 = 0.94
    v_ref = 1.0
    v2 = 1.06

    [timeline]
    dt = 0.01
    event = t=5 irradiance=0.5
    event = t=13 slack_v=1.2
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, InvalidOperation

from .inverter import ConstantPowerFactor, VoltVarCurve, VoltWattCurve, mode_name
from .network import CIGRE_LV_LOADS, CableType, InvalidArgument, LineSegment
from .scenario import (AggregatorSpec, Event, ScenarioSpec, ScenarioTimeline, SetIrradiance,
                       SetSlackVoltage, Topology, Variant, default_timeline)

SECTIONS = ("network", "a1", "a2", "timeline")
REPEATED = {("network", "line"), ("network", "load"), ("network", "bus"), ("timeline", "event")}
AGG_KEYS = ("bus", "units", "s_rated_kva", "p_stc_kw", "mode", "v1", "v2", "v_ref", "q_max_kvar",
            "p_rated_kw", "ramp_pu_per_s", "filter_tau_s", "cpf_pf", "cpf_absorbs")
KEYS = {
    "network": ("variant", "slack_bus", "line", "load", "bus"),
    "a1": AGG_KEYS,
    "a2": AGG_KEYS,
    "timeline": ("dt", "duration", "event"),
}
MODE_KEYS = {
    "cpf": {"cpf_pf", "cpf_absorbs"},
    "volt_var": {"v1", "v2", "v_ref", "q_max_kvar"},
    "volt_watt": {"v2", "v_ref", "p_rated_kw"},
}
DEFAULT_BUS = {"a1": "R17", "a2": "R18"}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(key)
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.key = key


@dataclass
class _Entry:
    value: str
    line: int
    key: str  # qualified, for messages


def _number(e: _Entry) -> float:
    try:
        return float(e.value)
    except ValueError:
        raise ConfigError(f"malformed number {e.value!r}", e.line, e.key) from None


def _integer(e: _Entry) -> int:
    try:
        return int(e.value)
    except ValueError:
        raise ConfigError(f"malformed integer {e.value!r}", e.line, e.key) from None


def _boolean(e: _Entry) -> bool:
    v = e.value.lower()
    if v in ("true", "yes", "1"):
        return True
    if v in ("false", "no", "0"):
        return False
    raise ConfigError(f"malformed boolean {e.value!r}", e.line, e.key)


def _fields(e: _Entry, n_min: int, n_max: int) -> list[str]:
    parts = [p for p in e.value.replace(",", " ").split()]
    if not n_min <= len(parts) <= n_max:
        raise ConfigError(f"expected {n_min}-{n_max} fields, got {len(parts)}", e.line, e.key)
    return parts


def _lex(text: str) -> dict[str, dict[str, list[_Entry]]]:
    raw: dict[str, dict[str, list[_Entry]]] = {s: {} for s in SECTIONS}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or line[1:-1].strip() not in SECTIONS:
                raise ConfigError(f"unknown section {line}", lineno)
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if "." in key:
            sec, key = key.split(".", 1)
        else:
            sec = section
        if sec not in SECTIONS:
            raise ConfigError("key outside any known section", lineno, key)
        qualified = f"{sec}.{key}"
        if key not in KEYS[sec]:
            raise ConfigError("unknown key", lineno, qualified)
        entries = raw[sec].setdefault(key, [])
        if entries and (sec, key) not in REPEATED:
            raise ConfigError("duplicate key", lineno, qualified)
        entries.append(_Entry(value, lineno, qualified))
    return raw


def _one(raw: dict[str, list[_Entry]], key: str) -> _Entry | None:
    entries = raw.get(key)
    return entries[0] if entries else None


def _parse_aggregator(name: str, raw: dict[str, list[_Entry]]) -> AggregatorSpec:
    get = lambda k: _one(raw, k)  # noqa: E731
    mode_e = get("mode")
    mode = mode_e.value if mode_e else "cpf"
    if mode not in MODE_KEYS:
        raise ConfigError(f"unknown mode {mode!r}", mode_e.line, mode_e.key)
    for key in ("v1", "v2", "v_ref", "q_max_kvar", "p_rated_kw", "cpf_pf", "cpf_absorbs"):
        e = get(key)
        if e is not None and key not in MODE_KEYS[mode]:
            raise ConfigError(f"not applicable to mode {mode}", e.line, e.key)

    kw = {}
    for key, attr, conv in (("units", "units", _integer), ("s_rated_kva", "s_rated", _number),
                            ("p_stc_kw", "p_stc", _number), ("ramp_pu_per_s", "ramp", _number),
                            ("filter_tau_s", "filter_tau", _number)):
        e = get(key)
        if e is not None:
            kw[attr] = conv(e)
    bus_e = get("bus")
    bus = bus_e.value if bus_e else DEFAULT_BUS[name]
    s_rated = kw.get("s_rated", 10.0)
    p_stc = kw.get("p_stc", 9.5)

    def num(key):
        e = get(key)
        return None if e is None else _number(e)

    # invariant violations are reported against the first mode key present
    anchor = next((e for e in (get(k) for k in sorted(MODE_KEYS[mode])) if e), mode_e)
    try:
        if mode == "cpf":
            absorbs_e = get("cpf_absorbs")
            pf = num("cpf_pf")
            mode_obj = ConstantPowerFactor(0.95 if pf is None else pf,
                                           _boolean(absorbs_e) if absorbs_e else False)
        elif mode == "volt_var":
            opts = {k: v for k, v in (("v1", num("v1")), ("v_ref", num("v_ref")),
                                      ("v2", num("v2")), ("q_max", num("q_max_kvar"))) if v is not None}
            mode_obj = VoltVarCurve.for_rating(s_rated, **opts)
        else:
            p_rated = num("p_rated_kw")
            opts = {k: v for k, v in (("v_ref", num("v_ref")), ("v2", num("v2"))) if v is not None}
            mode_obj = VoltWattCurve(p_rated=p_stc if p_rated is None else p_rated, **opts)
    except InvalidArgument as exc:
        line = anchor.line if anchor else None
        key = anchor.key if anchor else f"{name}.mode"
        raise ConfigError(str(exc), line, key) from None
    try:
        return AggregatorSpec(bus=bus, mode=mode_obj, **kw)
    except InvalidArgument as exc:
        unit_keys = ("units", "s_rated_kva", "p_stc_kw", "ramp_pu_per_s", "filter_tau_s")
        e = next((get(k) for k in unit_keys if get(k)), None)
        raise ConfigError(str(exc), e.line if e else None, e.key if e else name) from None


def _parse_event(e: _Entry) -> Event:
    t = action = None
    for token in e.value.split():
        if "=" not in token:
            raise ConfigError(f"malformed event field {token!r}", e.line, e.key)
        k, v = token.split("=", 1)
        try:
            x = float(v)
        except ValueError:
            raise ConfigError(f"malformed number {v!r}", e.line, e.key) from None
        if k == "t":
            t = x
        elif k == "irradiance":
            action = SetIrradiance(x)
        elif k == "slack_v":
            action = SetSlackVoltage(x)
        else:
            raise ConfigError(f"unknown event field {k!r}", e.line, e.key)
    if t is None or action is None:
        raise ConfigError("event needs t= and one of irradiance= / slack_v=", e.line, e.key)
    return Event(t, action)


def _parse_timeline(raw: dict[str, list[_Entry]]) -> ScenarioTimeline:
    base = default_timeline()
    dt_e, dur_e = _one(raw, "dt"), _one(raw, "duration")
    dt = _number(dt_e) if dt_e else base.dt
    duration = _number(dur_e) if dur_e else base.duration
    if not dt > 0:
        raise ConfigError("dt must be positive", dt_e.line, dt_e.key)
    if duration < 0:
        raise ConfigError("duration must be non-negative", dur_e.line, dur_e.key)
    if dt > duration > 0:
        e = dt_e or dur_e
        raise ConfigError("dt must not exceed duration", e.line, e.key)
    # default events past a shortened duration are dropped
    events = tuple(ev for ev in base.events if ev.time <= duration)
    if [e.value for e in raw.get("event", [])] == ["none"]:
        events = ()
    elif raw.get("event"):
        try:
            evs = [_parse_event(e) for e in raw["event"]]
        except InvalidArgument as exc:
            raise ConfigError(str(exc), raw["event"][0].line, "timeline.event") from None
        events = tuple(sorted(evs, key=lambda ev: ev.time))
        late = [e for e, ev in zip(raw["event"], evs) if ev.time > duration]
        if late:
            raise ConfigError("event after the end of the timeline", late[0].line, late[0].key)
    return ScenarioTimeline(events, duration, dt)


def _metres_to_km(e: _Entry) -> float:
    # decimal scaling keeps metre strings and km floats in exact round trip
    try:
        return float(Decimal(e.value).scaleb(-3))
    except InvalidOperation:
        raise ConfigError(f"malformed number {e.value!r}", e.line, e.key) from None


def _km_to_metres(km: float) -> str:
    return format(Decimal(repr(km)).scaleb(3).normalize(), "f")


def _parse_topology(raw: dict[str, list[_Entry]]) -> Topology | None:
    lines_e, loads_e, buses_e = raw.get("line", []), raw.get("load", []), raw.get("bus", [])
    slack_e = _one(raw, "slack_bus")
    if not (lines_e or loads_e or buses_e or slack_e):
        return None
    if not lines_e:
        e = (loads_e or buses_e or [slack_e])[0]
        raise ConfigError("topology override needs line rows", e.line, e.key)
    lines = []
    for e in lines_e:
        parts = _fields(e, 4, 6)
        try:
            cable = CableType(parts[2])
        except ValueError:
            raise ConfigError(f"unknown cable {parts[2]!r}", e.line, e.key) from None
        length_km = _metres_to_km(_Entry(parts[3], e.line, e.key))
        if cable is CableType.CUSTOM:
            if len(parts) != 6:
                raise ConfigError("Custom cable needs r_ohm_per_km and l_mh_per_km", e.line, e.key)
            r, l = (_number(_Entry(p, e.line, e.key)) for p in parts[4:])
            lines.append(LineSegment(parts[0], parts[1], r, l, length_km, cable))
        else:
            if len(parts) != 4:
                raise ConfigError("standard cables take exactly 4 fields", e.line, e.key)
            lines.append(LineSegment.of_cable(parts[0], parts[1], cable, length_km))
    loads = CIGRE_LV_LOADS
    if loads_e:
        loads = tuple((p[0], _number(_Entry(p[1], e.line, e.key)), _number(_Entry(p[2], e.line, e.key)))
                      for e in loads_e for p in [_fields(e, 3, 3)])
    buses = tuple(_fields(e, 1, 1)[0] for e in buses_e) or None
    return Topology(tuple(lines), loads, buses, slack_e.value if slack_e else "R1")


def parse_config(text: str) -> ScenarioSpec:
    """Parse configuration text; omitted keys take the default scenario values."""
    raw = _lex(text)
    variant_e = _one(raw["network"], "variant")
    variant = Variant.RESISTIVE
    if variant_e is not None:
        try:
            variant = Variant(variant_e.value)
        except ValueError:
            raise ConfigError(f"unknown variant {variant_e.value!r}", variant_e.line,
                              variant_e.key) from None
    spec = ScenarioSpec(
        variant=variant,
        a1=_parse_aggregator("a1", raw["a1"]),
        a2=_parse_aggregator("a2", raw["a2"]),
        timeline=_parse_timeline(raw["timeline"]),
        topology=_parse_topology(raw["network"]),
    )
    _check_buses(spec, raw)
    return spec


def _check_buses(spec: ScenarioSpec, raw) -> None:
    net = spec.network()
    known = set(net.bus_ids)
    for name in ("a1", "a2"):
        agg = getattr(spec, name)
        if agg.bus not in known:
            e = _one(raw[name], "bus")
            raise ConfigError(f"unknown bus {agg.bus!r}", e.line if e else None, f"{name}.bus")


def serialize_config(spec: ScenarioSpec) -> str:
    """Inverse of :func:`parse_config`; every value is written explicitly."""
    out = ["[network]", f"variant = {spec.variant.value}"]
    if spec.topology is not None:
        t = spec.topology
        out.append(f"slack_bus = {t.slack_bus}")
        for b in t.buses or ():
            out.append(f"bus = {b}")
        for seg in t.lines:
            row = f"line = {seg.from_bus}, {seg.to_bus}, {seg.cable_type.value}, {_km_to_metres(seg.length)}"
            if seg.cable_type is CableType.CUSTOM:
                row += f", {seg.resistance_per_km!r}, {seg.inductance_per_km!r}"
            out.append(row)
        for bus, p, q in t.loads:
            out.append(f"load = {bus}, {p!r}, {q!r}")
    for name in ("a1", "a2"):
        a: AggregatorSpec = getattr(spec, name)
        m = a.mode
        out += ["", f"[{name}]", f"bus = {a.bus}", f"units = {a.units}", f"s_rated_kva = {a.s_rated!r}",
                f"p_stc_kw = {a.p_stc!r}", f"ramp_pu_per_s = {a.ramp!r}",
                f"filter_tau_s = {a.filter_tau!r}", f"mode = {mode_name(m)}"]
        if isinstance(m, ConstantPowerFactor):
            out += [f"cpf_pf = {m.pf!r}", f"cpf_absorbs = {str(m.absorbs).lower()}"]
        elif isinstance(m, VoltVarCurve):
            out += [f"v1 = {m.v1!r}", f"v_ref = {m.v_ref!r}", f"v2 = {m.v2!r}",
                    f"q_max_kvar = {m.q_max!r}"]
        else:
            out += [f"v_ref = {m.v_ref!r}", f"v2 = {m.v2!r}", f"p_rated_kw = {m.p_rated!r}"]
    tl = spec.timeline
    out += ["", "[timeline]", f"dt = {tl.dt!r}", f"duration = {tl.duration!r}"]
    if not tl.events:
        out.append("event = none")
    for ev in tl.events:
        if isinstance(ev.action, SetIrradiance):
            out.append(f"event = t={ev.time!r} irradiance={ev.action.frac!r}")
        else:
            out.append(f"event = t={ev.time!r} slack_v={ev.action.pu!r}")
    return "\n".join(out) + "\n"
