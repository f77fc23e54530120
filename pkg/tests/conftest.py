"""Shared fixtures: one instrumented pass over the six-run experiment matrix."""

from __future__ import annotations

from dataclasses import dataclass, field

import pytest

from invergrid.inverter import mode_name
from invergrid.scenario import ScenarioSpec, TimeSeriesRecord, experiment_matrix, run


@dataclass
class Trace:
    spec: ScenarioSpec
    records: list[TimeSeriesRecord] = field(default_factory=list)
    # per step: (slack injection, bus voltage phasors) of the solved network
    solutions: list[tuple[complex, dict[str, complex]]] = field(default_factory=list)
    # per step: (agg id, unit index) -> (p, q) command in kW / kVAR
    commands: list[dict[tuple[str, int], tuple[float, float]]] = field(default_factory=list)
    # ramp parameters per unit: (ramp, s_rated)
    ratings: dict[tuple[str, int], tuple[float, float]] = field(default_factory=dict)


def traced_run(spec: ScenarioSpec) -> Trace:
    trace = Trace(spec)

    def observe(k, rec, sol, aggs):
        trace.solutions.append((sol.slack_injection.s, {b: v.phasor for b, v in sol.voltages.items()}))
        trace.commands.append({(a.id, i): (u.state.p, u.state.q)
                               for a in aggs for i, u in enumerate(a.units)})
        if k == 0:
            trace.ratings.update({(a.id, i): (u.ramp, u.s_rated)
                                  for a in aggs for i, u in enumerate(a.units)})

    trace.records = run(spec, observer=observe)
    return trace


@pytest.fixture(scope="session")
def matrix() -> dict[tuple[str, str], Trace]:
    return {(s.variant.value, mode_name(s.a2_mode)): traced_run(s) for s in experiment_matrix(ScenarioSpec())}


@pytest.fixture(scope="session")
def matrix_records(matrix):
    return {k: t.records for k, t in matrix.items()}


# -- acceptance reporting

_outcomes: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None or report.when == "teardown":
        return
    n, title = marker
    if report.failed or (report.when == "call" and n not in _outcomes):
        _outcomes[n] = (title, "FAIL" if report.failed else "PASS")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    m = item.get_closest_marker("criterion")
    if m is not None:
        outcome.get_result().criterion = tuple(m.args)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        title, verdict = _outcomes[n]
        terminalreporter.write_line(f"{verdict}  C{n:<2} {title}")
