"""CSV and text-report emission for simulation records."""

from __future__ import annotations

import csv
import io
from typing import Mapping, Sequence

from .network import InvalidArgument
from .scenario import AggregatorReading, TimeSeriesRecord, Variant, summarize_window

COLUMNS = ("time_s", "slack_v_pu", "irradiance_frac", "a1_p_kw", "a1_q_kvar", "a1_pf", "a1_v_pu",
           "a2_p_kw", "a2_q_kvar", "a2_pf", "a2_v_pu", "solver_iters", "converged")

MODES = ("cpf", "volt_var", "volt_watt")
SLACK_STEP_WINDOW = (13.5, 16.5)


def fmt(x: float) -> str:
    """Shortest rendering of ``x`` with at most 9 significant digits."""
    return format(x, ".9g")


def csv_row(rec: TimeSeriesRecord) -> list[str]:
    row = [fmt(rec.time), fmt(rec.slack_v), fmt(rec.irradiance)]
    for agg_id in ("A1", "A2"):
        r = rec.aggregators[agg_id]
        row += [fmt(r.p), fmt(r.q), fmt(r.pf), fmt(r.v)]
    row += [str(rec.solver_iterations), "true" if rec.converged else "false"]
    return row


def emit_csv(records: Sequence[TimeSeriesRecord]) -> str:
    if not records:
        raise InvalidArgument("no records to emit")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for rec in records:
        w.writerow(csv_row(rec))
    return buf.getvalue()


def parse_csv(text: str) -> list[TimeSeriesRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != COLUMNS:
        raise InvalidArgument("unexpected CSV header")
    out = []
    for row in rows[1:]:
        x = [float(v) for v in row[:11]]
        out.append(TimeSeriesRecord(
            time=x[0], slack_v=x[1], irradiance=x[2],
            aggregators={"A1": AggregatorReading(*x[3:7]), "A2": AggregatorReading(*x[7:11])},
            solver_iterations=int(row[11]), converged=row[12] == "true",
        ))
    return out


def mode_ordering(values: Mapping[str, float]) -> str:
    """'a > b = c' from highest to lowest; equal at report precision counts as a tie."""
    keyed = sorted(values, key=lambda m: (-float(fmt(values[m])), MODES.index(m) if m in MODES else 0))
    parts = [keyed[0]]
    for prev, cur in zip(keyed, keyed[1:]):
        parts.append("=" if fmt(values[prev]) == fmt(values[cur]) else ">")
        parts.append(cur)
    return " ".join(parts)


def emit_summary(results: Mapping[tuple[str, str], Sequence[TimeSeriesRecord]]) -> str:
    """Slack-step window statistics per variant and the A2-voltage mode ordering.

    ``results`` maps (variant, a2 mode name) to a run's records and must hold
    all six combinations.
    """
    keys = {(Variant(v).value, m) for v, m in results}
    missing = [(v.value, m) for v in Variant for m in MODES if (v.value, m) not in keys]
    if missing:
        raise InvalidArgument(f"incomplete matrix, missing {missing}")
    t0, t1 = SLACK_STEP_WINDOW
    end = max(r.time for recs in results.values() for r in recs)
    if end < t0:
        # run ends before the slack-voltage event: summarize everything
        t0, t1 = 0.0, end + 1.0
        lines = [f"whole run [0, {fmt(end)}] s (ends before {SLACK_STEP_WINDOW[0]} s), A1 in cpf"]
    else:
        lines = [f"slack-step window [{t0}, {t1}) s, A1 in cpf"]
    header = ("a2_mode", "a1_p_mean", "a1_q_mean", "a1_v_mean", "a1_v_max",
              "a2_p_mean", "a2_q_mean", "a2_pf_mean", "a2_v_mean", "a2_v_min", "a2_v_max")
    for variant in Variant:
        lines += ["", f"[{variant.value}]", "  ".join(f"{h:>10}" for h in header)]
        max_v = {}
        for mode in MODES:
            s = summarize_window(results[(variant.value, mode)], t0, t1)
            a1, a2 = s["A1"], s["A2"]
            max_v[mode] = a2.v.max
            cells = (mode, a1.p.mean, a1.q.mean, a1.v.mean, a1.v.max,
                     a2.p.mean, a2.q.mean, a2.pf.mean, a2.v.mean, a2.v.min, a2.v.max)
            lines.append("  ".join(f"{c:>10}" if isinstance(c, str) else f"{fmt(c):>10}" for c in cells))
        lines.append(f"ordering (max a2_v, high to low): {mode_ordering(max_v)}")
    return "\n".join(lines) + "\n"
