"""``invergrid`` command line: single runs and the six-run experiment matrix."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, parse_config
from .inverter import mode_name
from .powerflow import TopologyError
from .report import emit_csv, emit_summary
from .scenario import (A2_MODE_KINDS, ScenarioSpec, ScenarioTimeline, Variant, default_mode, run,
                       run_matrix)

log = logging.getLogger("invergrid")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3
MODE_KINDS = dict(zip(("cpf", "volt_var", "volt_watt"), A2_MODE_KINDS))


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="invergrid", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one scenario and write its CSV")
    r.add_argument("--config", type=Path, required=True)
    r.add_argument("--variant", choices=[v.value for v in Variant])
    r.add_argument("--a2-mode", choices=list(MODE_KINDS))
    r.add_argument("--dt", type=float)
    r.add_argument("--out", type=Path, required=True)

    m = sub.add_parser("matrix", help="run resistive/inductive x three A2 modes plus a summary")
    m.add_argument("--config", type=Path, required=True)
    m.add_argument("--dt", type=float)
    m.add_argument("--out", type=Path, required=True)
    return p


def _apply_overrides(spec: ScenarioSpec, args) -> ScenarioSpec:
    if getattr(args, "variant", None):
        spec = replace(spec, variant=Variant(args.variant))
    if getattr(args, "a2_mode", None):
        kind = MODE_KINDS[args.a2_mode]
        if not isinstance(spec.a2.mode, kind):
            spec = replace(spec, a2=replace(spec.a2, mode=default_mode(kind, spec.a2.s_rated,
                                                                       spec.a2.p_stc)))
    if args.dt is not None:
        if not args.dt > 0:
            raise ConfigError("--dt must be positive", key="--dt")
        tl = spec.timeline
        try:
            spec = replace(spec, timeline=ScenarioTimeline(tl.events, tl.duration, args.dt))
        except ValueError as exc:
            raise ConfigError(str(exc), key="--dt") from None
    return spec


def run_name(variant: str, a2_mode: str) -> str:
    return f"{variant}_a2-{a2_mode}.csv"


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(message)s")
    try:
        spec = _apply_overrides(parse_config(args.config.read_text()), args)
    except OSError as exc:
        print(f"invergrid: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"invergrid: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    args.out.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "run":
            records = run(spec)
            path = args.out / run_name(spec.variant.value, mode_name(spec.a2_mode))
            path.write_text(emit_csv(records))
            _warn_unconverged(path.name, records)
            log.info("wrote %s", path)
        else:
            results = run_matrix(spec)
            for (variant, mode), records in results.items():
                path = args.out / run_name(variant, mode)
                path.write_text(emit_csv(records))
                _warn_unconverged(path.name, records)
            summary = emit_summary(results)
            (args.out / "summary.txt").write_text(summary)
            print(summary, end="")
    except TopologyError as exc:
        print(f"invergrid: solver abort: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _warn_unconverged(name: str, records) -> None:
    bad = sum(not r.converged for r in records)
    if bad:
        log.warning("%s: %d of %d steps did not converge", name, bad, len(records))


if __name__ == "__main__":
    sys.exit(main())
