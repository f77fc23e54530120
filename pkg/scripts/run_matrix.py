"""Run the six-scenario matrix and print the window summary plus wall time.

    python scripts/run_matrix.py [--dt 0.01] [--out runs/]
"""

import argparse
import time
from pathlib import Path

from invergrid.cli import run_name
from invergrid.report import emit_csv, emit_summary
from invergrid.scenario import ScenarioSpec, default_timeline, run_matrix


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dt", type=float, default=0.01)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()

    t0 = time.perf_counter()
    results = run_matrix(ScenarioSpec(timeline=default_timeline(args.dt)))
    elapsed = time.perf_counter() - t0
    print(emit_summary(results), end="")
    print(f"\n6 runs x {len(next(iter(results.values())))} steps in {elapsed:.2f} s")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        for (variant, mode), recs in results.items():
            (args.out / run_name(variant, mode)).write_text(emit_csv(recs))


if __name__ == "__main__":
    main()
