"""Compare one-second windowed means of the matrix at dt and dt/2.

Relative change is |a - b| / max(|a|, |b|, scale), with scale the aggregator
rating (kVA) for p and q and 1 for v and pf.
"""

import argparse

import numpy as np

from invergrid.scenario import ScenarioSpec, default_timeline, run_matrix, summarize_window

FIELDS = ("p", "q", "v", "pf")


def windowed(records, duration):
    rows = []
    for k in range(int(duration)):
        s = summarize_window(records, float(k), float(k + 1))
        rows.append([getattr(s[a], f).mean for a in ("A1", "A2") for f in FIELDS])
    return np.array(rows)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dt", type=float, default=0.01)
    args = ap.parse_args()

    base = ScenarioSpec()
    coarse = run_matrix(ScenarioSpec(timeline=default_timeline(args.dt)))
    fine = run_matrix(ScenarioSpec(timeline=default_timeline(args.dt / 2)))
    scale = np.array([a.s_rated * a.units if f in ("p", "q") else 1.0
                      for a in (base.a1, base.a2) for f in FIELDS])
    labels = [f"{a}_{f}" for a in ("a1", "a2") for f in FIELDS]
    for key in coarse:
        a = windowed(coarse[key], base.timeline.duration)
        b = windowed(fine[key], base.timeline.duration)
        rel = np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), scale)
        raw = np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-12)
        k, j = np.unravel_index(np.argmax(rel), rel.shape)
        print(f"{key[0]:>9} {key[1]:>9}  worst {rel.max():.4%} ({labels[j]}, window {k})"
              f"  unscaled {raw.max():.4%}")


if __name__ == "__main__":
    main()
