"""Desk-scale versions of the three batch scenarios, with rho / rho_hat summaries by load.

    python scripts/compare_scenarios.py --combos 50 --reps 20 --jobs 1
"""
import argparse
from pathlib import Path

import numpy as np

from pktsched.harness import emit_csv, run_protocol, scenario_presets, summarize

NBAR_BINS = [0, 2, 5, 10, 20, 50, 100, np.inf]


def by_load(records, key):
    nbar = np.array([r.nbar for r in records])
    vals = np.array([r.rho[key] for r in records])
    out = []
    for lo, hi in zip(NBAR_BINS, NBAR_BINS[1:]):
        m = (nbar >= lo) & (nbar < hi)
        if m.any():
            out.append(f"[{lo:g},{hi:g}):{vals[m].mean():.4f}(n={m.sum()})")
    return " ".join(out)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--scenarios", default="S1,S2,S3")
    ap.add_argument("--combos", type=int, default=50)
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--fresh-reps", action="store_true")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("out"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    for name in args.scenarios.split(","):
        batch = scenario_presets(name, combinations=args.combos, reps=args.reps, master_seed=args.seed,
                                 fresh_instance_reps=args.fresh_reps)
        records = run_protocol(batch, jobs=args.jobs)
        emit_csv(records, args.out / f"scenario_{name.lower()}.csv")
        print(f"== {name} ({batch.scenario}, {len(records)} combinations)")
        for key, (mean, sd) in summarize(records).items():
            print(f"  {key:8s} mean={mean:.4f} sd={sd:.4f}")
        for key in ("mg", "mlp"):
            print(f"  rho_{key} by nbar: {by_load(records, key)}")


if __name__ == "__main__":
    main()
