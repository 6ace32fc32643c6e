"""MM, LMG and SMMG against MG on the shared modification space.

    python scripts/modifications.py --combos 200
"""
import argparse
import statistics

import numpy as np

from pktsched.harness import run_protocol, scenario_presets
from pktsched.policies import PolicySpec

NBAR_BINS = [0, 4, 8, 12, 17, 30, 60, np.inf]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--combos", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--thresholds", default="5,10,20")
    ap.add_argument("--ps", default="0.65,0.75,0.85,0.95")
    args = ap.parse_args()

    policies = [PolicySpec("MG"), PolicySpec("MLP"), PolicySpec("LMG")]
    policies += [PolicySpec("MM", threshold=float(n), name=f"mm{n}") for n in args.thresholds.split(",")]
    policies += [PolicySpec("SMMG", p=float(p), name=f"smmg{p}") for p in args.ps.split(",")]
    batch = scenario_presets("MOD", combinations=args.combos, reps=1, master_seed=args.seed,
                             policies=tuple(policies))
    records = run_protocol(batch, jobs=args.jobs)

    change = [(r.zeta["lmg"] - r.zeta["mg"]) / r.zeta["mg"] for r in records if r.zeta["mg"] > 0]
    print(f"LMG >= MG in {np.mean([c >= 0 for c in change]):.1%} of {len(change)} scenarios; "
          f"change mean {statistics.fmean(change):+.2%}, range {min(change):+.2%}..{max(change):+.2%}")

    nbar = np.array([r.nbar for r in records])
    labels = [p.label for p in policies if p.label != "mg"]
    print("mean rho_A - rho_MG by nbar bin")
    print(f"{'bin':>12s} " + " ".join(f"{lab:>10s}" for lab in labels))
    for lo, hi in zip(NBAR_BINS, NBAR_BINS[1:]):
        m = (nbar >= lo) & (nbar < hi)
        if not m.any():
            continue
        sel = [r for r, keep in zip(records, m) if keep]
        diffs = [statistics.fmean(r.rho[lab] - r.rho["mg"] for r in sel) for lab in labels]
        print(f"{f'[{lo:g},{hi:g})':>12s} " + " ".join(f"{d:+10.4f}" for d in diffs) + f"  n={m.sum()}")


if __name__ == "__main__":
    main()
