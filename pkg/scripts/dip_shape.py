"""rho_MG and rho_MLP against lambda at fixed w_max = d_max = 20 (the dip in MLP's ratio).

    python scripts/dip_shape.py --reps 30 --out out/dip.csv
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from pktsched.harness import BatchConfig, ParamSpace, run_protocol


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--lams", default="0.5,0.7,1,1.5,2,2.5,3,4,6,8,12,16,20")
    ap.add_argument("--reps", type=int, default=30)
    ap.add_argument("--T", type=int, default=200)
    ap.add_argument("--seed", type=int, default=6)
    ap.add_argument("--out", type=Path, default=Path("out/dip.csv"))
    args = ap.parse_args()

    rows = []
    for lam in (float(x) for x in args.lams.split(",")):
        batch = BatchConfig(space=ParamSpace(T=(args.T, args.T), lam=(lam, lam), w_max=(20, 20), d_max=(20, 20)),
                            combinations=1, reps=args.reps, fresh_instance_reps=True, master_seed=args.seed)
        rec = run_protocol(batch)[0]
        rows.append((lam, rec.nbar, rec.rho["mg"], rec.rho["mlp"], rec.rho_sd["mlp"] / np.sqrt(args.reps)))
        print(f"lambda={lam:<5g} nbar={rec.nbar:7.2f} rho_mg={rec.rho['mg']:.4f} "
              f"rho_mlp={rec.rho['mlp']:.4f} (se {rows[-1][-1]:.4f})")

    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "nbar", "rho_mg", "rho_mlp", "se_mlp"])
        w.writerows([f"{x:.6g}" for x in row] for row in rows)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
