"""Buffer size needed so occupancy exceeds it with probability at most `target`, under MG.

    python scripts/buffer_sizing.py --run-length 10000000
    python scripts/buffer_sizing.py --dmax 0        # packets that must go out on arrival
"""
import argparse

from pktsched.extensions import buffer_size_study


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--lams", default="2,5,10,20,50,100")
    ap.add_argument("--target", type=float, default=1e-6)
    ap.add_argument("--run-length", type=int, default=10_000_000)
    ap.add_argument("--wmax", type=int, default=20)
    ap.add_argument("--dmax", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"{'lambda':>7s} {'b':>6s} {'b/lam':>7s} {'mean occ':>9s}")
    for lam in (float(x) for x in args.lams.split(",")):
        r = buffer_size_study(lam, args.target, args.wmax, args.dmax, args.run_length, args.seed)
        print(f"{lam:7g} {r.b:6d} {r.ratio:7.3f} {r.mean_occupancy:9.2f}")


if __name__ == "__main__":
    main()
