"""Train step-1 schedules for the reserved states shown in the schedule figure."""

import argparse
import sys

from mbcool.cli import main

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-r", type=int, nargs="+", default=[6, 8, 10, 12])
    ap.add_argument("--updates", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rc = 0
    for n_r in args.n_r:
        rc |= main(
            ["train", "--n-r", str(n_r), "--updates", str(args.updates), "--seed", str(args.seed),
             "--out", f"runs/train_nr{n_r:02d}"]
        )
    sys.exit(rc)
