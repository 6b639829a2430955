"""Capacitor demo: write the six snapshot files and report the antisymmetry defect.

    python3 scripts/run_capacitor.py --levels 5 --out results/capacitor
"""

import argparse

from parafembem import cli
from parafembem.cli import ExperimentConfig


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--levels", type=int, default=5)
    p.add_argument("--out", default="results/capacitor")
    p.add_argument("--grid", default="-3,3,-3,3,25,25")
    args = p.parse_args()
    res = cli.run_capacitor(ExperimentConfig("capacitor", levels=args.levels, out=args.out,
                                             grid=args.grid))
    print(f"{res.n_steps} steps, antisymmetry defect {res.antisymmetry:.2e}, "
          f"{res.skipped_points} grid points inside the domain skipped")
    for f in res.files:
        print(f)


if __name__ == "__main__":
    main()
