"""Run the three convergence studies and print EOC tables.

    python3 scripts/run_studies.py --levels 4 --out results
"""

import argparse

from parafembem import cli
from parafembem.cli import ExperimentConfig


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--scheme", default="euler", choices=["euler", "cn"])
    p.add_argument("--out", default="results")
    p.add_argument("--experiments", nargs="+", default=["smooth", "corner", "time_singular"])
    args = p.parse_args()
    for exp in args.experiments:
        cfg = ExperimentConfig(exp, levels=args.levels, scheme=args.scheme, out=args.out)
        rep = cli.run_experiment(cfg)
        print(f"== {exp} ({args.scheme}), EOC against h")
        print(cli.slope_summary(rep))
        print(f"   errorH1dual against 1/tau: {rep.eoc('errorH1dual', 'numberTimeintervals').round(3)}")


if __name__ == "__main__":
    main()
