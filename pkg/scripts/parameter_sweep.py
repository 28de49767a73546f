"""Stationary solves over (u_b, rho_+, n): convergence, contraction ratio, r_*.

    python scripts/parameter_sweep.py [--out sweep.csv] [--N 2049]
"""
import argparse
import csv
import itertools
import warnings

from nsinflow.core import Parameters, RadialGrid
from nsinflow.stationary import (ClassificationError, StationaryNonConvergence, classify_density_profile,
                                 solve_stationary)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="sweep.csv")
    ap.add_argument("--N", type=int, default=2049)
    args = ap.parse_args()
    grid = RadialGrid(N=args.N, spacing="geometric")
    rows = []
    for n, rho_plus, u_b in itertools.product((2, 3), (0.5, 1.0, 2.0), (0.4, 0.2, 0.1, 0.05, 0.025)):
        P = Parameters(n=n, rho_plus=rho_plus, rho_b=rho_plus + u_b**2, u_b=u_b)
        row = {"n": n, "rho_plus": rho_plus, "u_b": u_b}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                prof, rep = solve_stationary(P, grid, max_iter=100)
            except StationaryNonConvergence as exc:
                rows.append(row | {"converged": False, "note": str(exc)})
                continue
        try:
            kind = classify_density_profile(prof).kind
        except ClassificationError as exc:
            kind = f"unclassified ({exc})"
        rows.append(row | {"converged": True, "iterations": rep.iterations,
                           "contraction_ratio": f"{rep.contraction_ratio:.3e}", "in_ball": rep.in_ball,
                           "class": kind})
        print(rows[-1])
    keys = ["n", "rho_plus", "u_b", "converged", "iterations", "contraction_ratio", "in_ball", "class", "note"]
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, keys, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


if __name__ == "__main__":
    main()
