"""Grid refinement of the zero-perturbation gap and of the boundary identity.

The zero-perturbation gap after t_end measures how far the discrete stationary
profile is from a fixed point of the time stepper.
"""
import argparse

import numpy as np

from nsinflow.core import Parameters, RadialGrid
from nsinflow.evolution import Perturbation, SchemeConfig, build_initial_data, run
from nsinflow.lagrangian import boundary_identity_residual
from nsinflow.stationary import solve_stationary


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--t-end", type=float, default=10.0)
    ap.add_argument("--sizes", type=int, nargs="+", default=[1025, 2049, 4097, 8193])
    args = ap.parse_args()
    P = Parameters()
    prev = None
    print(f"{'N':>6} {'gap':>11} {'ratio':>6} {'bd_identity':>12} {'argmax r':>9}")
    for N in args.sizes:
        prof, _ = solve_stationary(P, RadialGrid(N=N, spacing="geometric"))
        scheme = SchemeConfig(t_end=args.t_end, snapshot_interval=args.t_end, grid=prof.grid)
        zero = run(build_initial_data(prof), scheme, P, prof)
        final = zero.snapshots[-1]
        err = np.maximum(np.abs(final.rho.values - prof.rho_tilde), np.abs(final.u.values - prof.u_tilde))
        pert = run(build_initial_data(prof, Perturbation()),
                   SchemeConfig(t_end=3.0, snapshot_interval=3.0, grid=prof.grid), P, prof)
        bd = boundary_identity_residual(pert.snapshots[-1], prof, P)["residual"]
        gap = zero.gap[-1]
        ratio = f"{prev / gap:6.2f}" if prev else "     -"
        print(f"{N:6d} {gap:11.3e} {ratio} {bd:12.3e} {prof.r[np.argmax(err)]:9.4f}")
        prev = gap


if __name__ == "__main__":
    main()
