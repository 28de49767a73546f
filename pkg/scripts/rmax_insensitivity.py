"""Effect of the far-field truncation radius and of the far-field boundary data.

Compares the perturbed run on r_max = 200 and 400 (same cells per decade) with
Dirichlet data taken from the stationary profile or set to the rest state.
"""
import argparse

import numpy as np

from nsinflow.core import Parameters, RadialGrid
from nsinflow.evolution import Perturbation, SchemeConfig, build_initial_data, run
from nsinflow.stationary import solve_stationary


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--t-end", type=float, default=20.0)
    args = ap.parse_args()
    P = Parameters()
    finals = {}
    for r_max, N in ((200.0, 4097), (400.0, 4619)):
        prof, _ = solve_stationary(P, RadialGrid(r_max=r_max, N=N, spacing="geometric"))
        for far in ("stationary", "rest"):
            scheme = SchemeConfig(t_end=args.t_end, snapshot_interval=1.0, grid=prof.grid, far_field=far)
            traj = run(build_initial_data(prof, Perturbation()), scheme, P, prof)
            s = traj.snapshots[-1]
            finals[(r_max, far)] = (s.grid.nodes, s.rho.values, s.u.values)
            print(f"r_max={r_max:5.0f} far={far:10s} gap(0)={traj.gap[0]:.3e} gap(t_end)={traj.gap[-1]:.3e} "
                  f"u_tilde(r_max)={prof.u_tilde[-1]:.2e}")
    for far in ("stationary", "rest"):
        r1, rho1, u1 = finals[(200.0, far)]
        r2, rho2, u2 = finals[(400.0, far)]
        inner = r1 <= 50
        d = max(np.max(np.abs(rho1[inner] - np.interp(r1[inner], r2, rho2))),
                np.max(np.abs(u1[inner] - np.interp(r1[inner], r2, u2))))
        print(f"far={far:10s} max difference on [1, 50] between r_max 200 and 400: {d:.3e}")


if __name__ == "__main__":
    main()
