"""Recompute the calibrated constants frozen in the acceptance suite.

Run after a deliberate change to the scheme, inspect, then update
FROZEN_C_EMP in nsinflow/acceptance.py by hand.
"""
import numpy as np
from scipy.integrate import quad

from nsinflow.acceptance import FROZEN_C_EMP, _perturbed_run
from nsinflow.core import Parameters, RadialGrid
from nsinflow.energy import C_HARDY, hardy_check, lagrangian_family
from nsinflow.evolution import FluidState


def main():
    _, report, elapsed = _perturbed_run()
    print(f"C_emp = {report.C_emp:.5e} (frozen {FROZEN_C_EMP:.5e}), run {elapsed:.1f} s")
    g = RadialGrid(r_max=200.0, N=16385)
    s = FluidState.from_arrays(0.0, g, np.ones(g.N), np.zeros(g.N))
    P = Parameters(rho_b=1.0)
    for k in range(1, 5):
        rep = hardy_check(lagrangian_family(s, P, k), s, P)
        ref = quad(lambda x: (x**k * np.exp(-x)) ** 2 / (1 + 2 * x) ** 2, 0, np.inf)[0]
        print(f"Hardy k={k}: ratio {rep.ratio:.4f} (C_H = {C_HARDY}), numerator {rep.numerator:.6e} vs quad {ref:.6e}")


if __name__ == "__main__":
    main()
