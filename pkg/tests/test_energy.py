from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from nsinflow.core import Parameters, RadialField, RadialGrid
from nsinflow.energy import (C_HARDY, accumulate_ME, compute_constants, dissipation_D, energy_report,
                             equivalence_bounds, hardy_check, lagrangian_family, norm_NE, quadratic_energy,
                             relative_G, relative_energy_total, sobolev_constant, stability_summary,
                             weighted_sobolev_check)
from nsinflow.evolution import FluidState, Perturbation, SchemeConfig, build_initial_data, run
from nsinflow.stationary import solve_stationary

G2 = Parameters(gamma=2, K=1)
G1 = Parameters(gamma=1, K=1)


def test_relative_G_examples():
    assert relative_G(2.0, 1.0, G2) == pytest.approx(0.5)
    assert relative_G(1.3, 1.3, G2) == 0.0
    assert relative_G(2.0, 1.0, G1) == pytest.approx(1 - np.log(2))
    assert relative_G(2.0, 1.0, G1) == pytest.approx(0.30685, abs=1e-5)
    with pytest.raises(ValueError):
        relative_G(0.0, 1.0, G2)


@given(v=st.floats(0.05, 20), vt=st.floats(0.05, 20))
def test_relative_G_continuous_at_isothermal_limit(v, vt):
    near = relative_G(v, vt, Parameters(gamma=1.0 + 2.0**-52))
    assert near == pytest.approx(relative_G(v, vt, G1), rel=1e-9, abs=1e-15)


@pytest.mark.parametrize("P", [G1, G2, Parameters(gamma=1.4, K=2)])
def test_relative_G_lattice(P):
    v = np.geomspace(0.1, 10, 100)
    V, VT = np.meshgrid(v, v)
    G = relative_G(V, VT, P)
    off = V != VT
    assert np.all(G[off] > 0)
    assert np.all(G[~off] == 0)


# the textbook closed form divides a cancelling difference by gamma - 1, so it
# only serves as a reference away from gamma = 1
@given(v=st.floats(0.05, 20), vt=st.floats(0.05, 20), g=st.one_of(st.just(1.0), st.floats(1.05, 3.0)))
def test_relative_G_matches_closed_form(v, vt, g):
    P = Parameters(gamma=g, K=1.0)
    if g == 1:
        ref = v / vt - 1 - np.log(v / vt)
    else:
        ref = (v ** (1 - g) - vt ** (1 - g)) / (g - 1) + vt ** (-g) * (v - vt)
    assert relative_G(v, vt, P) >= 0
    assert relative_G(v, vt, P) == pytest.approx(ref, rel=1e-7, abs=1e-12)


def test_constants_examples():
    c = compute_constants(Parameters(rho_plus=1, gamma=2, K=1, mu=1))
    assert (c.omega, c.A1, c.A2, c.A3) == pytest.approx((0.5, 1.0, 1.0, 2.0))
    c = compute_constants(Parameters(rho_plus=0.5, rho_b=0.5, gamma=2, K=1, mu=1))
    assert c.A2 == pytest.approx(0.125)
    assert c.omega == pytest.approx(0.125)
    assert all(x > 0 for x in (c.omega, c.A1, c.A2, c.A3, c.kappa))


@pytest.fixture(scope="module")
def short(coarse_profile):
    p = coarse_profile.params
    traj = run(build_initial_data(coarse_profile, Perturbation()),
               SchemeConfig(t_end=1.0, snapshot_interval=0.25, grid=coarse_profile.grid), p, coarse_profile)
    return traj, energy_report(traj, coarse_profile)


def test_stationary_state_has_zero_energy(profile, params):
    s = build_initial_data(profile)
    assert relative_energy_total(None, s, profile, params) == 0
    assert dissipation_D(None, s, profile, params) == 0
    assert norm_NE(s, profile, params) == 0


def test_NE_initial_against_quadrature(profile, params):
    s = build_initial_data(profile, Perturbation())
    bump = Perturbation()

    def db(r):
        z = (r - 5) / 2
        return 0.0 if abs(z) >= 1 else 0.01 * np.exp(1 / (z * z - 1)) * (-z / (z * z - 1) ** 2)

    # the same bump sits on rho and u, so the two derivative norms coincide
    a = quad(lambda r: 2 * r * float(bump(np.array([r]))[0]) ** 2, 3, 7, epsabs=1e-16, epsrel=1e-12)[0]
    b = quad(lambda r: r * db(r) ** 2, 3, 7, epsabs=1e-16, epsrel=1e-12)[0]
    ref = np.sqrt(a) + 2 * np.sqrt(b)
    assert ref == pytest.approx(0.03655304334, rel=1e-9)
    assert norm_NE(s, profile, params) == pytest.approx(ref, rel=1e-4)


def test_report_monotone_and_pinned(short):
    traj, rep = short
    assert np.all(np.diff(rep.NE) >= 0)
    assert np.all(np.diff(rep.ME2) >= 0)
    for arr in (rep.NE, rep.ME2, rep.E_total, rep.D, rep.C_emp_running):
        assert np.all(np.isfinite(arr))
    assert rep.NE[-1] == pytest.approx(0.03653365505141, rel=1e-8)
    assert rep.ME2[-1] == pytest.approx(7.081342019556e-05, rel=1e-8)
    assert rep.E_total[-1] == pytest.approx(1.372828041418e-04, rel=1e-8)
    assert rep.D[-1] == pytest.approx(5.177872478206e-05, rel=1e-8)
    v = stability_summary(traj, rep)
    assert v.applicable and np.isfinite(v.C_emp)
    assert v.energy_non_increasing


def test_equivalence(short, coarse_profile):
    traj, _ = short
    p = coarse_profile.params
    lo, hi = equivalence_bounds(p)
    for s in traj.snapshots:
        ratio = relative_energy_total(None, s, coarse_profile, p) / quadratic_energy(s, coarse_profile, p)
        assert lo <= ratio <= hi


def test_zero_perturbation(coarse_profile):
    p = coarse_profile.params
    traj = run(build_initial_data(coarse_profile),
               SchemeConfig(t_end=0.5, snapshot_interval=0.25, grid=coarse_profile.grid), p, coarse_profile)
    rep = energy_report(traj, coarse_profile)
    assert rep.NE[0] == 0
    assert not stability_summary(traj, rep).applicable
    # the floor is scheme error: 2.4e-9 at N = 1025, falling at least 4x per doubling
    assert rep.ME2[-1] < 3e-9
    prof2, _ = solve_stationary(p, RadialGrid(N=2049, spacing="geometric"))
    traj2 = run(build_initial_data(prof2), SchemeConfig(t_end=0.5, snapshot_interval=0.25, grid=prof2.grid), p, prof2)
    assert energy_report(traj2, prof2).ME2[-1] < rep.ME2[-1] / 4


def test_accumulate_ME_trapezoid():
    P = Parameters()
    t = np.linspace(0, 2, 5)
    steps = np.linspace(0, 2, 41)
    me = accumulate_ME(t, 3.0 * np.ones(5), steps, np.ones(41), np.zeros(41), P)
    assert me == pytest.approx(3.0 * t + P.u_b * t)
    with pytest.raises(ValueError):
        accumulate_ME(t, np.ones(5), steps, None, None, P)


def test_dissipation_synthetic():
    g = RadialGrid(r_max=50, N=4001, spacing="geometric")
    r = g.nodes
    state = FluidState.from_arrays(0, g, np.ones(g.N), 1.0 / r)
    prof = SimpleNamespace(rho_tilde=np.ones(g.N), u_tilde=np.zeros(g.N))
    D = dissipation_D(None, state, prof, Parameters(rho_b=1.0))
    assert D == pytest.approx(1 - 50.0**-2, rel=1e-6)


def _rest(N=8193, r_max=200.0):
    g = RadialGrid(r_max=r_max, N=N)
    return FluidState.from_arrays(0, g, np.ones(N), np.zeros(N))


def test_hardy():
    s = _rest()
    P = Parameters(rho_b=1.0)
    zero = hardy_check(RadialField(s.grid, np.zeros(s.grid.N)), s, P)
    assert zero.ratio == 0 and zero.degenerate
    with pytest.raises(ValueError):
        hardy_check(RadialField(s.grid, np.ones(s.grid.N)), s, P)
    rep = hardy_check(lagrangian_family(s, P, 1), s, P)
    assert rep.denominator == pytest.approx(0.25, rel=1e-3)
    # x = (r^2 - 1)/2 for n = 2, so r^4 = (1 + 2x)^2
    num = quad(lambda x: (x * np.exp(-x)) ** 2 / (1 + 2 * x) ** 2, 0, np.inf, epsabs=1e-15)[0]
    assert rep.numerator == pytest.approx(num, rel=1e-5)
    for k in range(1, 5):
        assert hardy_check(lagrangian_family(s, P, k), s, P).ratio <= C_HARDY


def test_weighted_sobolev():
    s = _rest()
    P = Parameters(rho_b=1.0)
    zero = weighted_sobolev_check(RadialField(s.grid, np.zeros(s.grid.N)), s, P, k=2, eps=0.5)
    assert zero.lhs == 0 and zero.slack == 0
    f = lagrangian_family(s, P, 1)
    for k in (0, 2):
        for eps in (0.1, 0.5, 0.9):
            assert weighted_sobolev_check(f, s, P, k=k, eps=eps).slack >= 0
    with pytest.raises(ValueError):
        weighted_sobolev_check(f, s, P, k=1, eps=0.5)
    assert sobolev_constant(2) == 3.0


def test_energy_csv(tmp_path, short):
    _, rep = short
    path = tmp_path / "e.csv"
    rep.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,NE,ME2,E_total,D,boundary_trace_u,boundary_trace_rho,C_emp_running"
    assert len(lines) == len(rep.times) + 1
