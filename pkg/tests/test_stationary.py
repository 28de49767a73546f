import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from nsinflow.core import DomainError, Parameters, RadialField, RadialGrid
from nsinflow.oracle import oracle_backward_integrate, residual_at_zero
from nsinflow.quadrature import ExpKernelIntegrator
from nsinflow.stationary import (InteriorMinimum, MonotoneIncreasing, StationaryNonConvergence, TailFitError,
                                 apply_F, check_weighted_kernel_bound, classify_density_profile,
                                 decay_report, fixed_point_map, remainder_N, solve_stationary, x_norm)

from conftest import node_near

UNIT = Parameters(gamma=2, K=1, rho_plus=1.0)


@pytest.mark.parametrize("eta,expected", [(0.0, 0.0), (1.0, 1.25), (-0.5, 2.0)])
def test_remainder_examples(eta, expected):
    assert remainder_N(eta, UNIT) == pytest.approx(expected, abs=1e-15)


def test_remainder_domain():
    with pytest.raises(DomainError):
        remainder_N(-1.0, UNIT)


@given(st.floats(-0.9, 5.0))
def test_remainder_is_nonnegative_and_quadratic(eta):
    # p is convex in v, so the Taylor remainder is >= 0
    val = remainder_N(eta, UNIT)
    assert val >= 0
    if abs(eta) < 1e-3:
        # cancellation leaves a rounding floor of order eps |eta|
        assert abs(val - 3.0 * eta**2) <= 1e-2 * 3.0 * eta**2 + 1e-15 * abs(eta)


@given(a=st.floats(0.1, 50.0), h=st.floats(1e-4, 1.0))
@settings(max_examples=50)
def test_kernel_integrator_exact_on_quadratics(a, h):
    w = np.array([1.0, 1.0 + h, 1.0 + 2.3 * h])
    integ = ExpKernelIntegrator(w, a)
    g = 1 + 2 * w - w**2
    got = integ.running(g)[-1]
    ref = quad(lambda s: np.exp(a * (s - w[-1])) * (1 + 2 * s - s * s), w[0], w[-1], epsabs=1e-15, epsrel=1e-12)[0]
    assert got == pytest.approx(ref, rel=1e-9, abs=1e-14)


def test_apply_F_at_zero():
    P = Parameters(rho_plus=1.0, rho_b=2.0, u_b=0.05)  # m_b = 0.1
    g = RadialGrid(r_max=200, N=2001, spacing="geometric")
    F = apply_F(RadialField(g, np.zeros(g.N)), P).values
    assert F[0] == pytest.approx(0.05, rel=1e-14)
    r = g.nodes
    assert np.allclose(F, 0.1 / 2 / r, rtol=1e-14)
    assert 0.1 / 2 / 4 == pytest.approx(0.0125)


def test_apply_F_against_quadrature(grid, params):
    eta = RadialField(grid, 1e-3 * grid.nodes**-2.0)
    F = apply_F(eta, params).values
    n, mb = 2, params.m_b
    for rr in (1.0, 2.0, 10.0):
        j = node_near(grid, rr)
        r = grid.nodes[j]
        tail = quad(lambda s: 1e-3 * s ** (-1 - 2 * n + 2) / s**2, r, np.inf, epsabs=1e-18, epsrel=1e-13)[0]
        e = 1e-3 * r**-2
        ref = mb / 2 / r + mb * e / r - (n - 1) * mb * r * tail + r / mb * remainder_N(e, params)
        assert F[j] == pytest.approx(ref, rel=1e-12)


def test_apply_F_rejects_growing_eta(grid, params):
    with pytest.raises(TailFitError):
        apply_F(RadialField(grid, 1e-6 * grid.nodes), params)


def test_fixed_point_map_boundary_value(grid, params):
    T = fixed_point_map(RadialField(grid, np.zeros(grid.N)), params)
    assert T.values[0] == params.eta_b


def test_fixed_point_map_against_quadrature(grid):
    P = Parameters(rho_b=1.0, u_b=0.05)
    T = fixed_point_map(RadialField(grid, np.zeros(grid.N)), P)
    j = node_near(grid, 2.0)
    r2 = grid.nodes[j]
    a = P.kappa / P.m_b
    ref = quad(lambda s: np.exp(a * (s * s - r2 * r2)) * P.m_b / 2 / s, 1, r2, epsabs=1e-16, epsrel=1e-13)[0]
    assert T.values[j] == pytest.approx(ref, rel=1e-7)
    assert ref == pytest.approx(1.5819383518e-4, rel=1e-9)


def test_solve_invariants(solved, params):
    prof, rep = solved
    assert rep.converged and rep.distances[-1] <= 1e-10
    assert prof.eta[0] == params.eta_b
    assert prof.u_tilde[0] == params.u_b
    r = prof.r
    assert np.max(np.abs(r * prof.rho_tilde * prof.u_tilde - params.m_b)) <= 1e-10 * params.m_b
    assert rep.in_ball and rep.volume_bounds_ok
    v = prof.v_tilde
    assert np.all((0.75 * params.v_plus <= v) & (v <= 1.25 * params.v_plus))
    assert rep.ode_residual <= 10 * 1e-10
    assert rep.fixed_point_residual <= 1e-10


def test_oracle_agreement(profile, params, grid):
    eta_o = oracle_backward_integrate(params, grid).values
    rel = np.max(np.abs(profile.eta - eta_o)) / np.max(np.abs(eta_o))
    assert rel <= 1e-6


def test_oracle_rejects_trivial_solution(params):
    res = residual_at_zero(params, np.linspace(1, 10, 5))
    assert np.all(np.abs(res) > 0)


def test_contraction_ratio_decreases_with_ub():
    ratios = []
    for ub in (0.1, 0.05, 0.025):
        _, rep = solve_stationary(Parameters(rho_b=1 + ub**2, u_b=ub), RadialGrid(N=1025, spacing="geometric"))
        ratios.append(rep.contraction_ratio)
    assert all(x < 1 for x in ratios)
    assert ratios[0] > ratios[1] > ratios[2]


def test_non_convergence_carries_history():
    with pytest.raises(StationaryNonConvergence) as info:
        solve_stationary(Parameters(rho_b=1.0, u_b=0.05), RadialGrid(N=513, spacing="geometric"), max_iter=2)
    assert len(info.value.distances) == 2


@pytest.mark.parametrize("rho_b,kind", [(1.001, InteriorMinimum), (0.999, MonotoneIncreasing),
                                         (1.0, InteriorMinimum)])
def test_classification(rho_b, kind):
    prof, _ = solve_stationary(Parameters(rho_b=rho_b, u_b=0.05), RadialGrid(N=2049, spacing="geometric"))
    cls = classify_density_profile(prof)
    assert isinstance(cls, kind)
    if kind is InteriorMinimum:
        assert cls.r_star > 1
        assert cls.rho_min <= min(prof.rho_tilde.min(), rho_b) + 1e-12


@pytest.mark.parametrize("n,expected", [(2, (-2, -3, -1)), (3, (-4, -5, -2))])
def test_decay_slopes(n, expected):
    P = Parameters(n=n, rho_b=1.0025, u_b=0.05)
    prof, _ = solve_stationary(P, RadialGrid(N=4097, spacing="geometric"))
    rep = decay_report(prof)
    s = rep.slopes
    got = (s["eta"], s["eta_r"], s["u_tilde"])
    tols = (0.15, 0.15, 0.1)
    for g_, e_, t_ in zip(got, expected, tols):
        assert abs(g_ - e_) <= t_
    assert rep.R_emp is not None and rep.R_emp < prof.r[-1]


def test_tail_positivity_for_nonpositive_eta_b():
    prof, _ = solve_stationary(Parameters(rho_b=1.01, u_b=0.05), RadialGrid(N=2049, spacing="geometric"))
    rep = decay_report(prof)
    mask = prof.r >= rep.R_emp
    assert np.all(prof.eta[mask] > 0) and np.all(prof.eta_r[mask] < 0)


def test_kernel_bound(grid, params):
    zero = check_weighted_kernel_bound(RadialField(grid, np.zeros(grid.N)), 1, params)
    assert zero["ratio"] == 0
    ratios = []
    for ub in (0.05, 0.025, 0.0125):
        P = params.replace(u_b=ub, rho_b=1 + ub**2)
        ratios.append(check_weighted_kernel_bound(RadialField(grid, 1 / grid.nodes), 1, P)["ratio"])
    assert ratios[0] == pytest.approx(0.467811162, rel=1e-6)
    assert max(ratios) / min(ratios) < 2
    with pytest.raises(ValueError):
        check_weighted_kernel_bound(RadialField(grid, 1 / grid.nodes), 4, params)


def test_profile_csv(tmp_path, profile):
    path = tmp_path / "p.csv"
    profile.to_csv(path)
    text = path.read_bytes()
    assert b"\r" not in text
    lines = text.decode().splitlines()
    assert lines[0] == "r,eta,eta_r,rho_tilde,u_tilde,u_tilde_r,L_tilde"
    assert len(lines) == profile.grid.N + 1
    back = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.array_equal(back[:, 1], profile.eta)


def test_x_norm():
    r = np.array([1.0, 2.0, 4.0])
    assert x_norm(np.array([0.1, -0.2, 0.05]), r, 2) == pytest.approx(0.4)
