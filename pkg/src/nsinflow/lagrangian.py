"""Mass-coordinate view of Eulerian states.

Every Eulerian node r_i carries the Lagrangian label x_i = X(r_i, t), so the
difference fields phi = v - v_tilde and psi = u - u_tilde are stored on the
Eulerian grid without resampling. x-derivatives follow from the chain rule
dr/dx = v r^(1-n), and integrals over the mass coordinate become
int (...) rho r^(n-1) dr.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .core import Parameters, RadialField, cumulative_nodes, d2p_dv2, diff_nodes, pressure_of_volume
from .evolution import FluidState
from .stationary import StationaryProfile, write_csv

DIVIDED_DIFFERENCE_EPS = 1e-12


def mass_coordinate(state: FluidState, params: Parameters) -> RadialField:
    r = state.grid.nodes
    X = -params.m_b * state.t + cumulative_nodes(state.rho.values * r ** (params.n - 1), r)
    return RadialField(state.grid, X)


def invert_coordinate(x: float, state: FluidState, params: Parameters, X: RadialField | None = None) -> float:
    """Radius R(x, t) with X(R, t) = x.

    X is interpolated by the cubic Hermite spline through the nodal values and
    the exact slopes X_r = rho r^(n-1); the root inside the bracketing cell is
    found by Brent's method (bisection safeguarded secant/inverse quadratic).
    """
    X = X if X is not None else mass_coordinate(state, params)
    r, Xv = state.grid.nodes, X.values
    if not Xv[0] <= x <= Xv[-1]:
        raise ValueError(f"x = {x} outside [{Xv[0]}, {Xv[-1]}]")
    j = int(np.searchsorted(Xv, x))
    if j < len(r) and Xv[j] == x:
        return float(r[j])
    j -= 1
    slope = state.rho.values * r ** (params.n - 1)
    spline = CubicHermiteSpline(r[j:j + 2], Xv[j:j + 2], slope[j:j + 2])
    return float(brentq(lambda s: spline(s) - x, r[j], r[j + 1], xtol=1e-15, rtol=1e-15))


def radius_from_volume(X: RadialField, state: FluidState, params: Parameters) -> np.ndarray:
    """R = (1 + n int_{-m_b t}^x v dy)^(1/n), integrating in the mass coordinate."""
    n = params.n
    return (1.0 + n * cumulative_nodes(1.0 / state.rho.values, X.values)) ** (1.0 / n)


def difference_fields(state: FluidState, profile: StationaryProfile):
    phi = 1.0 / state.rho.values - 1.0 / profile.rho_tilde
    psi = state.u.values - profile.u_tilde
    return RadialField(state.grid, phi), RadialField(state.grid, psi)


def d_dx(values: np.ndarray, state: FluidState, params: Parameters) -> np.ndarray:
    r = state.grid.nodes
    return diff_nodes(values, r) * r ** (1 - params.n) / state.rho.values


def flux_F_field(state: FluidState, profile: StationaryProfile, params: Parameters) -> RadialField:
    """F = mu phi_x / v - psi / r^(n-1)."""
    phi, psi = difference_fields(state, profile)
    r = state.grid.nodes
    v = 1.0 / state.rho.values
    F = params.mu * d_dx(phi.values, state, params) / v - psi.values * r ** (1 - params.n)
    return RadialField(state.grid, F)


def boundary_identity_residual(state: FluidState, profile: StationaryProfile, params: Parameters) -> dict:
    """Both sides of F(-m_b t) = (mu/v_b) phi_x = (mu/u_b) psi_x at the inflow node."""
    phi, psi = difference_fields(state, profile)
    F0 = flux_F_field(state, profile, params).values[0]
    phi_x = d_dx(phi.values, state, params)[0]
    psi_x = d_dx(psi.values, state, params)[0]
    lhs = params.mu / params.v_b * phi_x
    rhs = params.mu / params.u_b * psi_x
    return {"F0": float(F0), "mu_phi_x_over_vb": float(lhs), "mu_psi_x_over_ub": float(rhs),
            "residual_F": float(abs(F0 - lhs)), "residual": float(abs(lhs - rhs))}


def _u_tilde_D(r, u_t, u_t_r, n):
    # (r^(n-1) u)_r / r^(n-1)
    return u_t_r + (n - 1) * u_t / r


def coefficient_q(profile: StationaryProfile, state: FluidState, params: Parameters) -> RadialField:
    """q = -(gamma K/mu) v^-gamma + D(u_tilde) - (mu/(rho_b u_b)) r^(n-1) D(u_tilde)_r
    with D(u) = (r^(n-1) u)_r / r^(n-1)."""
    r = state.grid.nodes
    n = params.n
    v = 1.0 / state.rho.values
    D = _u_tilde_D(r, profile.u_tilde, profile.u_tilde_r, n)
    D_r = diff_nodes(D, r)
    q = (-(params.gamma * params.K / params.mu) * v ** (-params.gamma) + D
         - params.mu / params.m_b * r ** (n - 1) * D_r)
    return RadialField(state.grid, q)


def residuals_R1_R2(state: FluidState, profile: StationaryProfile, params: Parameters):
    phi, psi = difference_fields(state, profile)
    phi, psi = phi.values, psi.values
    v = 1.0 / state.rho.values
    vt = 1.0 / profile.rho_tilde
    vt_r = profile.eta_r
    ut, ut_r = profile.u_tilde, profile.u_tilde_r
    _, dp = pressure_of_volume(v, params)
    _, dpt = pressure_of_volume(vt, params)
    diff = v - vt
    small = np.abs(diff) < DIVIDED_DIFFERENCE_EPS
    dd = np.where(small, d2p_dv2(vt, params), (dp - dpt) / np.where(small, 1.0, diff))
    R1 = vt_r * ut / vt * phi - vt_r * psi
    R2 = ut_r * ut / vt * phi - vt_r * dd * v * phi - ut_r * psi
    return RadialField(state.grid, R1), RadialField(state.grid, R2)


def continuity_residual(before: FluidState, after: FluidState, profile: StationaryProfile,
                        params: Parameters) -> np.ndarray:
    """phi_t - (r^(n-1) psi)_x - R1 from two states a short time apart.

    The Lagrangian time derivative is phi_t|_x = d_t phi|_r + u phi_r
    (particle paths satisfy R_t = u), with spatial terms taken at ``before``.
    """
    dt = after.t - before.t
    if not dt > 0:
        raise ValueError("states must be ordered in time")
    r = before.grid.nodes
    n = params.n
    phi0, psi0 = difference_fields(before, profile)
    phi1, _ = difference_fields(after, profile)
    phi_t = (phi1.values - phi0.values) / dt + before.u.values * diff_nodes(phi0.values, r)
    flux_x = d_dx(r ** (n - 1) * psi0.values, before, params)
    R1, _ = residuals_R1_R2(before, profile, params)
    return phi_t - flux_x - R1.values


@dataclass
class LagrangianView:
    X: RadialField
    phi: RadialField
    psi: RadialField
    F: RadialField
    q: RadialField
    R1: RadialField
    R2: RadialField
    boundary_x: float

    @classmethod
    def build(cls, state: FluidState, profile: StationaryProfile, params: Parameters) -> "LagrangianView":
        X = mass_coordinate(state, params)
        phi, psi = difference_fields(state, profile)
        R1, R2 = residuals_R1_R2(state, profile, params)
        return cls(X, phi, psi, flux_F_field(state, profile, params),
                   coefficient_q(profile, state, params), R1, R2, -params.m_b * state.t)

    def to_csv(self, path):
        cols = ["x", "r", "phi", "psi", "F", "q", "R1", "R2"]
        data = np.column_stack([self.X.values, self.X.grid.nodes, self.phi.values, self.psi.values,
                                self.F.values, self.q.values, self.R1.values, self.R2.values])
        write_csv(path, cols, data)
