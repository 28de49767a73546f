"""Energy functionals, inequality checks and the stability ledger.

Lagrangian integrals are evaluated on the Eulerian grid with dx = rho r^(n-1) dr
and d/dx = v r^(1-n) d/dr. Norms written ||.|| without a measure are L^2(dr).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import Parameters, RadialField, diff_nodes, integrate_nodes
from .evolution import FluidState, Trajectory
from .lagrangian import LagrangianView, d_dx, difference_fields, mass_coordinate
from .stationary import StationaryProfile, write_csv

# Hardy constant: with f(-m_b t) = 0 and r^n >= n (x + m_b t) for rho near rho_+,
# the classical inequality int f^2/x^2 <= 4 int f_x^2 bounds the ratio by 4.
C_HARDY = 4.0


def sobolev_constant(k: float) -> float:
    """Constant in ||r^(k/2) f_x||_inf^2 <= C (1 + 1/eps) int r^k f_x^2 + eps int r^(k+2n-2) f_xx^2 / v.

    From g^2 <= 2 ||g|| ||g_x|| with g = r^(k/2) f_x on states with v <= 1,
    which gives 2 + k^2/4.
    """
    return 2.0 + k * k / 4.0


def relative_G(v, v_tilde, params: Parameters):
    """Bregman remainder of the internal energy at v_tilde; >= 0, zero iff v = v_tilde."""
    v = np.asarray(v, dtype=float)
    vt = np.asarray(v_tilde, dtype=float)
    if np.any(v <= 0) or np.any(vt <= 0):
        raise ValueError("specific volumes must be positive")
    K, g = params.K, params.gamma
    # written in x = v/v_tilde - 1 so that rounding scales with |v - v_tilde|
    x = (v - vt) / vt
    if g == 1:
        out = K * (x - np.log1p(x))
    else:
        out = K * vt ** (1 - g) / (g - 1) * (np.expm1((1 - g) * np.log1p(x)) + (g - 1) * x)
    return out if out.ndim else float(out)


def _measure(state: FluidState, n: int) -> np.ndarray:
    r = state.grid.nodes
    return state.rho.values * r ** (n - 1)


def relative_energy_density(state: FluidState, profile: StationaryProfile, params: Parameters):
    psi = state.u.values - profile.u_tilde
    return 0.5 * psi**2 + relative_G(1.0 / state.rho.values, 1.0 / profile.rho_tilde, params)


def relative_energy_total(view: LagrangianView | None, state: FluidState, profile: StationaryProfile,
                          params: Parameters) -> float:
    """int E dx = int (psi^2/2 + G[v, v_tilde]) rho r^(n-1) dr."""
    e = relative_energy_density(state, profile, params)
    return integrate_nodes(e * _measure(state, params.n), state.grid.nodes)


def quadratic_energy(state: FluidState, profile: StationaryProfile, params: Parameters) -> float:
    """int (rho_+^(gamma+1) phi^2 + psi^2) dx, the quadratic form equivalent to int E dx."""
    phi, psi = difference_fields(state, profile)
    dens = params.rho_plus ** (params.gamma + 1) * phi.values**2 + psi.values**2
    return integrate_nodes(dens * _measure(state, params.n), state.grid.nodes)


def equivalence_bounds(params: Parameters) -> tuple[float, float]:
    """Bounds c1 <= int E dx / int (rho_+^(gamma+1) phi^2 + psi^2) dx <= c2 for
    3/4 v_+ <= v, v_tilde <= 2 v_+ (Taylor remainder of G with G'' = gamma K v^(-gamma-1))."""
    g, K = params.gamma, params.K
    lo = 0.5 * g * K * 2.0 ** (-g - 1)
    hi = 0.5 * g * K * (4.0 / 3.0) ** (g + 1)
    return min(0.5, lo), max(0.5, hi)


def dissipation_D(view: LagrangianView | None, state: FluidState, profile: StationaryProfile,
                  params: Parameters) -> float:
    """int (r^(2n-2) psi_x^2 / v + v psi^2 / r^2) dx, i.e. int (psi_r^2 + psi^2/r^2) r^(n-1) dr."""
    r = state.grid.nodes
    psi = state.u.values - profile.u_tilde
    v = 1.0 / state.rho.values
    psi_x = d_dx(psi, state, params)
    dens = r ** (2 * params.n - 2) * psi_x**2 / v + v * psi**2 / r**2
    return integrate_nodes(dens * _measure(state, params.n), r)


def ne_terms(state: FluidState, profile: StationaryProfile, params: Parameters) -> np.ndarray:
    """The three weighted L^2 norms inside N_E at one instant."""
    r = state.grid.nodes
    w = r ** (params.n - 1)
    drho = state.rho.values - profile.rho_tilde
    du = state.u.values - profile.u_tilde
    a = integrate_nodes(w * (drho**2 + du**2), r)
    b = integrate_nodes(w * diff_nodes(drho, r) ** 2, r)
    c = integrate_nodes(w * diff_nodes(du, r) ** 2, r)
    return np.sqrt(np.array([a, b, c]))


def norm_NE(state: FluidState, profile: StationaryProfile, params: Parameters) -> float:
    """Instantaneous value of the bracket in N_E; N_E(t) is its running maximum."""
    return float(np.sum(ne_terms(state, profile, params)))


def _second_derivative(f, r):
    hm = r[1:-1] - r[:-2]
    hp = r[2:] - r[1:-1]
    out = np.zeros_like(f)
    out[1:-1] = 2 * (hm * f[2:] - (hm + hp) * f[1:-1] + hp * f[:-2]) / (hm * hp * (hm + hp))
    return out


def me_interior_integrand(state: FluidState, profile: StationaryProfile, params: Parameters) -> float:
    """||r^((n-3)/2)(rho-rho~)_r||^2 + ||r^((n-1)/2)(u-u~)_r||^2 + ||r^((n-3)/2)(u-u~)_rr||^2.

    The second derivative is summed over interior nodes only, dropping the two
    nodes next to each end where only one-sided stencils exist.
    """
    r = state.grid.nodes
    n = params.n
    drho = state.rho.values - profile.rho_tilde
    du = state.u.values - profile.u_tilde
    a = integrate_nodes(r ** (n - 3) * diff_nodes(drho, r) ** 2, r)
    b = integrate_nodes(r ** (n - 1) * diff_nodes(du, r) ** 2, r)
    s = slice(2, -2)
    c = integrate_nodes((r ** (n - 3) * _second_derivative(du, r) ** 2)[s], r[s])
    return a + b + c


def boundary_integrand(trace_u, trace_rho, params: Parameters):
    return params.u_b * np.asarray(trace_u) ** 2 + params.u_b**3 * np.asarray(trace_rho) ** 2


def _cumtrapz(y, t):
    out = np.zeros_like(y, dtype=float)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def accumulate_ME(times, interior, step_times, trace_u, trace_rho, params: Parameters) -> np.ndarray:
    """M_E^2 at each snapshot time by the trapezoid rule: interior integrals sampled
    at the snapshots, boundary traces at every time step."""
    if trace_u is None or trace_rho is None or len(trace_u) == 0:
        raise ValueError("boundary traces are required for M_E")
    interior_cum = _cumtrapz(np.asarray(interior, dtype=float), np.asarray(times, dtype=float))
    bd_cum = _cumtrapz(boundary_integrand(trace_u, trace_rho, params), np.asarray(step_times))
    bd_at = np.interp(times, step_times, bd_cum)
    return interior_cum + bd_at


@dataclass
class EnergyReport:
    times: np.ndarray
    NE: np.ndarray  # running supremum
    NE_instant: np.ndarray
    ME2: np.ndarray
    E_total: np.ndarray
    D: np.ndarray
    boundary_trace_u: np.ndarray  # at snapshot times
    boundary_trace_rho: np.ndarray
    C_emp_running: np.ndarray
    u_b: float

    @property
    def C_emp(self) -> float:
        return float(self.C_emp_running[-1])

    def to_csv(self, path):
        cols = ["t", "NE", "ME2", "E_total", "D", "boundary_trace_u", "boundary_trace_rho", "C_emp_running"]
        data = np.column_stack([self.times, self.NE, self.ME2, self.E_total, self.D,
                                self.boundary_trace_u, self.boundary_trace_rho, self.C_emp_running])
        write_csv(path, cols, data)


def energy_report(traj: Trajectory, profile: StationaryProfile) -> EnergyReport:
    p = traj.params
    snaps = traj.snapshots
    times = traj.times
    ne = np.array([norm_NE(s, profile, p) for s in snaps])
    NE = np.maximum.accumulate(ne)
    interior = np.array([me_interior_integrand(s, profile, p) for s in snaps])
    ME2 = accumulate_ME(times, interior, traj.step_times, traj.trace_u, traj.trace_rho, p)
    E = np.array([relative_energy_total(None, s, profile, p) for s in snaps])
    D = np.array([dissipation_D(None, s, profile, p) for s in snaps])
    tu = np.interp(times, traj.step_times, traj.trace_u)
    trr = np.interp(times, traj.step_times, traj.trace_rho)
    denom = (1.0 + 1.0 / p.u_b**2) * NE[0] ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        C_run = (NE**2 + ME2) / denom if denom > 0 else np.full_like(NE, np.nan)
    return EnergyReport(times, NE, ne, ME2, E, D, tu, trr, C_run, p.u_b)


# -- inequality checks ----------------------------------------------------------

@dataclass
class RatioReport:
    ratio: float
    numerator: float
    denominator: float
    degenerate: bool = False


def hardy_check(f: RadialField, state: FluidState, params: Parameters, atol: float = 1e-14) -> RatioReport:
    """(int f^2 / r^(2n) dx) / (max{1, rho_+^2} int f_x^2 dx) for f vanishing at the inflow node."""
    if abs(f.values[0]) > atol:
        raise ValueError("f must vanish at the inflow boundary")
    r = state.grid.nodes
    n = params.n
    m = _measure(state, n)
    num = integrate_nodes(f.values**2 / r ** (2 * n) * m, r)
    fx = d_dx(f.values, state, params)
    den = max(1.0, params.rho_plus**2) * integrate_nodes(fx**2 * m, r)
    if den == 0:
        return RatioReport(0.0, num, den, degenerate=True)
    return RatioReport(num / den, num, den)


@dataclass
class SobolevReport:
    lhs: float
    rhs: float
    constant: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def weighted_sobolev_check(f: RadialField, state: FluidState, params: Parameters, k: float, eps: float,
                           constant: float | None = None) -> SobolevReport:
    n = params.n
    if k not in (2 * (n - 2), 2 * (n - 1)):
        raise ValueError(f"k must be {2 * (n - 2)} or {2 * (n - 1)}")
    if not eps > 0:
        raise ValueError("eps must be > 0")
    C = sobolev_constant(k) if constant is None else constant
    r = state.grid.nodes
    m = _measure(state, n)
    v = 1.0 / state.rho.values
    fx = d_dx(f.values, state, params)
    fxx = d_dx(fx, state, params)
    lhs = float(np.max(r**k * fx**2))
    first = integrate_nodes(r**k * fx**2 * m, r)
    # one-sided stencils at the ends of the second difference are dropped
    s = slice(1, -1)
    second = integrate_nodes((r ** (k + 2 * n - 2) * fxx**2 / v * m)[s], r[s])
    rhs = C * max(1.0, 1.0 / params.rho_plus) * (1 + 1 / eps) * first + eps * second
    return SobolevReport(lhs, rhs, C)


# -- constants and verdict --------------------------------------------------------

@dataclass(frozen=True)
class ConstantsLedger:
    omega: float
    A1: float
    A2: float
    A3: float
    kappa: float
    admissibility: dict = field(default_factory=dict)

    def as_dict(self):
        return {"omega": self.omega, "A1": self.A1, "A2": self.A2, "A3": self.A3,
                "kappa": self.kappa, "admissibility": dict(self.admissibility)}


def compute_constants(params: Parameters) -> ConstantsLedger:
    rp, g, K, mu = params.rho_plus, params.gamma, params.K, params.mu
    omega = g * K * rp**g / (2**g * mu)
    A1 = max(1.0, rp**2) * max(rp ** (2 * g + 1), rp ** (4 * g - 3), rp ** (2 * g - 2), rp**g)
    A2 = rp ** (2 * g - 1) * max(1.0, rp**2)
    A3 = 2**g * mu / (g * K) * rp**g * max(1.0, rp**3)
    return ConstantsLedger(omega, A1, A2, A3, params.kappa, params.regime_flags())


@dataclass
class StabilityVerdict:
    applicable: bool
    C_emp: float | None
    decay_factor: float | None
    energy_ratio: float | None
    energy_non_increasing: bool | None
    running_max_monotone_after: float | None = None

    def as_dict(self):
        return dict(self.__dict__)


def stability_summary(traj: Trajectory, report: EnergyReport, transient: float = 10.0) -> StabilityVerdict:
    if report.NE[0] == 0:
        return StabilityVerdict(False, None, None, None, None)
    if traj.params.gamma == 1:
        warnings.warn("gamma = 1: stability verdict outside the supported regime", RuntimeWarning)
    gap = traj.gap
    decay = float(gap[-1] / gap[0]) if gap[0] > 0 else None
    e_ratio = float(report.E_total[-1] / report.E_total[0])
    return StabilityVerdict(True, report.C_emp, decay, e_ratio, bool(e_ratio <= 1.0), transient)


def lagrangian_family(state: FluidState, params: Parameters, k: int) -> RadialField:
    """f_k(x) = x^k e^(-x) in the mass coordinate measured from the inflow boundary."""
    X = mass_coordinate(state, params).values - (-params.m_b * state.t)
    return RadialField(state.grid, X**k * np.exp(-X))
