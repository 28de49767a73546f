"""Stationary inflow profile by contraction iteration on the representation formula.

The unknown is eta = v_tilde - v_+ (specific-volume deviation). The map

    T[eta](r) = eta_b exp(-(kappa/m_b)(r^n - 1))
                + int_1^r exp(-(kappa/m_b)(r^n - s^n)) F[eta](s) ds

is iterated in the weighted sup norm ||f||_X = sup r^(n-1) |f(r)|. In the variable
w = s^n the kernel is a pure exponential, which is integrated exactly against a
piecewise-quadratic interpolant of F (see :mod:`nsinflow.quadrature`).
"""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .core import (
    DomainError,
    Parameters,
    RadialField,
    RadialGrid,
    cumulative_nodes,
)
from .quadrature import ExpKernelIntegrator

log = logging.getLogger(__name__)


class TailFitError(RuntimeError):
    pass


class StationaryNonConvergence(RuntimeError):
    def __init__(self, message, distances):
        super().__init__(message)
        self.distances = list(distances)


class RegimeViolation(RuntimeError):
    pass


class ClassificationError(RuntimeError):
    pass


def remainder_N(eta_val, params: Parameters):
    """Quadratic remainder p(v_+ + eta) - p(v_+) - p'(v_+) eta.

    Evaluated as K v_+^-gamma [expm1(-gamma log1p(x)) + gamma x] with x = eta/v_+,
    so its rounding error scales with |eta| rather than with p(v_+). The far
    field multiplies N by r^(n-1)/(mu m_b), which would otherwise turn the
    cancellation into a visible noise floor.
    """
    eta_val = np.asarray(eta_val, dtype=float)
    x = eta_val / params.v_plus
    if np.any(x <= -1):
        raise DomainError("v_+ + eta must stay positive")
    g = params.gamma
    out = params.K * params.v_plus ** (-g) * (np.expm1(-g * np.log1p(x)) + g * x)
    return out if np.ndim(out) else float(out)


def tail_amplitude(r: np.ndarray, eta: np.ndarray, n: int) -> float:
    """Median of r^(2(n-1)) eta over the last decade of the grid."""
    mask = r >= r[-1] / 10
    return float(np.median(r[mask] ** (2 * (n - 1)) * eta[mask]))


def _check_decaying(r: np.ndarray, eta: np.ndarray):
    outer = np.abs(eta[r >= r[-1] / 2])
    inner = np.abs(eta[(r >= r[-1] / 10) & (r < r[-1] / 2)])
    if inner.size and outer.size and outer.max() > inner.max() and outer.max() > 0:
        raise TailFitError("eta does not decay over the last decade of the grid")


def tail_integral(r: np.ndarray, eta: np.ndarray, n: int, A: float | None = None) -> np.ndarray:
    """int_r^inf eta(s) s^(1-2n) ds with an analytic A s^(-2(n-1)) tail beyond r_max."""
    if A is None:
        A = tail_amplitude(r, eta, n)
    p = 4 * n - 4
    beyond = A * r[-1] ** (-p) / p
    cum = cumulative_nodes(eta * r ** (1 - 2 * n), r)
    return beyond + (cum[-1] - cum)


def _F(r, eta, params: Parameters, A=None):
    n, mu, mb = params.n, params.mu, params.m_b
    I = tail_integral(r, eta, n, A)
    rn1 = r ** (n - 1)
    return (
        mb * params.v_plus / (2 * mu) / rn1
        + mb / mu * eta / rn1
        - (n - 1) * mb * rn1 / mu * I
        + rn1 / (mu * mb) * remainder_N(eta, params)
    )


def apply_F(eta: RadialField, params: Parameters) -> RadialField:
    r = eta.grid.nodes
    _check_decaying(r, eta.values)
    return RadialField(eta.grid, _F(r, eta.values, params))


def x_norm(values: np.ndarray, r: np.ndarray, n: int) -> float:
    return float(np.max(r ** (n - 1) * np.abs(values)))


def _fine_nodes(r_out: np.ndarray, params: Parameters, theta: float):
    """Refine every output cell so that the step in w = r^n resolves both the
    boundary layer (width m_b/kappa in w) and the algebraic decay (scale w)."""
    n = params.n
    a = params.kappa / params.m_b
    w = r_out**n
    target = theta * (1.0 / a + (w[:-1] - 1.0))
    m = np.maximum(1, np.ceil(np.diff(w) / target).astype(int))
    starts = np.repeat(r_out[:-1], m)
    widths = np.repeat(np.diff(r_out), m)
    counts = np.repeat(m, m)
    offsets = np.arange(m.sum()) - np.repeat(np.cumsum(m) - m, m)
    r_fine = np.append(starts + widths * offsets / counts, r_out[-1])
    out_idx = np.append(np.cumsum(m) - m, m.sum())
    return r_fine, out_idx


class _Solver:
    def __init__(self, r_out: np.ndarray, params: Parameters, theta: float):
        self.params = params
        self.r, self.out_idx = _fine_nodes(r_out, params, theta)
        self.w = self.r**params.n
        self.a = params.kappa / params.m_b
        self.kernel = ExpKernelIntegrator(self.w, self.a)

    def initial(self):
        return self.params.eta_b * np.exp(-self.a * (self.w - 1.0))

    def F(self, eta):
        return _F(self.r, eta, self.params)

    def T(self, eta):
        n = self.params.n
        g = self.F(eta) / (n * self.r ** (n - 1))  # ds = dw / (n s^(n-1))
        return self.kernel.running(g, self.params.eta_b)

    def eta_r(self, eta):
        n = self.params.n
        return -n * self.a * self.r ** (n - 1) * eta + self.F(eta)


@dataclass
class IterationReport:
    iterations: int
    distances: list
    contraction_ratio: float
    fixed_point_residual: float
    ode_residual: float
    ball_norm: float
    in_ball: bool
    volume_bounds_ok: bool
    converged: bool = True

    def as_dict(self):
        return {
            "iterations": self.iterations,
            "distances": list(self.distances),
            "contraction_ratio": self.contraction_ratio,
            "fixed_point_residual": self.fixed_point_residual,
            "ode_residual": self.ode_residual,
            "ball_norm": self.ball_norm,
            "in_ball": self.in_ball,
            "volume_bounds_ok": self.volume_bounds_ok,
            "converged": self.converged,
        }


@dataclass
class StationaryProfile:
    params: Parameters
    grid: RadialGrid
    eta: np.ndarray
    eta_r: np.ndarray
    rho_tilde: np.ndarray
    u_tilde: np.ndarray
    u_tilde_r: np.ndarray
    L_tilde: np.ndarray
    tail_fit: dict = field(default_factory=dict)
    # refined solver nodes; used for sub-cell extremum location
    r_fine: np.ndarray | None = None
    eta_fine: np.ndarray | None = None
    eta_r_fine: np.ndarray | None = None

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def v_tilde(self) -> np.ndarray:
        return self.params.v_plus + self.eta

    @property
    def rho_tilde_r(self) -> np.ndarray:
        return -self.eta_r * self.rho_tilde**2

    @property
    def v_tilde_r(self) -> np.ndarray:
        return self.eta_r

    def to_csv(self, path):
        cols = ["r", "eta", "eta_r", "rho_tilde", "u_tilde", "u_tilde_r", "L_tilde"]
        data = np.column_stack([self.r, self.eta, self.eta_r, self.rho_tilde,
                                self.u_tilde, self.u_tilde_r, self.L_tilde])
        write_csv(path, cols, data)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{x:.17g}" for x in row])


def derived_fields(params: Parameters, r, eta, eta_r):
    """rho, u, u_r and L = rho u u_r + P(rho)_r from eta and eta_r."""
    n, mb = params.n, params.m_b
    v = params.v_plus + eta
    rho = 1.0 / v
    u = mb * r ** (1 - n) * v
    u_r = mb * ((1 - n) * r ** (-n) * v + r ** (1 - n) * eta_r)
    rho_r = -eta_r * rho**2
    L = rho * u * u_r + params.gamma * params.K * rho ** (params.gamma - 1) * rho_r
    return rho, u, u_r, L


def _tail_fit(r, eta, eta_r, u):
    mask = r >= 0.5 * (r[0] + r[-1])
    out = {}
    for name, vals in (("eta", eta), ("eta_r", eta_r), ("u_tilde", u)):
        y = np.abs(vals[mask])
        if np.all(y > 0):
            slope, intercept = np.polyfit(np.log(r[mask]), np.log(y), 1)
            out[name] = {"exponent": float(slope), "amplitude": float(np.exp(intercept))}
        else:
            out[name] = {"exponent": float("nan"), "amplitude": 0.0}
    return out


def ode_residual(r, eta, F, params: Parameters) -> float:
    """Weighted sup of eta_r - (-(n kappa/m_b) r^(n-1) eta + F), with eta_r taken
    from a cubic spline of eta in w = r^n (independent of the closed formula)."""
    n = params.n
    w = r**n
    deta_dr = CubicSpline(w, eta)(w, 1) * n * r ** (n - 1)
    rhs = -n * params.kappa / params.m_b * r ** (n - 1) * eta + F
    return float(np.max(r ** (1 - n) * np.abs(deta_dr - rhs)))


def solve_stationary(params: Parameters, grid: RadialGrid | None = None, tol: float = 1e-10,
                     max_iter: int = 200, theta: float = 2e-3, strict: bool = False,
                     polish: int = 5):
    """Iterate the fixed-point map to tolerance ``tol`` in the X norm.

    Returns ``(StationaryProfile, IterationReport)``. Leaving the ball
    ||eta||_X <= v_+/4 is reported (and raised only when ``strict``).
    """
    grid = grid or RadialGrid()
    if params.u_b + abs(params.eta_b) > 0.5 * params.v_plus:
        warnings.warn("boundary data far from the small-data regime; contraction not expected",
                      RuntimeWarning, stacklevel=2)
    s = _Solver(grid.nodes, params, theta)
    n = params.n
    eta = s.initial()
    distances = []
    for it in range(1, max_iter + 1):
        try:
            new = s.T(eta)
        except DomainError as exc:
            raise StationaryNonConvergence(f"iterate left v > 0 at iteration {it}: {exc}",
                                           distances) from exc
        d = x_norm(new - eta, s.r, n)
        distances.append(d)
        eta = new
        if not np.isfinite(d) or (it > 5 and d > 1e3 * distances[0]):
            raise StationaryNonConvergence(f"iteration diverged at step {it}", distances)
        if d <= tol:
            break
    else:
        raise StationaryNonConvergence(f"no convergence in {max_iter} iterations "
                                       f"(last distance {distances[-1]:.3e})", distances)
    n_main = len(distances)
    # Polish down to the rounding floor. In the far field eta_r is a small
    # difference of two large terms, so the X-norm tolerance alone leaves
    # iteration error that swamps the sign of eta_r there.
    for _ in range(polish):
        new = s.T(eta)
        d = x_norm(new - eta, s.r, n)
        eta = new
        if d >= 0.5 * distances[-1]:
            distances.append(d)
            break
        distances.append(d)

    F = s.F(eta)
    eta_r = -n * s.a * s.r ** (n - 1) * eta + F
    fp_res = x_norm(s.T(eta) - eta, s.r, n)
    ode_res = ode_residual(s.r, eta, F, params)
    ball = x_norm(eta, s.r, n)
    v = params.v_plus + eta
    vol_ok = bool(np.all((v >= 0.75 * params.v_plus) & (v <= 1.25 * params.v_plus)))
    in_ball = ball <= params.v_plus / 4
    if not in_ball:
        msg = f"||eta||_X = {ball:.3e} exceeds v_+/4 = {params.v_plus / 4:.3e}"
        if strict:
            raise RegimeViolation(msg)
        log.warning(msg)
    ratios = [b / a_ for a_, b in zip(distances[:n_main - 1], distances[1:n_main]) if a_ > 0]
    # the first few steps carry the boundary-layer transient; use the later ones
    ratio = float(np.median(ratios[1:])) if len(ratios) > 1 else (ratios[0] if ratios else 0.0)

    k = s.out_idx
    r = grid.nodes
    rho, u, u_r, L = derived_fields(params, r, eta[k], eta_r[k])
    profile = StationaryProfile(
        params=params, grid=grid, eta=eta[k].copy(), eta_r=eta_r[k].copy(),
        rho_tilde=rho, u_tilde=u, u_tilde_r=u_r, L_tilde=L,
        tail_fit=_tail_fit(r, eta[k], eta_r[k], u),
        r_fine=s.r, eta_fine=eta, eta_r_fine=eta_r,
    )
    profile.tail_fit["A"] = tail_amplitude(s.r, eta, n)
    # boundary values are exact by construction of the kernel recursion and the flux identity
    profile.eta[0] = params.eta_b
    profile.u_tilde[0] = params.u_b
    report = IterationReport(
        iterations=len(distances), distances=distances, contraction_ratio=ratio,
        fixed_point_residual=fp_res, ode_residual=ode_res, ball_norm=ball,
        in_ball=in_ball, volume_bounds_ok=vol_ok,
    )
    return profile, report


def fixed_point_map(eta: RadialField, params: Parameters) -> RadialField:
    """One application of T on the field's own grid (no refinement)."""
    r = eta.grid.nodes
    n = params.n
    a = params.kappa / params.m_b
    kernel = ExpKernelIntegrator(r**n, a)
    g = _F(r, eta.values, params) / (n * r ** (n - 1))
    return RadialField(eta.grid, kernel.running(g, params.eta_b))


# -- classification -----------------------------------------------------------

@dataclass(frozen=True)
class InteriorMinimum:
    r_star: float
    rho_min: float
    kind: str = "InteriorMinimum"


@dataclass(frozen=True)
class MonotoneIncreasing:
    kind: str = "MonotoneIncreasing"


def _quadratic_root(x, y):
    c = np.polyfit(x - x[1], y, 2)
    roots = np.roots(c) if abs(c[0]) > 0 else np.array([-c[2] / c[1]])
    roots = roots[np.isreal(roots)].real + x[1]
    inside = roots[(roots >= x[0]) & (roots <= x[2])]
    if inside.size == 0:
        return float(x[1] - y[1] * (x[2] - x[0]) / (y[2] - y[0]))
    return float(inside[0])


def classify_density_profile(profile: StationaryProfile, deadband: float = 1e-12):
    """InteriorMinimum (rho decreasing then increasing) or MonotoneIncreasing.

    The test runs on the sign of eta_r, since rho_r = -rho^2 eta_r; the same
    r_* is therefore the interior maximum of eta.
    """
    if profile.r_fine is not None:
        r, er, eta = profile.r_fine, profile.eta_r_fine, profile.eta_fine
    else:
        r, er, eta = profile.r, profile.eta_r, profile.eta
    scale = np.max(np.abs(er))
    keep = np.abs(er) > deadband * scale
    signs = np.sign(er[keep])
    idx = np.flatnonzero(keep)
    flips = np.flatnonzero(np.diff(signs) != 0)
    if flips.size == 0:
        if signs[0] < 0:
            return MonotoneIncreasing()
        raise ClassificationError("eta increasing everywhere: no decay toward the far field")
    if flips.size > 1:
        raise ClassificationError(f"{flips.size} sign changes of rho_r")
    if not (signs[flips[0]] > 0 and signs[flips[0] + 1] < 0):
        raise ClassificationError("rho_r changes sign from + to -, an interior maximum")
    j = idx[flips[0]]
    lo = max(j - 1, 0) if j + 2 >= len(r) else j
    sel = np.arange(lo, lo + 3)
    r_star = _quadratic_root(r[sel], er[sel])
    i_max = int(np.argmax(eta))
    if not (r[max(i_max - 1, 0)] <= r_star <= r[min(i_max + 1, len(r) - 1)]):
        raise ClassificationError("sign change of eta_r does not match the maximum of eta")
    eta_star = np.interp(r_star, r, eta)
    return InteriorMinimum(r_star=r_star, rho_min=float(1.0 / (profile.params.v_plus + eta_star)))


# -- decay diagnostics --------------------------------------------------------

@dataclass
class DecayReport:
    weighted_sups: dict
    normalized_constants: dict
    slopes: dict
    R_emp: float | None

    def as_dict(self):
        return {"weighted_sups": self.weighted_sups, "normalized_constants": self.normalized_constants,
                "slopes": self.slopes, "R_emp": self.R_emp}


def tail_positivity_radius(r, eta, eta_r) -> float | None:
    """Smallest node beyond which eta > 0 and eta_r < 0 hold at every node."""
    good = (eta > 0) & (eta_r < 0)
    if not good[-1]:
        return None
    bad = np.flatnonzero(~good)
    return float(r[0] if bad.size == 0 else r[bad[-1] + 1])


def decay_report(profile: StationaryProfile) -> DecayReport:
    p = profile.params
    n, r = p.n, profile.r
    djump = abs(p.rho_b - p.rho_plus)
    sups = {
        "r^(n-1)|u|": float(np.max(r ** (n - 1) * np.abs(profile.u_tilde))),
        "r^(2n-2)|rho-rho_+|": float(np.max(r ** (2 * n - 2) * np.abs(profile.rho_tilde - p.rho_plus))),
        "r^n|u_r|": float(np.max(r**n * np.abs(profile.u_tilde_r))),
        "r^(2n-1)|rho_r|": float(np.max(r ** (2 * n - 1) * np.abs(profile.rho_tilde_r))),
    }
    scales = {
        "r^(n-1)|u|": p.u_b,
        "r^(2n-2)|rho-rho_+|": djump + p.rho_plus ** (2 - p.gamma) * p.u_b**2,
        "r^n|u_r|": p.u_b + p.rho_plus ** (p.gamma - 1) * djump,
        "r^(2n-1)|rho_r|": p.rho_plus**2 * p.u_b + p.rho_plus**p.gamma * djump / p.u_b,
    }
    consts = {k: sups[k] / scales[k] for k in sups}
    fit = _tail_fit(r, profile.eta, profile.eta_r, profile.u_tilde)
    slopes = {k: v["exponent"] for k, v in fit.items()}
    return DecayReport(sups, consts, slopes, tail_positivity_radius(r, profile.eta, profile.eta_r))


# -- weighted kernel bound ------------------------------------------------------

def check_weighted_kernel_bound(f: RadialField, ell: int, params: Parameters) -> dict:
    """max_r r^l |int_1^r exp(-kappa (r^n - s^n)/m_b) f ds| / (rho_+^-gamma u_b sup r^l |f|)."""
    n = params.n
    if not 1 <= ell <= 3 * n - 3:
        raise ValueError(f"ell must lie in [1, {3 * n - 3}]")
    r = f.grid.nodes
    sup_f = float(np.max(r**ell * np.abs(f.values)))
    if sup_f == 0:
        return {"ratio": 0.0, "lhs_max": 0.0, "sup_f": 0.0}
    kernel = ExpKernelIntegrator(r**n, params.kappa / params.m_b)
    J = kernel.running(f.values / (n * r ** (n - 1)))
    lhs = r**ell * np.abs(J)
    scale = params.rho_plus ** (-params.gamma) * params.u_b * sup_f
    return {"ratio": float(lhs.max() / scale), "lhs_max": float(lhs.max()), "sup_f": sup_f}
