"""Time-dependent radial solver for the inflow problem.

Semi-implicit (IMEX) Euler on a fixed Eulerian grid:

* continuity: explicit, conservative finite volumes on the flux r^(n-1) rho u
  with centred face values;
* momentum: explicit centred u u_r, pressure gradient from the already
  updated density, and the viscous term (mu/rho) d/dr[(r^(n-1) u)_r / r^(n-1)]
  taken implicitly through one tridiagonal solve per step.

Dirichlet data (rho_b, u_b) at r = 1; at r_max the stationary profile's values
by default (see ``SchemeConfig.far_field``).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .core import Parameters, RadialField, RadialGrid
from .stationary import StationaryProfile, write_csv


class BlowUpError(RuntimeError):
    def __init__(self, message, t, diagnostics=None):
        super().__init__(message)
        self.t = t
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class Perturbation:
    """Smooth bump a exp(1/((r-c)^2/w^2 - 1)) on (c - w, c + w), zero outside."""

    amplitude: float = 0.01
    center: float = 5.0
    width: float = 2.0

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        z = (r - self.center) / self.width
        out = np.zeros_like(r)
        inside = np.abs(z) < 1
        out[inside] = self.amplitude * np.exp(1.0 / (z[inside] ** 2 - 1.0))
        return out

    @property
    def support(self):
        return (self.center - self.width, self.center + self.width)


@dataclass(frozen=True)
class FluidState:
    t: float
    rho: RadialField
    u: RadialField

    def __post_init__(self):
        if np.any(self.rho.values <= 0):
            raise ValueError("density must be positive at every node")

    @property
    def grid(self) -> RadialGrid:
        return self.rho.grid

    @classmethod
    def from_arrays(cls, t, grid, rho, u):
        return cls(float(t), RadialField(grid, np.array(rho)), RadialField(grid, np.array(u)))


@dataclass(frozen=True)
class SchemeConfig:
    cfl: float = 0.4
    t_end: float = 100.0
    snapshot_interval: float = 0.1
    grid: RadialGrid = field(default_factory=lambda: RadialGrid(spacing="geometric"))
    far_field: str = "stationary"

    def __post_init__(self):
        if not 0 < self.cfl < 1:
            raise ValueError("cfl must lie in (0, 1)")
        if not self.t_end >= 0:
            raise ValueError("t_end must be >= 0")
        if not self.snapshot_interval > 0:
            raise ValueError("snapshot_interval must be > 0")
        if self.far_field not in ("stationary", "rest"):
            raise ValueError("far_field must be 'stationary' or 'rest'")


def build_initial_data(profile: StationaryProfile, perturbation: Perturbation | None = None,
                       delta: float = 1.0) -> FluidState:
    """Stationary profile plus the same bump added to rho and u."""
    perturbation = perturbation or Perturbation(amplitude=0.0)
    grid = profile.grid
    lo, hi = perturbation.support
    if perturbation.amplitude != 0 and (lo < 1.0 + delta or hi > grid.r_max / 2):
        raise ValueError(f"perturbation support [{lo}, {hi}] must lie in "
                         f"[{1.0 + delta}, {grid.r_max / 2}]")
    bump = perturbation(grid.nodes)
    rho = profile.rho_tilde + bump
    if np.any(rho <= 0):
        raise ValueError("perturbed density is not positive")
    return FluidState.from_arrays(0.0, grid, rho, profile.u_tilde + bump)


def sound_speed(rho, params: Parameters):
    return np.sqrt(params.gamma * params.K * rho ** (params.gamma - 1))


def cfl_dt(state: FluidState, params: Parameters, cfl: float) -> float:
    """cfl * min over cells of dr / (|u| + c_s), the local form of cfl dr / max(|u| + c)."""
    rho, u = state.rho.values, state.u.values
    speed = np.abs(u) + sound_speed(rho, params)
    dr = state.grid.widths
    s = np.maximum(speed[:-1], speed[1:])
    return float(cfl * np.min(dr / s))


# -- discrete operators ---------------------------------------------------------

@dataclass
class _Geometry:
    r: np.ndarray
    rn1: np.ndarray  # r^(n-1) at nodes
    face_n1: np.ndarray  # r^(n-1) at cell faces (midpoints)
    volume: np.ndarray  # (r_{i+1/2}^n - r_{i-1/2}^n)/n at interior nodes (0 at ends)
    cm: np.ndarray  # centred first-derivative weights (i-1, i, i+1)
    c0: np.ndarray
    cp: np.ndarray
    h: np.ndarray
    half_span: np.ndarray  # (r_{i+1} - r_{i-1})/2

    @classmethod
    def build(cls, grid: RadialGrid, n: int):
        r = np.array(grid.nodes)
        h = np.diff(r)
        faces = 0.5 * (r[:-1] + r[1:])
        N = len(r)
        volume = np.zeros(N)
        volume[1:-1] = (faces[1:] ** n - faces[:-1] ** n) / n
        cm, c0, cp = (np.zeros(N) for _ in range(3))
        hm, hp = h[:-1], h[1:]
        cm[1:-1] = -hp / (hm * (hm + hp))
        c0[1:-1] = (hp - hm) / (hm * hp)
        cp[1:-1] = hm / (hp * (hm + hp))
        half = np.zeros(N)
        half[1:-1] = 0.5 * (hm + hp)
        return cls(r, r ** (n - 1), faces ** (n - 1), volume, cm, c0, cp, h, half)


@njit(cache=True)
def _advance(rho, u, nsteps, dt, r, rn1, face_n1, volume, cm, c0, cp, h, half,
             gamma, K, mu, rho_b, u_b, rho_far, u_far,
             rho_t0, rho_t1, rho_t2, u_t0, u_t1, u_t2, d0, d1, d2, out_tr_u, out_tr_rho):
    """Advance ``nsteps`` steps in place. Records boundary traces of
    (u - u_tilde)_r and (rho - rho_tilde)_r at r = 1 after every step; the
    stationary traces are passed in as three-point stencil values."""
    N = rho.shape[0]
    flux = np.empty(N - 1)
    p = np.empty(N)
    rhs = np.empty(N)
    a = np.empty(N)
    b = np.empty(N)
    c = np.empty(N)
    for k in range(nsteps):
        # continuity
        for j in range(N - 1):
            flux[j] = face_n1[j] * 0.5 * (rho[j] * u[j] + rho[j + 1] * u[j + 1])
        for i in range(1, N - 1):
            rho[i] = rho[i] - dt * (flux[i] - flux[i - 1]) / volume[i]
            if not rho[i] > 0.0:
                return k, i
        rho[0] = rho_b
        rho[N - 1] = rho_far
        for i in range(N):
            p[i] = K * rho[i] ** gamma
        # momentum: (1 - dt mu/rho L) u^{k+1} = u^k - dt (u u_r + p_r / rho)
        for i in range(1, N - 1):
            ur = cm[i] * u[i - 1] + c0[i] * u[i] + cp[i] * u[i + 1]
            pr = cm[i] * p[i - 1] + c0[i] * p[i] + cp[i] * p[i + 1]
            rhs[i] = u[i] - dt * (u[i] * ur + pr / rho[i])
            s = dt * mu / (rho[i] * half[i])
            # L u = (Q_{i+1/2} - Q_{i-1/2}) / half, Q_{j+1/2} = (r^(n-1) u)_r / r^(n-1) at face j
            wp = 1.0 / (face_n1[i] * h[i])
            wm = 1.0 / (face_n1[i - 1] * h[i - 1])
            a[i] = s * wm * rn1[i - 1]
            b[i] = 1.0 + s * (wp + wm) * rn1[i]
            c[i] = s * wp * rn1[i + 1]
        rhs[1] += a[1] * u_b
        rhs[N - 2] += c[N - 2] * u_far
        # Thomas algorithm on rows 1..N-2 (matrix is -a, b, -c)
        for i in range(2, N - 1):
            m = a[i] / b[i - 1]
            b[i] = b[i] - m * c[i - 1]
            rhs[i] = rhs[i] + m * rhs[i - 1]
        u[N - 2] = rhs[N - 2] / b[N - 2]
        for i in range(N - 3, 0, -1):
            u[i] = (rhs[i] + c[i] * u[i + 1]) / b[i]
        u[0] = u_b
        u[N - 1] = u_far
        out_tr_u[k] = d0 * (u[0] - u_t0) + d1 * (u[1] - u_t1) + d2 * (u[2] - u_t2)
        out_tr_rho[k] = d0 * (rho[0] - rho_t0) + d1 * (rho[1] - rho_t1) + d2 * (rho[2] - rho_t2)
    return nsteps, -1


def _one_sided_weights(r):
    """Second-order one-sided weights for f'(r_0) from r_0, r_1, r_2."""
    h1, h2 = r[1] - r[0], r[2] - r[0]
    return (-(h1 + h2) / (h1 * h2), h2 / (h1 * (h2 - h1)), -h1 / (h2 * (h2 - h1)))


class Stepper:
    """Holds the precomputed geometry for one (grid, params, far-field) triple."""

    def __init__(self, grid: RadialGrid, params: Parameters, profile: StationaryProfile | None = None,
                 far_field: str = "stationary"):
        self.grid = grid
        self.params = params
        self.geom = _Geometry.build(grid, params.n)
        if far_field == "stationary":
            if profile is None:
                raise ValueError("far_field='stationary' needs the stationary profile")
            self.rho_far, self.u_far = float(profile.rho_tilde[-1]), float(profile.u_tilde[-1])
        else:
            self.rho_far, self.u_far = params.rho_plus, 0.0
        if profile is not None:
            self.rho_ref, self.u_ref = profile.rho_tilde, profile.u_tilde
        else:
            self.rho_ref = np.full(grid.N, params.rho_plus)
            self.u_ref = np.zeros(grid.N)
        self.d = _one_sided_weights(self.geom.r)

    def advance(self, rho, u, nsteps, dt, t0=0.0):
        """Advance arrays in place; returns (trace_u, trace_rho) per step."""
        g, p = self.geom, self.params
        tr_u = np.empty(nsteps)
        tr_rho = np.empty(nsteps)
        done, bad = _advance(
            rho, u, nsteps, dt, g.r, g.rn1, g.face_n1, g.volume, g.cm, g.c0, g.cp, g.h, g.half_span,
            float(p.gamma), float(p.K), float(p.mu), float(p.rho_b), float(p.u_b),
            self.rho_far, self.u_far,
            self.rho_ref[0], self.rho_ref[1], self.rho_ref[2],
            self.u_ref[0], self.u_ref[1], self.u_ref[2], *self.d, tr_u, tr_rho)
        if bad >= 0:
            t_fail = t0 + (done + 1) * dt
            raise BlowUpError(f"density lost positivity at r = {g.r[bad]:.6g}, t = {t_fail:.6g}",
                              t_fail, {"node": int(bad), "r": float(g.r[bad]), "step": int(done)})
        if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(u))):
            raise BlowUpError(f"non-finite state before t = {t0 + nsteps * dt:.6g}", t0 + nsteps * dt)
        return tr_u, tr_rho

    def trace(self, rho, u):
        d0, d1, d2 = self.d
        du = d0 * (u[0] - self.u_ref[0]) + d1 * (u[1] - self.u_ref[1]) + d2 * (u[2] - self.u_ref[2])
        dr = (d0 * (rho[0] - self.rho_ref[0]) + d1 * (rho[1] - self.rho_ref[1])
              + d2 * (rho[2] - self.rho_ref[2]))
        return du, dr


def step(state: FluidState, dt: float, params: Parameters, profile: StationaryProfile | None = None,
         far_field: str = "stationary") -> FluidState:
    """One IMEX step; returns a new state."""
    if profile is None:
        far_field = "rest"
    st = Stepper(state.grid, params, profile, far_field)
    rho, u = np.array(state.rho.values), np.array(state.u.values)
    st.advance(rho, u, 1, dt, state.t)
    return FluidState.from_arrays(state.t + dt, state.grid, rho, u)


@dataclass
class Trajectory:
    params: Parameters
    scheme: SchemeConfig
    snapshots: list
    step_times: np.ndarray
    trace_u: np.ndarray  # (u - u_tilde)_r(1, t) per step, including t = 0
    trace_rho: np.ndarray
    gap_rho: np.ndarray  # per snapshot
    gap_u: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @property
    def gap(self) -> np.ndarray:
        return np.maximum(self.gap_rho, self.gap_u)

    def running_max_gap(self) -> np.ndarray:
        """max of the gap over [t, t_end] for every snapshot time t."""
        return np.maximum.accumulate(self.gap[::-1])[::-1]

    def snapshot_to_csv(self, path, index, profile: StationaryProfile):
        s = self.snapshots[index]
        data = np.column_stack([s.grid.nodes, s.rho.values, s.u.values,
                                profile.rho_tilde, profile.u_tilde])
        write_csv(path, ["r", "rho", "u", "rho_tilde", "u_tilde"], data)


def run(initial: FluidState, scheme: SchemeConfig, params: Parameters,
        profile: StationaryProfile | None = None) -> Trajectory:
    """Advance to ``scheme.t_end`` recording a snapshot every ``snapshot_interval``.

    Within each interval the step is the CFL step of the interval's starting
    state, shortened uniformly so that the interval is hit exactly.
    """
    if params.gamma == 1:
        warnings.warn("gamma = 1 time-dependent runs are outside the supported regime",
                      RuntimeWarning, stacklevel=2)
    far_field = scheme.far_field if profile is not None else "rest"
    st = Stepper(initial.grid, params, profile, far_field)
    rho, u = np.array(initial.rho.values), np.array(initial.u.values)
    n_snap = int(math.floor(scheme.t_end / scheme.snapshot_interval + 1e-9))
    snap_times = [k * scheme.snapshot_interval for k in range(n_snap + 1)]
    if scheme.t_end - snap_times[-1] > 1e-9 * max(1.0, scheme.t_end):
        snap_times.append(scheme.t_end)
    snapshots = [FluidState.from_arrays(0.0, initial.grid, rho, u)]
    tu0, tr0 = st.trace(rho, u)
    times, tr_u, tr_rho = [np.zeros(1)], [np.array([tu0])], [np.array([tr0])]
    t = 0.0
    for t_next in snap_times[1:]:
        state = snapshots[-1]
        dt_max = cfl_dt(state, params, scheme.cfl)
        nsteps = max(1, int(math.ceil((t_next - t) / dt_max - 1e-12)))
        dt = (t_next - t) / nsteps
        a, b = st.advance(rho, u, nsteps, dt, t)
        times.append(t + dt * np.arange(1, nsteps + 1))
        tr_u.append(a)
        tr_rho.append(b)
        t = t_next
        snapshots.append(FluidState.from_arrays(t, initial.grid, rho, u))
    gap_rho = np.array([np.max(np.abs(s.rho.values - st.rho_ref)) for s in snapshots])
    gap_u = np.array([np.max(np.abs(s.u.values - st.u_ref)) for s in snapshots])
    return Trajectory(params, scheme, snapshots, np.concatenate(times), np.concatenate(tr_u),
                      np.concatenate(tr_rho), gap_rho, gap_u)
