"""Acceptance suite: one function per criterion, each returning a CriterionResult.

Expensive runs (default stationary profile, zero-perturbation and perturbed
evolutions) are cached per process so criteria sharing a run compute it once.
"""
from __future__ import annotations

import filecmp
import itertools
import os
import subprocess
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .core import Parameters, RadialField, RadialGrid
from .energy import (
    C_HARDY,
    energy_report,
    hardy_check,
    lagrangian_family,
    stability_summary,
    weighted_sobolev_check,
)
from .evolution import FluidState, Perturbation, SchemeConfig, build_initial_data, run, step
from .lagrangian import boundary_identity_residual, continuity_residual, invert_coordinate, mass_coordinate
from .oracle import oracle_backward_integrate
from .stationary import (
    InteriorMinimum,
    MonotoneIncreasing,
    check_weighted_kernel_bound,
    classify_density_profile,
    decay_report,
    solve_stationary,
)

U_B = 0.05
# First validated build of the default perturbed run (t_end = 100, N = 4097).
FROZEN_C_EMP = 3.0855e-3


@dataclass
class CriterionResult:
    cid: int
    key: str
    passed: bool
    summary: str
    measured: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.cid:>2} {self.key:<14} {self.summary}"


def grid_points():
    for n, gamma, rho_plus in itertools.product((2, 3), (1.4, 2.0), (0.5, 1.0)):
        yield Parameters(n=n, gamma=gamma, rho_plus=rho_plus, rho_b=rho_plus + U_B**2, u_b=U_B)


def default_params() -> Parameters:
    return Parameters(rho_b=1.0 + U_B**2, u_b=U_B)


def default_grid(N: int = 4097) -> RadialGrid:
    return RadialGrid(r_max=200.0, N=N, spacing="geometric")


@lru_cache(maxsize=None)
def _profile(params: Parameters, N: int = 4097):
    return solve_stationary(params, default_grid(N))


@lru_cache(maxsize=None)
def _zero_run(N: int, t_end: float = 50.0):
    p = default_params()
    prof, _ = _profile(p, N)
    scheme = SchemeConfig(t_end=t_end, snapshot_interval=1.0, grid=default_grid(N))
    return run(build_initial_data(prof, Perturbation(amplitude=0.0)), scheme, p, prof)


@lru_cache(maxsize=None)
def _perturbed_run():
    p = default_params()
    prof, _ = _profile(p)
    scheme = SchemeConfig(t_end=100.0, snapshot_interval=0.1, grid=default_grid())
    t0 = time.perf_counter()
    traj = run(build_initial_data(prof, Perturbation(amplitude=0.01)), scheme, p, prof)
    report = energy_report(traj, prof)
    elapsed = time.perf_counter() - t0
    return traj, report, elapsed


# -- criteria ---------------------------------------------------------------------

def criterion_oracle() -> CriterionResult:
    worst_rel, worst_time = 0.0, 0.0
    for p in grid_points():
        t0 = time.perf_counter()
        prof, _ = solve_stationary(p, default_grid())
        dt = time.perf_counter() - t0
        ref = oracle_backward_integrate(p, default_grid()).values
        rel = float(np.max(np.abs(prof.eta - ref)) / np.max(np.abs(ref)))
        worst_rel, worst_time = max(worst_rel, rel), max(worst_time, dt)
    ok = worst_rel <= 1e-6 and worst_time < 5.0
    return CriterionResult(1, "oracle", ok,
                           f"max rel sup diff {worst_rel:.2e} (<= 1e-6), slowest solve {worst_time:.2f} s (< 5 s)",
                           {"max_rel": worst_rel, "max_time": worst_time})


def criterion_ode_residual() -> CriterionResult:
    worst = max(_profile(p)[1].ode_residual for p in grid_points())
    return CriterionResult(2, "ode-residual", worst <= 1e-8,
                           f"max weighted residual {worst:.2e} (<= 1e-8)", {"max_residual": worst})


def criterion_decay() -> CriterionResult:
    worst = 0.0
    ok = True
    for p in grid_points():
        slopes = decay_report(_profile(p)[0]).slopes
        n = p.n
        targets = {"eta": (-2 * (n - 1), 0.15), "eta_r": (-(2 * n - 1), 0.15), "u_tilde": (-(n - 1), 0.1)}
        for name, (target, tol) in targets.items():
            err = abs(slopes[name] - target)
            worst = max(worst, err / tol)
            ok &= err <= tol
    return CriterionResult(3, "decay", ok, f"worst slope error {worst:.3f} of tolerance",
                           {"worst_fraction_of_tolerance": worst})


def criterion_classification() -> CriterionResult:
    ok = True
    bad = []
    r_emp_max = 0.0
    for p in grid_points():
        for sign, expected in ((-1, MonotoneIncreasing), (0, InteriorMinimum), (1, InteriorMinimum)):
            q = p.replace(rho_b=p.rho_plus + sign * p.u_b**2)
            prof, _ = _profile(q)
            cls = classify_density_profile(prof)
            rep = decay_report(prof)
            good = isinstance(cls, expected) and rep.R_emp is not None and rep.R_emp < prof.grid.r_max
            if isinstance(cls, InteriorMinimum):
                good &= cls.r_star > 1.0
            if not good:
                bad.append((q.n, q.gamma, q.rho_plus, sign))
            else:
                r_emp_max = max(r_emp_max, rep.R_emp)
            ok &= good
    return CriterionResult(4, "classification", ok,
                           f"24 cases, {len(bad)} mismatches, max R_emp {r_emp_max:.3f}",
                           {"mismatches": bad, "max_R_emp": r_emp_max})


def criterion_fixed_point() -> CriterionResult:
    coarse = float(np.max(_zero_run(4097).gap))
    fine = float(np.max(_zero_run(8193).gap))
    ratio = coarse / fine if fine > 0 else float("inf")
    ok = coarse <= 1e-6 and ratio >= 3.0
    return CriterionResult(5, "fixed-point", ok,
                           f"max gap on [0, 50] {coarse:.2e} (<= 1e-6), shrink under doubling {ratio:.2f}x (>= 3)",
                           {"gap_N4097": coarse, "gap_N8193": fine, "ratio": ratio})


def criterion_stability() -> CriterionResult:
    traj, _, elapsed = _perturbed_run()
    times, gap = traj.times, traj.gap
    factor = float(gap[-1] / gap[0])
    rm = traj.running_max_gap()[times >= 10.0]
    monotone = bool(np.all(np.diff(rm) <= 0))
    ok = factor <= 0.1 and monotone and elapsed < 120.0
    return CriterionResult(6, "stability", ok,
                           f"gap(100)/gap(0) = {factor:.3e} (<= 0.1), running max non-increasing after t=10: "
                           f"{monotone}, runtime {elapsed:.1f} s (< 120 s)",
                           {"decay_factor": factor, "monotone": monotone, "runtime": elapsed})


def criterion_energy_bound() -> CriterionResult:
    traj, report, _ = _perturbed_run()
    C = report.C_emp
    t = report.times
    last = report.ME2[-1] - np.interp(t[-1] - 10.0, t, report.ME2)
    frac = float(last / report.ME2[-1])
    ok = bool(np.isfinite(C)) and C <= 1.1 * FROZEN_C_EMP and frac <= 0.01
    return CriterionResult(7, "energy-bound", ok,
                           f"C_emp {C:.4e} (<= 1.1 x {FROZEN_C_EMP:.4e}), M_E^2 increment over the last ten "
                           f"time units {100 * frac:.3f}% (<= 1%)",
                           {"C_emp": C, "ME2_last_decade_fraction": frac})


def criterion_dissipativity() -> CriterionResult:
    traj, report, _ = _perturbed_run()
    ratio = float(report.E_total[-1] / report.E_total[0])
    verdict = stability_summary(traj, report)
    ok = ratio <= 1.05 and ratio <= 0.2 and verdict.applicable
    return CriterionResult(8, "dissipativity", ok,
                           f"int E dx (t=100) / (t=0) = {ratio:.4f} (<= 1.05 and <= 0.2)", {"ratio": ratio})


def criterion_inequalities() -> CriterionResult:
    worst_hardy, worst_slack = 0.0, np.inf
    for n in (2, 3):
        p = Parameters(n=n)
        g = default_grid()
        state = FluidState.from_arrays(0.0, g, np.ones(g.N), np.zeros(g.N))
        for k in range(1, 5):
            f = lagrangian_family(state, p, k)
            worst_hardy = max(worst_hardy, hardy_check(f, state, p).ratio)
            for kk in (2 * (n - 2), 2 * (n - 1)):
                for eps in (0.1, 0.5, 0.9):
                    worst_slack = min(worst_slack, weighted_sobolev_check(f, state, p, kk, eps).slack)
    kernel = []
    for ub in (0.1, 0.05, 0.025):
        p = Parameters(rho_b=1.0 + ub**2, u_b=ub)
        g = default_grid()
        kernel.append(check_weighted_kernel_bound(RadialField(g, g.nodes**-1.0), 1, p)["ratio"])
    variation = max(kernel) / min(kernel)
    ok = worst_hardy <= C_HARDY and worst_slack >= 0 and variation < 2.0
    return CriterionResult(9, "inequalities", ok,
                           f"max Hardy ratio {worst_hardy:.3f} (<= {C_HARDY}), min Sobolev slack {worst_slack:.3e} "
                           f"(>= 0), kernel ratio variation {variation:.3f}x (< 2)",
                           {"hardy": worst_hardy, "sobolev_slack": float(worst_slack), "kernel": kernel})


def _orders(values):
    v = np.asarray(values)
    return np.log2(v[:-1] / v[1:])


def criterion_lagrangian() -> CriterionResult:
    p = default_params()
    # round trip and boundary identity on perturbed states at t = 3
    residuals = []
    roundtrip = 0.0
    for N in (1025, 2049, 4097):
        prof, _ = _profile(p, N)
        g = default_grid(N)
        traj = run(build_initial_data(prof, Perturbation()), SchemeConfig(t_end=3.0, snapshot_interval=3.0, grid=g),
                   p, prof)
        s = traj.snapshots[-1]
        residuals.append(boundary_identity_residual(s, prof, p)["residual"])
        if N == 4097:
            X = mass_coordinate(s, p)
            xs = X.values[::64]
            roundtrip = max(abs(invert_coordinate(x, s, p, X) - r) for x, r in zip(xs, g.nodes[::64]))
            mids = 0.5 * (X.values[:-1] + X.values[1:])[::64]
            slope = s.rho.values * g.nodes ** (p.n - 1)
            spline = CubicHermiteSpline(g.nodes, X.values, slope)
            roundtrip = max(roundtrip, max(abs(float(spline(invert_coordinate(x, s, p, X))) - x) for x in mids))
            state, profile = s, prof
    bd_orders = _orders(residuals)
    dts = (0.04, 0.02, 0.01)
    cont = [float(np.max(np.abs(continuity_residual(state, step(state, dt, p, profile), profile, p)[1:-1])))
            for dt in dts]
    ct_orders = _orders(cont)
    ok = roundtrip <= 1e-10 and np.all(bd_orders >= 0.9) and np.all(ct_orders >= 0.9)
    return CriterionResult(10, "lagrangian", bool(ok),
                           f"round trip {roundtrip:.1e} (<= 1e-10), boundary identity orders "
                           f"{np.round(bd_orders, 2).tolist()}, continuity residual orders in dt "
                           f"{np.round(ct_orders, 2).tolist()} (each >= 0.9)",
                           {"roundtrip": roundtrip, "boundary_residuals": residuals, "continuity_residuals": cont})


def criterion_determinism(t_end: float = 5.0) -> CriterionResult:
    with tempfile.TemporaryDirectory() as tmp:
        # the same command twice; the manifest echoes the output path, so both
        # runs write to one path and the first result is moved aside
        out = os.path.join(tmp, "run")
        dirs = [os.path.join(tmp, "a"), os.path.join(tmp, "b")]
        env = {k: v for k, v in os.environ.items() if k != "NSINFLOW_OUT"}
        for d in dirs:
            subprocess.run([sys.executable, "-m", "nsinflow.cli", "evolve", "--t-end", str(t_end), "--out", out],
                           check=True, env=env, capture_output=True)
            os.rename(out, d)
        names = sorted(_walk(dirs[0]))
        same = names == sorted(_walk(dirs[1])) and all(
            filecmp.cmp(os.path.join(dirs[0], f), os.path.join(dirs[1], f), shallow=False) for f in names)
    return CriterionResult(11, "determinism", same,
                           f"{len(names)} files from two evolve invocations (t_end={t_end:g}) byte-identical: {same}",
                           {"files": len(names)})


def _walk(root):
    for base, _, files in os.walk(root):
        for f in files:
            yield os.path.relpath(os.path.join(base, f), root)


CRITERIA = {
    1: ("oracle", criterion_oracle),
    2: ("ode-residual", criterion_ode_residual),
    3: ("decay", criterion_decay),
    4: ("classification", criterion_classification),
    5: ("fixed-point", criterion_fixed_point),
    6: ("stability", criterion_stability),
    7: ("energy-bound", criterion_energy_bound),
    8: ("dissipativity", criterion_dissipativity),
    9: ("inequalities", criterion_inequalities),
    10: ("lagrangian", criterion_lagrangian),
    11: ("determinism", criterion_determinism),
}

# criteria that share a cached run execute in the same worker
GROUPS = [(1, 2, 3, 4), (5,), (6, 7, 8), (9,), (10,), (11,)]


def select(only=None):
    if not only:
        return sorted(CRITERIA)
    chosen = set()
    for token in only:
        token = str(token).strip()
        if token.isdigit() and int(token) in CRITERIA:
            chosen.add(int(token))
            continue
        hits = [cid for cid, (key, _) in CRITERIA.items() if key == token or key.startswith(token)]
        if not hits:
            valid = ", ".join(f"{c}:{k}" for c, (k, _) in CRITERIA.items())
            raise ValueError(f"unknown criterion {token!r}; valid: {valid}")
        chosen.update(hits)
    return sorted(chosen)


def _run_ids(ids):
    out = []
    for cid in ids:
        try:
            out.append(CRITERIA[cid][1]())
        except Exception as exc:  # a crash is a failure of that criterion, not of the suite
            out.append(CriterionResult(cid, CRITERIA[cid][0], False, f"error: {type(exc).__name__}: {exc}"))
    return out


def run_all(only=None, jobs: int = 1):
    ids = select(only)
    batches = [tuple(c for c in g if c in ids) for g in GROUPS]
    batches = [b for b in batches if b]
    if jobs <= 1 or len(batches) == 1:
        results = [r for b in batches for r in _run_ids(b)]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = [r for rs in pool.map(_run_ids, batches) for r in rs]
    return sorted(results, key=lambda r: r.cid)
