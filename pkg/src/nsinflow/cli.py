"""Command line entry point: ``nsinflow {stationary,evolve,verify,plot}``.

Configuration comes from an optional flat ``key = value`` file, overridden by
flags (``--rho-plus 0.5`` for key ``rho_plus``). NSINFLOW_OUT overrides the
output directory.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, fields

import numpy as np

from .core import Parameters, RadialGrid
from .stationary import RegimeViolation, StationaryNonConvergence, write_csv

EXIT_OK, EXIT_USAGE, EXIT_BLOWUP, EXIT_NONCONVERGENCE, EXIT_VERIFY = 0, 1, 2, 3, 4

log = logging.getLogger("nsinflow")


@dataclass
class RunConfig:
    n: int = 2
    gamma: float = 2.0
    K: float = 1.0
    mu: float = 1.0
    rho_plus: float = 1.0
    rho_b: float | None = None  # defaults to rho_plus + u_b^2
    u_b: float = 0.05
    N: int = 4097
    r_max: float = 200.0
    spacing: str = "geometric"
    cfl: float = 0.4
    t_end: float = 100.0
    snapshot_interval: float = 0.1
    dump_interval: float = 10.0
    far_field: str = "stationary"
    amplitude: float = 0.01
    center: float = 5.0
    width: float = 2.0
    tol: float = 1e-10
    max_iter: int = 200
    out: str = "nsinflow_out"

    def resolved(self) -> "RunConfig":
        values = asdict(self)
        if values["rho_b"] is None:
            values["rho_b"] = self.rho_plus + self.u_b**2
        return RunConfig(**values)

    def params(self) -> Parameters:
        c = self.resolved()
        return Parameters(n=c.n, gamma=c.gamma, K=c.K, mu=c.mu, rho_plus=c.rho_plus, rho_b=c.rho_b, u_b=c.u_b)

    def grid(self) -> RadialGrid:
        return RadialGrid(r_max=self.r_max, N=self.N, spacing=self.spacing)

    def validate(self):
        self.params()
        self.grid()
        from .evolution import Perturbation, SchemeConfig

        SchemeConfig(cfl=self.cfl, t_end=self.t_end, snapshot_interval=self.snapshot_interval,
                     grid=self.grid(), far_field=self.far_field)
        if not self.dump_interval > 0:
            raise ValueError("dump_interval must be > 0")
        Perturbation(self.amplitude, self.center, self.width)
        return self


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key, raw):
    kind = _FIELD_TYPES[key]
    if isinstance(raw, str):
        raw = raw.strip()
        if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "'\"":
            raw = raw[1:-1]
    if kind == "int":
        value = float(raw)
        if value != int(value):
            raise ValueError(f"{key} must be an integer, got {raw}")
        return int(value)
    if kind in ("float", "float | None"):
        return float(raw)
    return str(raw)


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key not in _FIELD_TYPES:
                raise ValueError(f"unknown key {key!r}; valid keys: {', '.join(_FIELD_TYPES)}")
            values[key] = _coerce(key, raw)
    return values


def parse_config(path=None, overrides: dict | None = None) -> RunConfig:
    values = read_config_file(path) if path else {}
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        if key not in _FIELD_TYPES:
            raise ValueError(f"unknown key {key!r}; valid keys: {', '.join(_FIELD_TYPES)}")
        values[key] = _coerce(key, raw)
    env_out = os.environ.get("NSINFLOW_OUT")
    if env_out:
        values["out"] = env_out
    return RunConfig(**values).resolved().validate()


# -- output helpers -----------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, data):
    with open(path, "w", newline="\n") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _prepare_out(cfg: RunConfig) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    if not os.access(cfg.out, os.W_OK):
        raise OSError(f"output directory {cfg.out} is not writable")
    write_json(os.path.join(cfg.out, "manifest.json"), asdict(cfg))
    return cfg.out


def _solve(cfg: RunConfig):
    from .stationary import solve_stationary

    return solve_stationary(cfg.params(), cfg.grid(), tol=cfg.tol, max_iter=cfg.max_iter)


# -- subcommands ------------------------------------------------------------------

def cmd_stationary(cfg: RunConfig) -> int:
    from .stationary import ClassificationError, classify_density_profile, decay_report

    out = _prepare_out(cfg)
    params = cfg.params()
    try:
        profile, report = _solve(cfg)
    except (StationaryNonConvergence, RegimeViolation) as exc:
        write_json(os.path.join(out, "stationary.json"),
                   {"converged": False, "error": str(exc), "distances": getattr(exc, "distances", []),
                    "regime_flags": params.regime_flags()})
        print(f"stationary solve failed: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    profile.to_csv(os.path.join(out, "profile.csv"))
    try:
        cls = classify_density_profile(profile)
        classification = {"kind": cls.kind, "r_star": getattr(cls, "r_star", None),
                          "rho_min": getattr(cls, "rho_min", None)}
    except ClassificationError as exc:
        classification = {"kind": "unclassified", "error": str(exc)}
    decay = decay_report(profile)
    summary = {
        "converged": True,
        "iterations": report.iterations,
        "distances": report.distances,
        "contraction_ratio": report.contraction_ratio,
        "ode_residual": report.ode_residual,
        "in_ball": report.in_ball,
        "volume_bounds_ok": report.volume_bounds_ok,
        "classification": classification,
        "r_star": classification.get("r_star"),
        "decay_slopes": decay.slopes,
        "decay": decay.as_dict(),
        "regime_flags": params.regime_flags(),
    }
    write_json(os.path.join(out, "stationary.json"), summary)
    print(f"converged in {report.iterations} iterations; {classification['kind']}; "
          f"slopes {', '.join(f'{k} {v:.3f}' for k, v in decay.slopes.items())}")
    return EXIT_OK


def cmd_evolve(cfg: RunConfig) -> int:
    from .energy import compute_constants, energy_report, stability_summary
    from .evolution import BlowUpError, Perturbation, SchemeConfig, build_initial_data, run
    from .lagrangian import LagrangianView

    out = _prepare_out(cfg)
    params = cfg.params()
    try:
        profile, _ = _solve(cfg)
    except (StationaryNonConvergence, RegimeViolation) as exc:
        print(f"stationary solve failed: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    profile.to_csv(os.path.join(out, "profile.csv"))
    scheme = SchemeConfig(cfl=cfg.cfl, t_end=cfg.t_end, snapshot_interval=cfg.snapshot_interval,
                          grid=cfg.grid(), far_field=cfg.far_field)
    initial = build_initial_data(profile, Perturbation(cfg.amplitude, cfg.center, cfg.width))
    try:
        traj = run(initial, scheme, params, profile)
    except BlowUpError as exc:
        write_json(os.path.join(out, "verdict.json"), {"blow_up": True, "t": exc.t, "message": str(exc),
                                                       "diagnostics": exc.diagnostics})
        print(f"blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    report = energy_report(traj, profile)
    cols = ["t", "sup_gap_rho", "sup_gap_u", "NE", "ME_accum", "relative_energy", "D"]
    write_csv(os.path.join(out, "trajectory.csv"), cols,
              np.column_stack([traj.times, traj.gap_rho, traj.gap_u, report.NE, report.ME2,
                               report.E_total, report.D]))
    report.to_csv(os.path.join(out, "energy.csv"))
    snap_dir = os.path.join(out, "snapshots")
    os.makedirs(snap_dir, exist_ok=True)
    times = traj.times
    targets = np.arange(0.0, cfg.t_end + 1e-9, cfg.dump_interval)
    picked = sorted({int(np.argmin(np.abs(times - t))) for t in targets} | {len(times) - 1})
    for idx in picked:
        traj.snapshot_to_csv(os.path.join(snap_dir, f"snapshot_t{times[idx]:09.3f}.csv"), idx, profile)
    LagrangianView.build(traj.snapshots[-1], profile, params).to_csv(os.path.join(out, "lagrangian.csv"))
    verdict = stability_summary(traj, report)
    write_json(os.path.join(out, "verdict.json"), {
        "blow_up": False,
        "verdict": verdict.as_dict(),
        "final_gap": float(traj.gap[-1]),
        "initial_gap": float(traj.gap[0]),
        "steps": int(len(traj.step_times) - 1),
        "constants": compute_constants(params).as_dict(),
    })
    emit_plot_script(out)
    print(f"t = {cfg.t_end:g}: gap {traj.gap[0]:.3e} -> {traj.gap[-1]:.3e}")
    return EXIT_OK


PLOT_TEMPLATE = '''"""Plots for the run in this directory (generated; run with python)."""
import csv
import os

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def load(name):
    with open(os.path.join(HERE, name)) as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {{h: [float(r[i]) for r in body] for i, h in enumerate(header)}}


{blocks}
plt.show()
'''

_PLOT_BLOCKS = {
    "profile.csv": '''p = load("profile.csv")
fig, ax = plt.subplots(1, 2, figsize=(10, 4))
ax[0].semilogx(p["r"], p["rho_tilde"]); ax[0].set_xlabel("r"); ax[0].set_ylabel("rho_tilde")
ax[1].loglog(p["r"], p["u_tilde"]); ax[1].set_xlabel("r"); ax[1].set_ylabel("u_tilde")
''',
    "trajectory.csv": '''tr = load("trajectory.csv")
fig, ax = plt.subplots()
ax.semilogy(tr["t"], tr["sup_gap_rho"], label="rho")
ax.semilogy(tr["t"], tr["sup_gap_u"], label="u")
ax.set_xlabel("t"); ax.set_ylabel("sup gap"); ax.legend()
''',
    "energy.csv": '''en = load("energy.csv")
fig, ax = plt.subplots()
ax.semilogy(en["t"], en["E_total"], label="int E dx")
ax.semilogy(en["t"], en["ME2"], label="M_E^2")
ax.set_xlabel("t"); ax.legend()
''',
}


def emit_plot_script(run_dir) -> str:
    present = [name for name in _PLOT_BLOCKS if os.path.exists(os.path.join(run_dir, name))]
    if not present:
        raise FileNotFoundError(f"no profile/trajectory/energy CSVs in {run_dir}")
    path = os.path.join(run_dir, "plot_run.py")
    with open(path, "w", newline="\n") as fh:
        fh.write(PLOT_TEMPLATE.format(blocks="\n".join(_PLOT_BLOCKS[n] for n in present)))
    return path


def cmd_verify(only=None, jobs: int = 1) -> int:
    from .acceptance import run_all

    results = run_all(only, jobs=jobs)
    for r in results:
        print(r.line(), flush=True)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_OK if not failed else EXIT_VERIFY


# -- argument parsing ---------------------------------------------------------------

def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key = value config file")
    for f in fields(RunConfig):
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None, metavar=f.name.upper(),
                       help=f"default {f.default}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nsinflow", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_config_flags(sub.add_parser("stationary", help="solve for the stationary profile"))
    _add_config_flags(sub.add_parser("evolve", help="run the time-dependent problem"))
    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--only", nargs="+", help="criterion numbers or names (prefixes allowed)")
    v.add_argument("--jobs", type=int, default=1)
    pl = sub.add_parser("plot", help="write a plotting script for a run directory")
    pl.add_argument("run_dir")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "verify":
            return cmd_verify(args.only, args.jobs)
        if args.command == "plot":
            path = emit_plot_script(args.run_dir)
            print(path)
            return EXIT_OK
        overrides = {f.name: getattr(args, f.name) for f in fields(RunConfig)}
        cfg = parse_config(args.config, overrides)
        if args.command == "stationary":
            return cmd_stationary(cfg)
        return cmd_evolve(cfg)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
