"""Parameters, constitutive law, radial grids and quadrature helpers."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.integrate import cumulative_simpson, simpson


class DomainError(ValueError):
    """Raised when a thermodynamic argument leaves its domain (rho <= 0, v <= 0)."""


@dataclass(frozen=True)
class Parameters:
    n: int = 2
    gamma: float = 2.0
    K: float = 1.0
    mu: float = 1.0
    rho_plus: float = 1.0
    rho_b: float = 1.0025
    u_b: float = 0.05

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n}")
        if self.gamma < 1:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")
        for name in ("K", "mu", "rho_plus", "rho_b"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not self.u_b > 0:
            raise ValueError(f"u_b must be > 0 (inflow through r = 1), got {self.u_b}")

    @property
    def m_b(self) -> float:
        return self.rho_b * self.u_b

    @property
    def v_plus(self) -> float:
        return 1.0 / self.rho_plus

    @property
    def v_b(self) -> float:
        return 1.0 / self.rho_b

    @property
    def eta_b(self) -> float:
        return self.v_b - self.v_plus

    @property
    def kappa(self) -> float:
        return kappa(self)

    def regime_flags(self) -> dict:
        """Smallness conditions of the stability theory, evaluated but not enforced."""
        return {
            "density_jump_le_ub2": abs(self.rho_b - self.rho_plus) <= self.u_b**2 * (1 + 1e-12),
            "mb_le_kappa": self.m_b <= self.kappa,
            "ub_over_rho_plus_gamma": self.u_b / self.rho_plus**self.gamma,
            "smallness": abs(self.eta_b) + self.u_b,
            "gamma_gt_1": self.gamma > 1,
        }

    def replace(self, **changes) -> "Parameters":
        values = {k: getattr(self, k) for k in ("n", "gamma", "K", "mu", "rho_plus", "rho_b", "u_b")}
        values.update(changes)
        return Parameters(**values)


def pressure_of_density(rho, params: Parameters):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise DomainError("density must be positive")
    out = params.K * rho**params.gamma
    return out if out.ndim else float(out)


def pressure_of_volume(v, params: Parameters):
    """Return ``(p, dp_dv)`` for p(v) = K v^-gamma."""
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0):
        raise DomainError("specific volume must be positive")
    p = params.K * v ** (-params.gamma)
    dp = -params.gamma * p / v
    if p.ndim == 0:
        return float(p), float(dp)
    return p, dp


def d2p_dv2(v, params: Parameters):
    g = params.gamma
    return g * (g + 1) * params.K * np.asarray(v, dtype=float) ** (-g - 2)


def kappa(params: Parameters) -> float:
    # -p'(v_+) / (n mu) = gamma K rho_+^(gamma+1) / (n mu)
    return params.gamma * params.K * params.rho_plus ** (params.gamma + 1) / (params.n * params.mu)


@dataclass(frozen=True)
class RadialGrid:
    """Nodes on [1, r_max].

    ``spacing="uniform"`` gives constant dr. ``spacing="geometric"`` places the
    nodes uniformly in log r, which keeps the relative resolution r/dr constant
    and resolves the inflow boundary layer at r = 1.
    """

    r_max: float = 200.0
    N: int = 4097
    spacing: str = "uniform"
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.N < 3:
            raise ValueError("a radial grid needs at least 3 nodes")
        if not self.r_max > 1:
            raise ValueError("r_max must exceed 1")
        if self.spacing == "uniform":
            nodes = np.linspace(1.0, self.r_max, self.N)
        elif self.spacing == "geometric":
            nodes = np.exp(np.linspace(0.0, np.log(self.r_max), self.N))
        else:
            raise ValueError(f"unknown spacing {self.spacing!r}")
        nodes[0], nodes[-1] = 1.0, self.r_max
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def r(self) -> np.ndarray:
        return self.nodes

    @property
    def dr(self) -> float:
        """Smallest cell width (the uniform spacing for uniform grids)."""
        return float(np.min(np.diff(self.nodes)))

    @cached_property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    def refined(self) -> "RadialGrid":
        return RadialGrid(self.r_max, 2 * self.N - 1, self.spacing)


@dataclass(frozen=True)
class RadialField:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.nodes.shape:
            raise ValueError("field length does not match grid")
        if not np.all(np.isfinite(values)):
            raise ValueError("field has non-finite values")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: RadialGrid, f) -> "RadialField":
        return cls(grid, f(grid.nodes))

    def derivative(self) -> "RadialField":
        return differentiate(self)

    def __len__(self):
        return len(self.values)


def diff_nodes(values: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Second-order derivative on (possibly nonuniform) nodes, one-sided at the ends."""
    if len(r) < 3:
        raise ValueError("need at least 3 nodes to differentiate")
    return np.gradient(values, r, edge_order=2)


def differentiate(field: RadialField) -> RadialField:
    return RadialField(field.grid, diff_nodes(field.values, field.grid.nodes))


def integrate_nodes(values: np.ndarray, r: np.ndarray, k: float = 0.0) -> float:
    """Composite Simpson quadrature of f r^k over the nodes."""
    y = values * r**k if k else values
    return float(simpson(y, x=r))


def integrate(field: RadialField, k: float = 0.0) -> float:
    """Quadrature of the integral of f(r) r^k over [1, r_max]."""
    return integrate_nodes(field.values, field.grid.nodes, k)


def cumulative_nodes(values: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Running integral from r[0], zero at the first node."""
    return cumulative_simpson(values, x=r, initial=0.0)
