"""Product quadrature against the one-sided exponential kernel exp(-a (w_k - w)).

The stationary representation formula and the weighted kernel bound both need
running integrals

    J(w_k) = J_0 exp(-a (w_k - w_0)) + int_{w_0}^{w_k} exp(-a (w_k - w)) g(w) dw

where the kernel can be far narrower than the mesh. ``g`` is replaced by a local
quadratic interpolant on each cell and the kernel moments are integrated exactly,
so no exponential is ever evaluated with a positive argument.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import gammainc


def kernel_moments(h: np.ndarray, a: float) -> np.ndarray:
    """Moments int_0^h exp(-a s) s^k ds for k = 0, 1, 2; shape (3, len(h))."""
    h = np.asarray(h, dtype=float)
    z = a * h
    out = np.empty((3,) + h.shape)
    for k in range(3):
        out[k] = math.factorial(k) / a ** (k + 1) * gammainc(k + 1, z)
    return out


def _lagrange_weights(s_nodes: np.ndarray, moments: np.ndarray) -> np.ndarray:
    """Integrate the three Lagrange basis polynomials (in s) against the kernel.

    ``s_nodes`` has shape (3, m): s-coordinates of the interpolation nodes for each
    cell. Returns weights of shape (3, m).
    """
    M0, M1, M2 = moments
    w = np.empty_like(s_nodes)
    for i in range(3):
        a_, b_ = [s_nodes[j] for j in range(3) if j != i]
        denom = (s_nodes[i] - a_) * (s_nodes[i] - b_)
        # (s - a)(s - b) = s^2 - (a + b) s + a b
        w[i] = (M2 - (a_ + b_) * M1 + a_ * b_ * M0) / denom
    return w


class ExpKernelIntegrator:
    """Precomputed cell weights for running exponential-kernel integrals on nodes ``w``."""

    def __init__(self, w: np.ndarray, a: float):
        w = np.asarray(w, dtype=float)
        if len(w) < 3:
            raise ValueError("need at least 3 nodes")
        if not np.all(np.diff(w) > 0):
            raise ValueError("nodes must be strictly increasing")
        self.w = w
        self.a = float(a)
        h = np.diff(w)
        self.decay = np.exp(-self.a * h)
        m = len(h)
        # cell j = [w_j, w_{j+1}], interpolate through (j-1, j, j+1); first cell uses (0, 1, 2)
        idx = np.empty((3, m), dtype=int)
        idx[0] = np.arange(1, m + 1)  # right end, s = 0
        idx[1] = np.arange(0, m)  # left end, s = h
        idx[2] = np.arange(-1, m - 1)
        idx[2, 0] = 2
        s_nodes = w[idx[0]] - w[idx]
        self.idx = idx
        self.weights = _lagrange_weights(s_nodes, kernel_moments(h, self.a))

    def cell_integrals(self, g: np.ndarray) -> np.ndarray:
        return np.sum(self.weights * g[self.idx], axis=0)

    def running(self, g: np.ndarray, J0: float = 0.0) -> np.ndarray:
        c = self.cell_integrals(np.asarray(g, dtype=float))
        J = np.empty(len(self.w))
        J[0] = J0
        acc = J0
        decay = self.decay
        for j in range(len(c)):
            acc = decay[j] * acc + c[j]
            J[j + 1] = acc
        return J
