"""Error norms, convergence rates and solution diagnostics."""
from __future__ import annotations

import numpy as np

from ..assembly import CoefficientField, assemble_stiffness, gauss_rule, shape_functions
from ..grid import StructuredGrid2D


def compute_errors(u_ref, u_ms, M, A) -> tuple[float, float]:
    """Relative L2 and energy errors ``(eps0, eps1)`` of ``u_ms`` against ``u_ref``."""
    u_ref = np.asarray(u_ref, dtype=float)
    e = u_ref - np.asarray(u_ms, dtype=float)
    n0 = float(u_ref @ (M @ u_ref))
    n1 = float(u_ref @ (A @ u_ref))
    if n0 <= 0 or n1 <= 0:
        raise ValueError("reference solution has zero norm")
    return float(np.sqrt(max(e @ (M @ e), 0.0) / n0)), float(np.sqrt(max(e @ (A @ e), 0.0) / n1))


def convergence_rate(errors) -> list:
    """``|ln e_H - ln e_{H/2}| / ln 2`` between consecutive entries; ``None`` where undefined."""
    errors = list(errors)
    if len(errors) < 2:
        raise ValueError("need at least two errors")
    out = [None]
    for a, b in zip(errors[:-1], errors[1:]):
        if a is None or b is None or not (a > 0 and b > 0) or not np.isfinite(a) or not np.isfinite(b):
            out.append(None)
        else:
            out.append(float(abs(np.log(a) - np.log(b)) / np.log(2.0)))
    return out


class EnergyFunctional:
    """``E[u] = int 1/2 |grad u|^2 + (u^2 - 1)^2 / (4 eps^2)`` on the fine grid.

    The gradient term is unweighted (``kappa = 1``) regardless of the problem's
    permeability.  ``u`` is given at all fine nodes.
    """

    def __init__(self, grid: StructuredGrid2D, eps: float, order: int = 3):
        self.grid = grid
        self.eps = eps
        self.K = assemble_stiffness(grid, CoefficientField(np.ones(grid.n_elements)))
        pts, wts = gauss_rule(order)
        self.N, _ = shape_functions(pts)
        self.w = wts * grid.hx * grid.hy
        self.elements = grid.elements

    def __call__(self, u) -> float:
        u = np.asarray(u, dtype=float)
        grad = 0.5 * float(u @ (self.K @ u))
        uq = u[self.elements] @ self.N.T
        pot = float(np.sum(((uq**2 - 1.0) ** 2) @ self.w)) / (4 * self.eps**2)
        return grad + pot


def energy_trace(fields, eps: float, grid: StructuredGrid2D) -> np.ndarray:
    """Energy of each full-node field in ``fields``."""
    E = EnergyFunctional(grid, eps)
    return np.array([E(u) for u in fields])


def max_norm_trace(fields) -> np.ndarray:
    return np.array([float(np.abs(np.asarray(u)).max()) for u in fields]) if len(fields) else np.array([])


def full_field(grid: StructuredGrid2D, free_values, boundary_value: float = 0.0) -> np.ndarray:
    """Scatter free-node values into a full nodal vector."""
    u = np.full(grid.n_nodes, float(boundary_value))
    u[grid.free_nodes] = free_values
    return u
