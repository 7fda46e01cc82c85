"""Bilinear finite element operators on a uniform quadrilateral grid.

All operators are assembled over every grid node; Dirichlet reduction is a
separate step (:func:`apply_dirichlet`).  Elements of a uniform grid are
congruent, so element matrices are built from one reference element and
scattered in a single COO pass.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import StructuredGrid2D


def gauss_rule(n: int):
    """Tensor Gauss-Legendre rule on the unit square: points (n*n, 2), weights (n*n,)."""
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    xi, eta = np.meshgrid(x, x, indexing="xy")
    wi, we = np.meshgrid(w, w, indexing="xy")
    return np.column_stack([xi.ravel(), eta.ravel()]), (wi * we).ravel()


def shape_functions(pts: np.ndarray):
    """Bilinear shape values (q, 4) and reference gradients (q, 4, 2) at unit-square points."""
    xi, eta = pts[:, 0], pts[:, 1]
    N = np.column_stack([(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta])
    dN = np.empty((len(pts), 4, 2))
    dN[:, :, 0] = np.column_stack([-(1 - eta), 1 - eta, eta, -eta])
    dN[:, :, 1] = np.column_stack([-(1 - xi), -xi, xi, 1 - xi])
    return N, dN


@dataclass(frozen=True)
class CoefficientField:
    """Piecewise constant permeability, one value per fine element."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0 or not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("permeability values must be finite and positive")
        if v.min() < 1.0:
            warnings.warn("permeability below 1; the method assumes kappa >= 1", stacklevel=3)
        object.__setattr__(self, "values", v)

    @property
    def contrast(self) -> float:
        return float(self.values.max() / self.values.min())

    @classmethod
    def constant(cls, grid: StructuredGrid2D, value: float = 1.0) -> "CoefficientField":
        return cls(np.full(grid.n_elements, float(value)))

    @classmethod
    def from_function(cls, grid: StructuredGrid2D, fn: Callable) -> "CoefficientField":
        """Sample ``fn(x, y)`` at element centroids."""
        c = grid.element_centroids
        return cls(np.broadcast_to(fn(c[:, 0], c[:, 1]), (grid.n_elements,)).astype(float))


def _exp_rot(x, y):
    return np.cos(2 * np.pi * y), np.cos(2 * np.pi * x)


def _make_cellular(alpha, k):
    def beta(x, y):
        return (alpha * np.cos(k * np.pi * y) * np.sin(k * np.pi * x),
                -alpha * np.cos(k * np.pi * x) * np.sin(k * np.pi * y))
    return beta


def _rigid_rotation(x, y):
    return y - 0.5, 0.5 - x


def _make_constant(bx, by):
    def beta(x, y):
        return np.full_like(x, bx, dtype=float), np.full_like(y, by, dtype=float)
    return beta


def _zero(x, y):
    return np.zeros_like(x, dtype=float), np.zeros_like(y, dtype=float)


VELOCITY_PRESETS = {
    "zero": lambda: _zero,
    "exp_rot": lambda: _exp_rot,
    "cellular": lambda alpha=2.0, k=24.0: _make_cellular(float(alpha), float(k)),
    "rigid_rotation": lambda: _rigid_rotation,
    "constant": lambda bx=0.0, by=0.0: _make_constant(float(bx), float(by)),
}

MODULATIONS = {
    "one": lambda t: 1.0,
    "exp_decay": lambda t: float(np.exp(-t)),
}


@dataclass(frozen=True)
class VelocityField:
    """Separable velocity ``beta(x, t) = g(t) * beta0(x)``.

    ``preset`` names a divergence-free field in :data:`VELOCITY_PRESETS`;
    ``modulation`` names ``g`` in :data:`MODULATIONS`.
    """

    preset: str = "zero"
    params: dict = field(default_factory=dict)
    modulation: str = "one"

    def __post_init__(self):
        if self.preset not in VELOCITY_PRESETS:
            raise ValueError(f"unknown velocity preset {self.preset!r}")
        if self.modulation not in MODULATIONS:
            raise ValueError(f"unknown time modulation {self.modulation!r}")

    def beta0(self, x, y):
        return VELOCITY_PRESETS[self.preset](**self.params)(np.asarray(x, float), np.asarray(y, float))

    def g(self, t: float) -> float:
        return MODULATIONS[self.modulation](t)

    @property
    def is_zero(self) -> bool:
        return self.preset == "zero" or (self.preset == "constant" and not any(self.params.values()))

    @property
    def time_dependent(self) -> bool:
        return self.modulation != "one" and not self.is_zero


def _scatter(grid: StructuredGrid2D, local: np.ndarray) -> sp.csr_matrix:
    """Sum element matrices ``local`` (n_el, 4, 4) into a global CSR matrix."""
    el = grid.elements
    rows = np.repeat(el, 4, axis=1).ravel()
    cols = np.tile(el, (1, 4)).ravel()
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(grid.n_nodes, grid.n_nodes)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def reference_mass(grid: StructuredGrid2D) -> np.ndarray:
    pts, w = gauss_rule(2)
    N, _ = shape_functions(pts)
    return grid.hx * grid.hy * np.einsum("q,qa,qb->ab", w, N, N)


def reference_stiffness(grid: StructuredGrid2D) -> np.ndarray:
    pts, w = gauss_rule(2)
    _, dN = shape_functions(pts)
    g = dN / np.array([grid.hx, grid.hy])
    return grid.hx * grid.hy * np.einsum("q,qad,qbd->ab", w, g, g)


def assemble_mass(grid: StructuredGrid2D) -> sp.csr_matrix:
    Me = reference_mass(grid)
    return _scatter(grid, np.broadcast_to(Me, (grid.n_elements, 4, 4)))


def assemble_stiffness(grid: StructuredGrid2D, kappa: CoefficientField) -> sp.csr_matrix:
    k = np.asarray(kappa.values if isinstance(kappa, CoefficientField) else kappa, dtype=float).ravel()
    if k.size != grid.n_elements:
        raise ValueError(f"coefficient has {k.size} values for {grid.n_elements} elements")
    Ke = reference_stiffness(grid)
    return _scatter(grid, k[:, None, None] * Ke[None])


def assemble_convection(grid: StructuredGrid2D, velocity) -> sp.csr_matrix:
    """Convection matrix ``C[p, q] = int (beta0 . grad phi_q) phi_p`` with 3x3 Gauss.

    ``velocity`` is a :class:`VelocityField` or a callable ``(x, y) -> (bx, by)``.
    The time modulation is not applied.
    """
    beta0 = velocity.beta0 if isinstance(velocity, VelocityField) else velocity
    pts, w = gauss_rule(3)
    N, dN = shape_functions(pts)
    g = dN / np.array([grid.hx, grid.hy])
    # physical quadrature points of every element
    x0 = grid.node_coords[grid.elements[:, 0]]
    qx = x0[:, 0:1] + pts[None, :, 0] * grid.hx
    qy = x0[:, 1:2] + pts[None, :, 1] * grid.hy
    bx, by = beta0(qx, qy)
    bx = np.broadcast_to(bx, qx.shape)
    by = np.broadcast_to(by, qy.shape)
    bgrad = bx[:, :, None] * g[None, :, :, 0] + by[:, :, None] * g[None, :, :, 1]  # (e, q, b)
    local = grid.hx * grid.hy * np.einsum("q,qa,eqb->eab", w, N, bgrad)
    return _scatter(grid, local)


def load_vector(grid: StructuredGrid2D, f: Callable, order: int = 3) -> np.ndarray:
    """``b[p] = int f phi_p`` with an ``order`` x ``order`` Gauss rule."""
    pts, w = gauss_rule(order)
    N, _ = shape_functions(pts)
    x0 = grid.node_coords[grid.elements[:, 0]]
    qx = x0[:, 0:1] + pts[None, :, 0] * grid.hx
    qy = x0[:, 1:2] + pts[None, :, 1] * grid.hy
    fq = np.broadcast_to(f(qx, qy), qx.shape)
    local = grid.hx * grid.hy * np.einsum("q,qa,eq->ea", w, N, fq)
    b = np.zeros(grid.n_nodes)
    np.add.at(b, grid.elements.ravel(), local.ravel())
    return b


@dataclass
class ReducedSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray | None
    free: np.ndarray

    def expand(self, x_free: np.ndarray, n: int, boundary_value: float = 0.0) -> np.ndarray:
        out = np.full(n, boundary_value, dtype=float)
        out[self.free] = x_free
        return out


def apply_dirichlet(op: sp.spmatrix, rhs=None, boundary=None) -> ReducedSystem:
    """Strong homogeneous Dirichlet conditions by row and column elimination."""
    n = op.shape[0]
    mask = np.ones(n, dtype=bool)
    if boundary is not None:
        mask[np.asarray(boundary, dtype=int)] = False
    free = np.flatnonzero(mask)
    A = sp.csr_matrix(op)[free][:, free].tocsr()
    b = None if rhs is None else np.asarray(rhs, dtype=float)[free]
    return ReducedSystem(A, b, free)


def l2_project_fine(grid: StructuredGrid2D, f: Callable, mass=None) -> np.ndarray:
    """Nodal coefficients of the L2 projection of ``f(x, y)`` onto the bilinear space."""
    M = assemble_mass(grid) if mass is None else mass
    b = load_vector(grid, f)
    return spla.splu(sp.csc_matrix(M)).solve(b)


@dataclass
class FineOperators:
    """Fine-grid mass, diffusion and (unmodulated) convection matrices on all nodes."""

    grid: StructuredGrid2D
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    convection: sp.csr_matrix

    @classmethod
    def build(cls, grid: StructuredGrid2D, kappa: CoefficientField, velocity: VelocityField) -> "FineOperators":
        C = sp.csr_matrix((grid.n_nodes, grid.n_nodes)) if velocity.is_zero else assemble_convection(grid, velocity)
        return cls(grid, assemble_mass(grid), assemble_stiffness(grid, kappa), C)

    @property
    def free(self) -> np.ndarray:
        return self.grid.free_nodes

    def reduced(self):
        """``(M, A, C)`` restricted to free nodes."""
        f = self.free
        return tuple(X[f][:, f].tocsr() for X in (self.mass, self.stiffness, self.convection))
