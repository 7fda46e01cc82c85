"""Edge multiscale ansatz space.

For each coarse node ``i`` and each edge-space function ``psi`` on the
boundary of the neighbourhood ``omega_i``, the local convection-diffusion
problem ``-div(kappa grad v) + beta . grad v = 0`` is solved on the fine
sub-grid of ``omega_i`` with ``v = psi`` on the boundary (zero on the domain
boundary).  The global basis function is ``chi_i * v`` extended by zero.

Coarse nodes on the domain boundary take part as well: their neighbourhoods
are truncated by the boundary, and without them no basis function could
grow linearly away from the boundary.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import CoefficientField, FineOperators, VelocityField
from .edgebasis import EdgeSpace, build_edge_space
from .grid import CoarseDecomposition
from .pou import PartitionOfUnity

log = logging.getLogger(__name__)

DENSE_LIMIT = 3000


class LocalSolveError(RuntimeError):
    def __init__(self, node: int, message: str):
        super().__init__(f"local problem on neighbourhood {node} failed: {message}")
        self.node = node


class LocalProblem:
    """Factorized local operator of one neighbourhood, reused for every boundary datum."""

    def __init__(self, decomp: CoarseDecomposition, i: int, operator: sp.csr_matrix):
        nb = decomp.neighborhoods[i]
        self.node = i
        self.nodes = nb.fine_nodes
        fi, fj = decomp.fine.node_ij(self.nodes)
        (i0, i1), (j0, j1) = nb.irange, nb.jrange
        self.on_boundary = (fi == i0) | (fi == i1) | (fj == j0) | (fj == j1)
        inner = self.nodes[~self.on_boundary]
        self.boundary_nodes = self.nodes[self.on_boundary]
        K = sp.csr_matrix(operator)
        self._K_ib = K[inner][:, self.boundary_nodes]
        try:
            self._lu = spla.splu(sp.csc_matrix(K[inner][:, inner])) if inner.size else None
        except RuntimeError as exc:
            raise LocalSolveError(i, str(exc)) from exc

    def solve(self, data: np.ndarray) -> np.ndarray:
        """Extend boundary data (rows ordered as ``boundary_nodes``) into the block."""
        data = np.asarray(data, dtype=float)
        out = np.zeros((self.nodes.size,) + data.shape[1:])
        out[self.on_boundary] = data
        if self._lu is not None:
            x = self._lu.solve(-(self._K_ib @ data))
            if not np.all(np.isfinite(x)):
                raise LocalSolveError(self.node, "non-finite solution")
            out[~self.on_boundary] = x
        return out

    def boundary_data(self, trace_nodes: np.ndarray, values: np.ndarray) -> np.ndarray:
        """Scatter trace values onto the block boundary; nodes not in the trace get zero."""
        pos = {n: k for k, n in enumerate(self.boundary_nodes.tolist())}
        values = np.asarray(values, dtype=float)
        data = np.zeros((self.boundary_nodes.size,) + values.shape[1:])
        idx = np.array([pos[n] for n in trace_nodes.tolist()], dtype=int)
        data[idx] = values
        return data


def local_operator(ops: FineOperators, velocity: VelocityField, t0: float = 0.0) -> sp.csr_matrix:
    K = ops.stiffness
    if not velocity.is_zero:
        K = K + velocity.g(t0) * ops.convection
    return K.tocsr()


def harmonic_extension(decomp: CoarseDecomposition, i: int, kappa: CoefficientField,
                       velocity: VelocityField, edge_fn: np.ndarray, ops: FineOperators | None = None):
    """Local solution on the fine block of ``omega_i`` for one trace (ordered like the neighbourhood trace nodes)."""
    ops = FineOperators.build(decomp.fine, kappa, velocity) if ops is None else ops
    problem = LocalProblem(decomp, i, local_operator(ops, velocity))
    nb = decomp.neighborhoods[i]
    return problem.solve(problem.boundary_data(nb.trace_nodes, edge_fn))


def prune_columns(gram: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Indices of columns kept by a pivoted Cholesky of the unit-diagonal scaled Gram matrix.

    Columns whose residual squared norm, relative to the mean diagonal, falls
    below ``tol`` once the kept columns are factored out are dropped.
    """
    G = np.array(gram, dtype=float)
    d = np.sqrt(np.diag(G))
    if np.any(d == 0):
        raise ValueError("zero column in basis")
    G = G / d[:, None] / d[None, :]
    n = G.shape[0]
    # scaled diagonal is one, so trace/m == 1
    c, piv, rank, info = la.lapack.dpstrf(G, lower=1, tol=tol)
    if info < 0:
        raise RuntimeError(f"dpstrf failed with info={info}")
    kept = np.sort(piv[:rank] - 1)
    if rank < n:
        log.info("pruned %d of %d near-dependent columns", n - rank, n)
    return kept


class MassSolver:
    """Factorization of the coarse mass matrix; dense Cholesky when small, sparse LU otherwise."""

    def __init__(self, M):
        self.n = M.shape[0]
        if self.n <= DENSE_LIMIT:
            Md = M.toarray() if sp.issparse(M) else np.asarray(M)
            self._cho = la.cho_factor(Md, lower=True)
            self._lu = None
        else:
            self._cho = None
            self._lu = spla.splu(sp.csc_matrix(M))

    def solve(self, b):
        if self._cho is not None:
            return la.cho_solve(self._cho, b)
        return self._lu.solve(np.asarray(b, dtype=float))


@dataclass
class MultiscaleSpace:
    """Basis operator ``B`` (fine free nodes x m) and the projected coarse operators."""

    decomp: CoarseDecomposition
    level: int
    basis: sp.csc_matrix
    provenance: list[tuple[int, int]]
    free: np.ndarray
    fine_mass: sp.csr_matrix
    mass: sp.spmatrix | np.ndarray
    stiffness: sp.spmatrix | np.ndarray
    convection: sp.spmatrix | np.ndarray
    pruned: list[tuple[int, int]] = field(default_factory=list)
    _mass_solver: MassSolver | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def mass_solver(self) -> MassSolver:
        if self._mass_solver is None:
            self._mass_solver = MassSolver(self.mass)
        return self._mass_solver

    def operator(self, g: float = 1.0):
        """``A_ms + g C_ms``."""
        return self.stiffness + g * self.convection if g != 0.0 else self.stiffness

    def project(self, fine_load: np.ndarray) -> np.ndarray:
        """Coefficients of the L2 projection given ``M u`` on the free nodes."""
        return self.mass_solver.solve(self.basis.T @ fine_load)


def project_operators(basis: sp.spmatrix, M, A, C, dense: bool | None = None, symmetry_tol: float = 1e-12):
    """Galerkin projections ``B^T X B`` with M and A symmetrized."""
    B = sp.csc_matrix(basis)
    out = []
    for name, X, sym in (("mass", M, True), ("stiffness", A, True), ("convection", C, False)):
        P = (B.T @ (X @ B)).tocsr()
        if sym:
            defect = abs(P - P.T).max() if P.nnz else 0.0
            scale = abs(P).max() if P.nnz else 1.0
            if defect > symmetry_tol * max(scale, 1.0):
                log.warning("%s projection asymmetry %.3e", name, defect)
            P = ((P + P.T) * 0.5).tocsr()
        out.append(P)
    if dense is None:
        dense = B.shape[1] <= DENSE_LIMIT
    if dense:
        out = [P.toarray() for P in out]
    return tuple(out)


def build_multiscale_space(decomp: CoarseDecomposition, kappa: CoefficientField, velocity: VelocityField,
                           level: int, pou: PartitionOfUnity, ops: FineOperators | None = None,
                           nodes=None, prune_tol: float = 1e-12, prune: bool = True) -> MultiscaleSpace:
    """Assemble ``B`` column by column and project the fine operators.

    ``nodes`` defaults to every coarse node.  All basis functions vanish on
    the domain boundary because the edge data do.
    """
    fine = decomp.fine
    ops = FineOperators.build(fine, kappa, velocity) if ops is None else ops
    K = local_operator(ops, velocity)
    if nodes is None:
        nodes = np.arange(decomp.coarse.n_nodes)
    free = fine.free_nodes
    free_index = np.full(fine.n_nodes, -1)
    free_index[free] = np.arange(free.size)

    # seeded so an all-empty selection still yields a (free x 0) operator
    rows, cols, vals, provenance = [np.zeros(0, int)], [np.zeros(0, int)], [np.zeros(0)], []
    col = 0
    for i in np.asarray(nodes, dtype=int):
        space: EdgeSpace = build_edge_space(decomp, int(i), level)
        if space.dim == 0:
            continue
        problem = LocalProblem(decomp, int(i), K)
        ext = problem.solve(problem.boundary_data(space.trace_nodes, space.functions))
        chi = pou.on_neighborhood(int(i))
        local = chi[:, None] * ext
        fi = free_index[problem.nodes]
        for j in range(space.dim):
            v = local[:, j]
            keep = (fi >= 0) & (v != 0.0)
            rows.append(fi[keep])
            cols.append(np.full(keep.sum(), col))
            vals.append(v[keep])
            provenance.append((int(i), j))
            col += 1
    B = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(free.size, col))
    Mf, Af, Cf = ops.reduced()
    pruned = []
    if prune and col > 0:
        B, provenance, pruned = _prune(B, Mf, provenance, prune_tol)
    M_ms, A_ms, C_ms = project_operators(B, Mf, Af, Cf)
    return MultiscaleSpace(decomp, level, B, provenance, free, Mf, M_ms, A_ms, C_ms, pruned)


def _prune(B, Mf, provenance, tol):
    G = (B.T @ (Mf @ B))
    m = B.shape[1]
    if m <= 8000:
        kept = prune_columns(G.toarray(), tol)
    else:
        # too large for a dense factorization: check each neighbourhood's own columns
        owners = np.array([p[0] for p in provenance])
        kept = []
        Gc = G.tocsc()
        for i in np.unique(owners):
            idx = np.flatnonzero(owners == i)
            kept.extend(idx[prune_columns(Gc[idx][:, idx].toarray(), tol)])
        kept = np.sort(np.array(kept, dtype=int))
    dropped = sorted(set(range(m)) - set(kept.tolist()))
    return (B[:, kept].tocsc(), [provenance[k] for k in kept], [provenance[k] for k in dropped])


def project_initial(space: MultiscaleSpace, u0_free: np.ndarray) -> np.ndarray:
    return space.project(space.fine_mass @ np.asarray(u0_free, dtype=float))


def prolongate(space: MultiscaleSpace, c: np.ndarray) -> np.ndarray:
    return space.basis @ np.asarray(c, dtype=float)
