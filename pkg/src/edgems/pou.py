"""Multiscale partition of unity.

Each ``chi_i`` is built coarse element by coarse element: inside ``K`` it is
the discrete kappa-harmonic function whose trace on ``dK`` is the affine
(bilinear-shape) hat of the corner ``x_i``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import CoefficientField, assemble_stiffness
from .grid import CoarseDecomposition


@dataclass(frozen=True)
class PartitionOfUnity:
    """``chi[:, i]`` holds ``chi_i`` at every fine node (all nodes, boundary included)."""

    decomp: CoarseDecomposition
    chi: sp.csc_matrix

    def function(self, i: int) -> np.ndarray:
        return self.chi[:, i].toarray().ravel()

    def on_neighborhood(self, i: int) -> np.ndarray:
        """``chi_i`` on the fine-node block of its neighbourhood (row-major block order)."""
        nb = self.decomp.neighborhoods[i]
        return self.chi[nb.fine_nodes, i].toarray().ravel()


def _affine_corner_data(ri: np.ndarray, rj: np.ndarray, r: int) -> np.ndarray:
    xi = ri / r
    eta = rj / r
    return np.column_stack([(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta])


def solve_pou_element(decomp: CoarseDecomposition, e: int, stiffness: sp.csr_matrix):
    """Local PU functions of coarse element ``e``.

    ``stiffness`` is the fine kappa-weighted stiffness on all nodes.  Returns
    ``(nodes, values)`` where ``values[:, k]`` belongs to the k-th corner of
    ``e`` (counterclockwise from lower-left) on the element's fine nodes.
    """
    (i0, i1), (j0, j1) = decomp.coarse_element_block(e)
    r = decomp.ratio
    nodes = decomp.block_nodes((i0, i1), (j0, j1))
    fi, fj = decomp.fine.node_ij(nodes)
    on_edge = (fi == i0) | (fi == i1) | (fj == j0) | (fj == j1)
    values = _affine_corner_data(fi - i0, fj - j0, r)
    inner = nodes[~on_edge]
    if inner.size:
        edge = nodes[on_edge]
        A_ii = sp.csc_matrix(stiffness[inner][:, inner])
        A_ie = stiffness[inner][:, edge]
        rhs = -(A_ie @ values[on_edge])
        values[~on_edge] = spla.splu(A_ii).solve(rhs)
    return nodes, values


def assemble_pou(decomp: CoarseDecomposition, kappa: CoefficientField, stiffness=None) -> PartitionOfUnity:
    A = assemble_stiffness(decomp.fine, kappa) if stiffness is None else stiffness
    A = sp.csr_matrix(A)
    coarse = decomp.coarse
    corner_ids = coarse.elements
    rows, cols, vals = [], [], []
    for e in range(coarse.n_elements):
        nodes, values = solve_pou_element(decomp, e, A)
        for k in range(4):
            rows.append(nodes)
            cols.append(np.full(nodes.size, corner_ids[e, k]))
            vals.append(values[:, k])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    # nodes on coarse edges are visited by every adjacent element; the traces agree, keep one
    key = cols.astype(np.int64) * decomp.fine.n_nodes + rows
    _, first = np.unique(key, return_index=True)
    rows, cols, vals = rows[first], cols[first], vals[first]
    keep = vals != 0.0
    chi = sp.csc_matrix((vals[keep], (rows[keep], cols[keep])), shape=(decomp.fine.n_nodes, coarse.n_nodes))
    return PartitionOfUnity(decomp, chi)
