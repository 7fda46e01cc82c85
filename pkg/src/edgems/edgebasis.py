"""Hierarchical hat bases on [0, 1] and the edge spaces they induce on neighbourhood boundaries."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .grid import CoarseDecomposition, Neighborhood


def index_set(m: int) -> np.ndarray:
    """Indices of the hats added on level ``m``: ``{0, 1}`` on level 0, odd ``j < 2**m`` above."""
    if m < 0:
        raise ValueError("level must be non-negative")
    if m == 0:
        return np.array([0, 1])
    return np.arange(1, 2**m, 2)


def basis_1d_eval(m: int, j: int, x):
    """Hat of level ``m`` centred at ``j * 2**-m`` with half-width ``2**-m``."""
    if j not in set(index_set(m).tolist()):
        raise ValueError(f"index {j} is not in B_{m}")
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)):
        raise ValueError("hierarchical hats live on [0, 1]")
    return np.maximum(0.0, 1.0 - np.abs(x * 2.0**m - j))


@dataclass(frozen=True)
class HierarchicalBasis1D:
    level: int

    @property
    def functions(self) -> list[tuple[int, int]]:
        return [(m, int(j)) for m in range(self.level + 1) for j in index_set(m)]

    @property
    def dim(self) -> int:
        return len(self.functions)

    @property
    def nodes(self) -> np.ndarray:
        return np.array([j * 2.0**-m for m, j in self.functions])

    def evaluate(self, x) -> np.ndarray:
        """(len(x), dim) matrix of all hats up to ``level``."""
        x = np.asarray(x, dtype=float)
        return np.column_stack([basis_1d_eval(m, j, x) for m, j in self.functions])


def p1_mass_1d(n_nodes: int, length: float) -> np.ndarray:
    """Exact mass matrix of continuous P1 on a uniform partition of a segment."""
    h = length / (n_nodes - 1)
    M = np.zeros((n_nodes, n_nodes))
    idx = np.arange(n_nodes - 1)
    M[idx, idx] += h / 3
    M[idx + 1, idx + 1] += h / 3
    M[idx, idx + 1] += h / 6
    M[idx + 1, idx] += h / 6
    return M


# side name -> (corner index at s=0, corner index at s=1); corners counted
# counterclockwise from lower-left
_SIDE_CORNERS = {"bottom": (0, 1), "right": (1, 2), "top": (3, 2), "left": (0, 3)}


@dataclass(frozen=True)
class EdgeSpace:
    """Continuous hierarchical space on the part of a neighbourhood boundary away from the domain boundary.

    ``functions[:, k]`` is the k-th basis function at ``trace_nodes``;
    ``side_values[s]`` holds all basis functions on every node of segment ``s``
    (endpoints included) for exact L2 integration.
    """

    node: int
    level: int
    trace_nodes: np.ndarray
    functions: np.ndarray
    side_values: tuple[np.ndarray, ...]
    side_mass: tuple[np.ndarray, ...]
    side_nodes: tuple[np.ndarray, ...]
    dofs: tuple[tuple, ...]

    @property
    def dim(self) -> int:
        return self.functions.shape[1]

    def gram(self) -> np.ndarray:
        G = np.zeros((self.dim, self.dim))
        for V, M in zip(self.side_values, self.side_mass):
            G += V.T @ M @ V
        return G

    def _side_data(self, trace: np.ndarray):
        lookup = dict(zip(self.trace_nodes.tolist(), np.asarray(trace, dtype=float).tolist()))
        return [np.array([lookup.get(n, 0.0) for n in nodes.tolist()]) for nodes in self.side_nodes]

    def inner(self, trace_a: np.ndarray, trace_b: np.ndarray) -> float:
        a = self._side_data(trace_a)
        b = self._side_data(trace_b)
        return float(sum(x @ M @ y for x, y, M in zip(a, b, self.side_mass)))

    def reconstruct(self, coeffs) -> np.ndarray:
        return self.functions @ np.asarray(coeffs, dtype=float)


def build_edge_space(decomp: CoarseDecomposition, i: int, level: int) -> EdgeSpace:
    max_level = int(np.log2(decomp.ratio))
    if level < 0 or level > max_level:
        raise ValueError(f"level {level} outside [0, {max_level}] for ratio {decomp.ratio}")
    nb: Neighborhood = decomp.neighborhoods[i]
    fine = decomp.fine
    corner_on_boundary = []
    for (fi, fj) in nb.corners:
        corner_on_boundary.append(fi in (0, fine.nx) or fj in (0, fine.ny))

    dofs: list[tuple] = [("corner", k) for k in range(4) if not corner_on_boundary[k]]
    for seg in nb.segments:
        for m in range(1, level + 1):
            for j in index_set(m):
                dofs.append((seg.name, m, int(j)))

    side_values = []
    side_mass = []
    side_nodes = []
    for seg in nb.segments:
        V = np.zeros((seg.nodes.size, len(dofs)))
        c0, c1 = _SIDE_CORNERS[seg.name]
        for k, dof in enumerate(dofs):
            if dof[0] == "corner":
                if dof[1] == c0:
                    V[:, k] = basis_1d_eval(0, 0, seg.s)
                elif dof[1] == c1:
                    V[:, k] = basis_1d_eval(0, 1, seg.s)
            elif dof[0] == seg.name:
                V[:, k] = basis_1d_eval(dof[1], dof[2], seg.s)
        side_values.append(V)
        side_mass.append(p1_mass_1d(seg.nodes.size, seg.length))
        side_nodes.append(seg.nodes)

    trace_nodes = nb.trace_nodes
    F = np.zeros((trace_nodes.size, len(dofs)))
    offset = 0
    for seg, V in zip(nb.segments, side_values):
        n = int(seg.owned.sum())
        F[offset:offset + n] = V[seg.owned]
        offset += n
    return EdgeSpace(
        node=i,
        level=level,
        trace_nodes=trace_nodes,
        functions=F,
        side_values=tuple(side_values),
        side_mass=tuple(side_mass),
        side_nodes=tuple(side_nodes),
        dofs=tuple(dofs),
    )


def l2_project_edge(space: EdgeSpace, trace) -> np.ndarray:
    """Coefficients of the L2(boundary) projection of a fine trace onto ``space``."""
    data = space._side_data(trace)
    b = np.zeros(space.dim)
    for V, M, d in zip(space.side_values, space.side_mass, data):
        b += V.T @ (M @ d)
    return la.solve(space.gram(), b, assume_a="pos")
