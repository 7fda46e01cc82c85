"""Uniform quadrilateral meshes and coarse-neighbourhood bookkeeping.

Nodes and elements are numbered lexicographically with x running fastest.
A fine mesh is always a dyadic refinement of a coarse mesh, so every coarse
node, coarse edge and hierarchical edge-basis node is also a fine node.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class StructuredGrid2D:
    """Uniform ``nx`` x ``ny`` quadrilateral mesh of an axis-aligned rectangle.

    Parameters
    ----------
    bounds : tuple
        ``(x0, x1, y0, y1)``.
    nx, ny : int
        Number of cells along x and y.
    """

    bounds: tuple[float, float, float, float]
    nx: int
    ny: int

    def __post_init__(self):
        x0, x1, y0, y1 = self.bounds
        if int(self.nx) != self.nx or int(self.ny) != self.ny or self.nx < 1 or self.ny < 1:
            raise ValueError(f"cell counts must be positive integers, got nx={self.nx}, ny={self.ny}")
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"degenerate bounds {self.bounds}")
        object.__setattr__(self, "bounds", tuple(float(b) for b in self.bounds))

    @property
    def hx(self) -> float:
        return (self.bounds[1] - self.bounds[0]) / self.nx

    @property
    def hy(self) -> float:
        return (self.bounds[3] - self.bounds[2]) / self.ny

    @property
    def area(self) -> float:
        return (self.bounds[1] - self.bounds[0]) * (self.bounds[3] - self.bounds[2])

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny

    def node_id(self, i, j):
        return np.asarray(j) * (self.nx + 1) + np.asarray(i)

    def node_ij(self, node):
        node = np.asarray(node)
        return node % (self.nx + 1), node // (self.nx + 1)

    @property
    def node_coords(self) -> np.ndarray:
        """(n_nodes, 2) array of physical coordinates."""
        i, j = self.node_ij(np.arange(self.n_nodes))
        return np.column_stack([self.bounds[0] + i * self.hx, self.bounds[2] + j * self.hy])

    @property
    def elements(self) -> np.ndarray:
        """(n_elements, 4) corner node ids, counterclockwise from lower-left."""
        ei, ej = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        ei, ej = ei.ravel(), ej.ravel()
        n00 = self.node_id(ei, ej)
        return np.column_stack([n00, n00 + 1, n00 + self.nx + 2, n00 + self.nx + 1])

    @property
    def element_centroids(self) -> np.ndarray:
        ei, ej = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        return np.column_stack([
            self.bounds[0] + (ei.ravel() + 0.5) * self.hx,
            self.bounds[2] + (ej.ravel() + 0.5) * self.hy,
        ])

    @property
    def boundary_mask(self) -> np.ndarray:
        i, j = self.node_ij(np.arange(self.n_nodes))
        return (i == 0) | (i == self.nx) | (j == 0) | (j == self.ny)

    @property
    def boundary_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_mask)

    @property
    def free_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask)

    def refine(self, ratio: int) -> "StructuredGrid2D":
        return StructuredGrid2D(self.bounds, self.nx * ratio, self.ny * ratio)


def build_grid(bounds, nx: int, ny: int) -> StructuredGrid2D:
    return StructuredGrid2D(tuple(bounds), nx, ny)


# Sides of a neighbourhood rectangle in counterclockwise order.  Each entry is
# (name, fixed axis, which end of the fixed axis).
_SIDES = (("bottom", 1, 0), ("right", 0, 1), ("top", 1, 1), ("left", 0, 0))


@dataclass(frozen=True)
class EdgeSegment:
    """One side of a neighbourhood boundary that does not lie on the domain boundary.

    ``nodes`` runs along the whole side, both endpoints included, ordered by
    increasing physical coordinate; ``s`` is the matching reference coordinate
    in [0, 1].  ``owned`` marks the nodes that belong to this segment's trace:
    the half-open side including its counterclockwise-first endpoint, minus any
    node on the domain boundary.
    """

    name: str
    nodes: np.ndarray
    s: np.ndarray
    owned: np.ndarray
    length: float

    @property
    def trace_nodes(self) -> np.ndarray:
        return self.nodes[self.owned]


@dataclass(frozen=True)
class Neighborhood:
    """Coarse neighbourhood of one coarse node: the union of coarse elements touching it."""

    node: int
    coarse_elements: np.ndarray
    # fine index ranges (inclusive) of the rectangular block covered
    irange: tuple[int, int]
    jrange: tuple[int, int]
    fine_nodes: np.ndarray
    segments: tuple[EdgeSegment, ...]
    # ((i, j) fine indices of the four rectangle corners, counterclockwise from lower-left)
    corners: tuple[tuple[int, int], ...]

    @property
    def block_shape(self) -> tuple[int, int]:
        return (self.jrange[1] - self.jrange[0] + 1, self.irange[1] - self.irange[0] + 1)

    @property
    def trace_nodes(self) -> np.ndarray:
        """Fine nodes of the neighbourhood boundary away from the domain boundary."""
        if not self.segments:
            return np.empty(0, dtype=int)
        return np.concatenate([seg.trace_nodes for seg in self.segments])


@dataclass(frozen=True)
class CoarseDecomposition:
    coarse: StructuredGrid2D
    fine: StructuredGrid2D
    ratio: int
    neighborhoods: tuple[Neighborhood, ...] = field(repr=False)

    @property
    def overlap_constant(self) -> int:
        """Maximum number of neighbourhoods sharing a coarse element."""
        counts = np.zeros(self.coarse.n_elements, dtype=int)
        for nb in self.neighborhoods:
            counts[nb.coarse_elements] += 1
        return int(counts.max())

    @property
    def interior_coarse_nodes(self) -> np.ndarray:
        return self.coarse.free_nodes

    def fine_index_of_coarse(self, node):
        """Fine node id of a coarse node."""
        i, j = self.coarse.node_ij(node)
        return self.fine.node_id(i * self.ratio, j * self.ratio)

    def coarse_element_block(self, e: int):
        """Fine index ranges (inclusive) of coarse element ``e``."""
        ei, ej = e % self.coarse.nx, e // self.coarse.nx
        r = self.ratio
        return (ei * r, (ei + 1) * r), (ej * r, (ej + 1) * r)

    def fine_elements_of_coarse(self, e: int) -> np.ndarray:
        (i0, i1), (j0, j1) = self.coarse_element_block(e)
        fi, fj = np.meshgrid(np.arange(i0, i1), np.arange(j0, j1))
        return (fj * self.fine.nx + fi).ravel()

    def block_nodes(self, irange, jrange) -> np.ndarray:
        fi, fj = np.meshgrid(np.arange(irange[0], irange[1] + 1), np.arange(jrange[0], jrange[1] + 1))
        return self.fine.node_id(fi, fj).ravel()


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _segment(fine: StructuredGrid2D, name, axis, end, irange, jrange) -> EdgeSegment | None:
    i0, i1 = irange
    j0, j1 = jrange
    if axis == 1:  # horizontal side at fixed j
        j = j1 if end else j0
        if j == 0 or j == fine.ny:
            return None
        ii = np.arange(i0, i1 + 1)
        nodes = fine.node_id(ii, np.full_like(ii, j))
        s = (ii - i0) / (i1 - i0)
        length = (i1 - i0) * fine.hx
        on_boundary = (ii == 0) | (ii == fine.nx)
    else:  # vertical side at fixed i
        i = i1 if end else i0
        if i == 0 or i == fine.nx:
            return None
        jj = np.arange(j0, j1 + 1)
        nodes = fine.node_id(np.full_like(jj, i), jj)
        s = (jj - j0) / (j1 - j0)
        length = (j1 - j0) * fine.hy
        on_boundary = (jj == 0) | (jj == fine.ny)
    owned = np.ones(len(nodes), dtype=bool)
    # counterclockwise travel: bottom and right run with increasing coordinate,
    # top and left against it; keep the first endpoint, drop the last.
    if name in ("bottom", "right"):
        owned[-1] = False
    else:
        owned[0] = False
    owned &= ~on_boundary
    return EdgeSegment(name, nodes, s, owned, length)


def build_decomposition(coarse: StructuredGrid2D, ratio: int) -> CoarseDecomposition:
    """Refine ``coarse`` by ``ratio`` and build every coarse neighbourhood."""
    if int(ratio) != ratio or ratio < 2 or not _is_power_of_two(int(ratio)):
        raise ValueError(f"ratio must be a power of two >= 2, got {ratio}")
    ratio = int(ratio)
    fine = coarse.refine(ratio)
    neighborhoods = []
    for node in range(coarse.n_nodes):
        ci, cj = (int(v) for v in coarse.node_ij(node))
        elems = [ej * coarse.nx + ei
                 for ej in (cj - 1, cj) for ei in (ci - 1, ci)
                 if 0 <= ei < coarse.nx and 0 <= ej < coarse.ny]
        irange = (max(ci - 1, 0) * ratio, min(ci + 1, coarse.nx) * ratio)
        jrange = (max(cj - 1, 0) * ratio, min(cj + 1, coarse.ny) * ratio)
        segments = []
        for name, axis, end in _SIDES:
            seg = _segment(fine, name, axis, end, irange, jrange)
            if seg is not None:
                segments.append(seg)
        fi, fj = np.meshgrid(np.arange(irange[0], irange[1] + 1), np.arange(jrange[0], jrange[1] + 1))
        corners = ((irange[0], jrange[0]), (irange[1], jrange[0]), (irange[1], jrange[1]), (irange[0], jrange[1]))
        neighborhoods.append(Neighborhood(
            node=node,
            coarse_elements=np.array(elems, dtype=int),
            irange=irange,
            jrange=jrange,
            fine_nodes=fine.node_id(fi, fj).ravel(),
            segments=tuple(segments),
            corners=corners,
        ))
    return CoarseDecomposition(coarse, fine, ratio, tuple(neighborhoods))
