import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgems.grid import build_decomposition, build_grid

UNIT = (0.0, 1.0, 0.0, 1.0)


def test_counts_two_by_two():
    g = build_grid(UNIT, 2, 2)
    assert g.n_nodes == 9
    assert g.n_elements == 4
    assert g.boundary_nodes.size == 8
    assert g.free_nodes.tolist() == [4]


def test_single_cell_has_no_interior():
    g = build_grid(UNIT, 1, 1)
    assert (g.n_nodes, g.n_elements, g.free_nodes.size) == (4, 1, 0)


def test_lexicographic_node_coordinates():
    g = build_grid((-1, 1, -1, 1), 4, 4)
    assert np.array_equal(g.node_coords[12], [0.0, 0.0])
    assert np.array_equal(g.node_coords[1], [-0.5, -1.0])


@pytest.mark.parametrize("nx, ny", [(0, 2), (2, -1), (1.5, 2)])
def test_invalid_cell_counts(nx, ny):
    with pytest.raises(ValueError):
        build_grid(UNIT, nx, ny)


def test_degenerate_bounds():
    with pytest.raises(ValueError):
        build_grid((0, 0, 0, 1), 2, 2)


@settings(max_examples=30, deadline=None)
@given(nx=st.integers(1, 12), ny=st.integers(1, 12))
def test_grid_invariants(nx, ny):
    g = build_grid((-0.5, 2.0, 1.0, 1.75), nx, ny)
    el = g.elements
    assert el.shape == (nx * ny, 4)
    assert all(len(set(row)) == 4 for row in el.tolist())
    assert el.min() >= 0 and el.max() < g.n_nodes
    xy = g.node_coords
    on_bd = (xy[:, 0] == -0.5) | (xy[:, 0] == 2.0) | (xy[:, 1] == 1.0) | (xy[:, 1] == 1.75)
    assert np.array_equal(np.flatnonzero(on_bd), g.boundary_nodes)


def test_decomposition_interior_neighborhood():
    d = build_decomposition(build_grid(UNIT, 4, 4), 4)
    assert (d.fine.nx, d.fine.ny) == (16, 16)
    nb = d.neighborhoods[d.coarse.node_id(2, 2)]
    assert nb.coarse_elements.size == 4
    assert nb.block_shape == (9, 9)  # 8 x 8 fine cells
    assert len(nb.segments) == 4
    assert all(seg.nodes.size - 1 == 8 for seg in nb.segments)


def test_overlap_constant():
    assert build_decomposition(build_grid(UNIT, 2, 2), 2).overlap_constant == 4


def test_corner_neighborhood():
    d = build_decomposition(build_grid(UNIT, 4, 4), 4)
    nb = d.neighborhoods[0]
    assert nb.coarse_elements.tolist() == [0]
    assert sorted(seg.name for seg in nb.segments) == ["right", "top"]


def test_edge_neighborhood_has_two_elements():
    d = build_decomposition(build_grid(UNIT, 4, 4), 4)
    assert d.neighborhoods[d.coarse.node_id(2, 0)].coarse_elements.size == 2


@pytest.mark.parametrize("ratio", [3, 6, 1, 0])
def test_ratio_must_be_power_of_two(ratio):
    with pytest.raises(ValueError):
        build_decomposition(build_grid(UNIT, 2, 2), ratio)


@pytest.mark.parametrize("ratio", [2, 4, 8])
def test_segment_traces_partition_boundary(ratio):
    d = build_decomposition(build_grid(UNIT, 4, 3), ratio)
    fine = d.fine
    for nb in d.neighborhoods:
        (i0, i1), (j0, j1) = nb.irange, nb.jrange
        fi, fj = fine.node_ij(nb.fine_nodes)
        rim = ((fi == i0) | (fi == i1) | (fj == j0) | (fj == j1)) & ~fine.boundary_mask[nb.fine_nodes]
        expected = np.sort(nb.fine_nodes[rim])
        traces = nb.trace_nodes
        assert traces.size == np.unique(traces).size  # pairwise disjoint
        assert np.array_equal(np.sort(traces), expected)


def test_segment_reference_map_is_increasing_and_affine():
    d = build_decomposition(build_grid(UNIT, 4, 4), 4)
    xy = d.fine.node_coords
    for nb in d.neighborhoods:
        for seg in nb.segments:
            assert seg.s[0] == 0.0 and seg.s[-1] == 1.0
            assert np.all(np.diff(seg.s) > 0)
            coord = xy[seg.nodes, 0 if seg.name in ("bottom", "top") else 1]
            assert np.allclose(coord, coord[0] + seg.s * seg.length, atol=1e-14)


def test_interior_neighborhood_block_is_contiguous():
    d = build_decomposition(build_grid(UNIT, 4, 4), 4)
    nb = d.neighborhoods[d.coarse.node_id(1, 1)]
    assert nb.fine_nodes.size == (2 * 4 + 1) ** 2
