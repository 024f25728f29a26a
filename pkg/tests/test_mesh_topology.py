"""Tests for mesh validation and neighbor extraction."""

import numpy as np
import pytest

from builders import delaunay_mesh, structured_mesh
from mesh.topology import GraphTopology, build_topology
from mesh.trimesh import BOUNDARY_FRONT, MeshValidationError, TriMesh

UNIT_TRIANGLE = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
UNIT_SQUARE = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]


def _brute_force_adjacency(mesh: TriMesh) -> np.ndarray:
    triangles = [set(t) for t in mesh.triangles.tolist()]
    n = mesh.n_nodes
    adj = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            if a != b and any(a in t and b in t for t in triangles):
                adj[a, b] = 1.0
    return adj


# --------------------------------------------------------------------------- #
# Mesh validation                                                              #
# --------------------------------------------------------------------------- #


def test_clockwise_triangle_is_reoriented():
    mesh = TriMesh.from_arrays(UNIT_TRIANGLE, [[0, 2, 1]])
    assert mesh.triangle_areas()[0] == pytest.approx(0.5)


def test_clockwise_triangle_rejected_without_orienting():
    with pytest.raises(MeshValidationError) as exc:
        TriMesh.from_arrays(UNIT_TRIANGLE, [[0, 2, 1]], orient=False)
    assert exc.value.triangle == 0


def test_out_of_range_index_names_triangle():
    with pytest.raises(MeshValidationError, match="references node outside") as exc:
        TriMesh.from_arrays(UNIT_SQUARE, [[0, 1, 2], [1, 7, 2]])
    assert exc.value.triangle == 1


def test_degenerate_triangle_names_triangle():
    nodes = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [2.0, 0.0]]
    with pytest.raises(MeshValidationError, match="degenerate") as exc:
        TriMesh.from_arrays(nodes, [[0, 1, 2], [0, 1, 3]])
    assert exc.value.triangle == 1


def test_unused_node_rejected():
    nodes = UNIT_TRIANGLE + [[5.0, 5.0]]
    with pytest.raises(MeshValidationError) as exc:
        TriMesh.from_arrays(nodes, [[0, 1, 2]])
    assert exc.value.node == 3


def test_duplicate_nodes_rejected():
    nodes = UNIT_TRIANGLE + [[0.0, 1.0 + 1e-9]]
    with pytest.raises(MeshValidationError, match="closer than"):
        TriMesh.from_arrays(nodes, [[0, 1, 2], [0, 1, 3]])


def test_nodal_areas_sum_to_mesh_area():
    mesh = structured_mesh(4, 3, dx=500.0)
    assert mesh.nodal_areas().sum() == pytest.approx(1500.0 * 1000.0)


def test_nodal_gradient_exact_for_linear_field():
    mesh = delaunay_mesh(30, seed=3)
    field = 2.0 * mesh.nodes[:, 0] - 0.5 * mesh.nodes[:, 1] + 7.0
    grad = mesh.nodal_gradient(field)
    np.testing.assert_allclose(grad[:, 0], 2.0, rtol=1e-10)
    np.testing.assert_allclose(grad[:, 1], -0.5, rtol=1e-10)


def test_mesh_json_round_trip(tmp_path):
    mesh = structured_mesh(3, 3)
    flags = np.zeros(mesh.n_nodes, dtype=np.int8)
    flags[-3:] = BOUNDARY_FRONT
    mesh = TriMesh.from_arrays(mesh.nodes, mesh.triangles, flags)
    loaded = TriMesh.load_json(mesh.save_json(tmp_path / "mesh.json"))
    np.testing.assert_array_equal(loaded.nodes, mesh.nodes)
    np.testing.assert_array_equal(loaded.triangles, mesh.triangles)
    np.testing.assert_array_equal(loaded.boundary_flags, flags)
    assert mesh.to_dict()["boundary"][-1] == "front"


def test_unknown_boundary_name_rejected():
    with pytest.raises(MeshValidationError, match="unknown boundary flag"):
        TriMesh.from_dict({"nodes": UNIT_TRIANGLE, "triangles": [[0, 1, 2]], "boundary": ["interior", "shore", "front"]})


# --------------------------------------------------------------------------- #
# Topology                                                                     #
# --------------------------------------------------------------------------- #


def test_single_triangle_topology():
    topo = build_topology(TriMesh.from_arrays(UNIT_TRIANGLE, [[0, 1, 2]]))
    assert topo.n_edges == 3
    assert topo.n_directed == 6
    np.testing.assert_array_equal(topo.degrees, [2, 2, 2])
    np.testing.assert_array_equal(topo.edge_list, [[0, 1], [0, 2], [1, 2]])
    assert [n.tolist() for n in topo.neighbor_lists] == [[1, 2], [0, 2], [0, 1]]


def test_two_triangles_share_one_edge():
    topo = build_topology(TriMesh.from_arrays(UNIT_SQUARE, [[0, 1, 2], [1, 3, 2]]))
    assert topo.n_edges == 5
    np.testing.assert_array_equal(topo.degrees, [2, 3, 3, 2])
    assert topo.neighbor_lists[1].tolist() == [0, 2, 3]


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_topology_matches_brute_force(seed):
    mesh = delaunay_mesh(50, seed=seed)
    topo = build_topology(mesh)
    np.testing.assert_array_equal(topo.to_dense(), _brute_force_adjacency(mesh))


def test_topology_is_symmetric_and_normalized():
    topo = build_topology(delaunay_mesh(40, seed=5))
    dense = topo.to_dense()
    np.testing.assert_array_equal(dense, dense.T)
    assert not np.any(np.diag(dense))
    np.testing.assert_array_equal(topo.receivers[topo.reverse], topo.senders)
    np.testing.assert_array_equal(topo.senders[topo.reverse], topo.receivers)
    np.testing.assert_allclose(topo.norm_C * topo.degrees, 1.0)
    np.testing.assert_allclose(topo.sum_at_receivers(np.ones(topo.n_directed)), topo.degrees)


def test_edgeless_topology():
    topo = GraphTopology.from_edges(4, [])
    assert topo.n_directed == 0
    np.testing.assert_array_equal(topo.degrees, np.zeros(4))
    np.testing.assert_array_equal(topo.norm_C, np.zeros(4))
    np.testing.assert_array_equal(topo.sum_at_receivers(np.zeros((0, 3))), np.zeros((4, 3)))
    np.testing.assert_allclose(topo.gcn_operator.toarray(), np.eye(4))


def test_duplicate_and_reversed_edges_collapse():
    topo = GraphTopology.from_edges(3, [[0, 1], [1, 0], [0, 1], [2, 1]])
    np.testing.assert_array_equal(topo.edge_list, [[0, 1], [1, 2]])


@pytest.mark.parametrize("edges", [[[0, 0]], [[0, 5]], [[-1, 2]]])
def test_invalid_edges_rejected(edges):
    with pytest.raises(ValueError):
        GraphTopology.from_edges(3, edges)


def test_gcn_operator_matches_dense_formula():
    topo = build_topology(delaunay_mesh(25, seed=9))
    a_tilde = topo.to_dense() + np.eye(topo.n_nodes)
    d = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    np.testing.assert_allclose(topo.gcn_operator.toarray(), d[:, None] * a_tilde * d[None, :], rtol=1e-14)
