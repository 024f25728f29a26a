"""Tests for per-directed-edge attributes."""

import numpy as np
import pytest

from builders import delaunay_mesh, make_state
from mesh.edge_attributes import EDGE_ATTRIBUTE_NAMES, compute_edge_attributes
from mesh.trimesh import TriMesh


def _edge(topology, i, j) -> int:
    return int(np.flatnonzero((topology.receivers == i) & (topology.senders == j))[0])


def _random_state(mesh, rng):
    n = mesh.n_nodes
    return make_state(
        mesh,
        surface=rng.uniform(0.0, 1000.0, n),
        bed=rng.uniform(-500.0, 500.0, n),
        vx=rng.normal(0.0, 100.0, n),
        vy=rng.normal(0.0, 100.0, n),
    )


def test_slope_on_a_single_edge():
    mesh = TriMesh.from_arrays([[0.0, 0.0], [1000.0, 0.0], [0.0, 1000.0]], [[0, 1, 2]])
    state = make_state(mesh, surface=[100.0, 110.0, 100.0])
    attrs = compute_edge_attributes(mesh, state, state, dt=0.05)
    e = _edge(attrs.topology, 0, 1)
    assert attrs.column("distance")[e] == pytest.approx(1000.0)
    assert attrs.column("surface_slope")[e] == pytest.approx(0.01)
    assert attrs.column("base_slope")[e] == 0.0


def test_same_state_has_zero_acceleration(rng):
    mesh = delaunay_mesh(20, seed=1)
    state = _random_state(mesh, rng)
    attrs = compute_edge_attributes(mesh, state, state, dt=0.05)
    assert not np.any(attrs.column("accel_x"))
    assert not np.any(attrs.column("accel_y"))


def test_matches_per_edge_loop(rng):
    mesh = delaunay_mesh(20, seed=2)
    state, prev = _random_state(mesh, rng), _random_state(mesh, rng)
    dt = 0.05
    attrs = compute_edge_attributes(mesh, state, prev, dt)
    topo = attrs.topology
    assert attrs.values.shape == (topo.n_directed, len(EDGE_ATTRIBUTE_NAMES))
    for e in range(topo.n_directed):
        i, j = topo.receivers[e], topo.senders[e]
        dist = float(np.hypot(*(mesh.nodes[j] - mesh.nodes[i])))
        expected = [
            dist,
            (state.surface[j] - state.surface[i]) / dist,
            (state.bed[j] - state.bed[i]) / dist,
            ((state.vx[j] - state.vx[i]) - (prev.vx[j] - prev.vx[i])) / dt,
            ((state.vy[j] - state.vy[i]) - (prev.vy[j] - prev.vy[i])) / dt,
        ]
        np.testing.assert_allclose(attrs.values[e], expected, rtol=1e-12)


def test_reversed_edges_flip_sign(rng):
    mesh = delaunay_mesh(20, seed=4)
    attrs = compute_edge_attributes(mesh, _random_state(mesh, rng), _random_state(mesh, rng), dt=0.1)
    flipped = attrs.reversed()
    np.testing.assert_array_equal(flipped[:, 0], attrs.values[:, 0])
    np.testing.assert_array_equal(flipped[:, 1:], -attrs.values[:, 1:])


@pytest.mark.parametrize("dt", [0.0, -0.05])
def test_non_positive_dt_rejected(dt):
    mesh = delaunay_mesh(10)
    state = make_state(mesh)
    with pytest.raises(ValueError, match="dt"):
        compute_edge_attributes(mesh, state, state, dt=dt)


def test_state_size_must_match_mesh():
    mesh = delaunay_mesh(10)
    other = make_state(delaunay_mesh(12))
    with pytest.raises(ValueError, match="nodes"):
        compute_edge_attributes(mesh, other, other, dt=0.05)
