"""Small meshes, states, graphs and configs shared by the tests."""

from types import SimpleNamespace
from typing import Optional

import numpy as np
from scipy.spatial import Delaunay

from config.model_config import ModelConfig
from icesim.config import SimConfig
from icesim.state import SimState
from mesh.topology import GraphTopology
from mesh.trimesh import TriMesh

CALVING_VALUES = (0.75e6, 1.0e6)

TINY_DOMAIN = {
    "length_x": 12000.0,
    "length_y": 6000.0,
    "fine_edge": 1500.0,
    "coarse_edge": 2500.0,
    "fine_zone": 4000.0,
    "transition_zone": 4000.0,
}


def structured_mesh(nx: int, ny: int, dx: float = 1000.0, dy: Optional[float] = None) -> TriMesh:
    """nx x ny lattice, each cell split along its (i, j)-(i+1, j+1) diagonal. Node (i, j) has index i*ny + j."""
    dy = dx if dy is None else dy
    X, Y = np.meshgrid(np.arange(nx) * dx, np.arange(ny) * dy, indexing="ij")
    nodes = np.stack([X.ravel(), Y.ravel()], axis=1)
    triangles = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            a, b, c, d = i * ny + j, (i + 1) * ny + j, (i + 1) * ny + j + 1, i * ny + j + 1
            triangles.append([a, b, c])
            triangles.append([a, c, d])
    return TriMesh.from_arrays(nodes, triangles)


def delaunay_mesh(n_points: int = 40, seed: int = 0, width: float = 4000.0, height: float = 3000.0) -> TriMesh:
    """Rectangle corners plus random interior points, Delaunay-triangulated."""
    rng = np.random.default_rng(seed)
    corners = np.array([[0.0, 0.0], [width, 0.0], [width, height], [0.0, height]])
    interior = rng.uniform([0.05 * width, 0.05 * height], [0.95 * width, 0.95 * height], size=(n_points - 4, 2))
    nodes = np.vstack([corners, interior])
    return TriMesh.from_arrays(nodes, Delaunay(nodes).simplices)


def make_state(mesh: TriMesh, thickness=None, surface=None, bed=None, vx=None, vy=None, smb=None,
               time: float = 0.0) -> SimState:
    n = mesh.n_nodes
    thickness = np.full(n, 500.0) if thickness is None else np.asarray(thickness, dtype=np.float64)
    bed = np.zeros(n) if bed is None else np.asarray(bed, dtype=np.float64)
    return SimState(
        thickness=thickness,
        vx=np.zeros(n) if vx is None else np.asarray(vx, dtype=np.float64),
        vy=np.zeros(n) if vy is None else np.asarray(vy, dtype=np.float64),
        surface=bed + thickness if surface is None else np.asarray(surface, dtype=np.float64),
        bed=bed,
        ice_mask=(thickness > 0).astype(np.float64),
        smb=np.zeros(n) if smb is None else np.asarray(smb, dtype=np.float64),
        time=time,
    )


def random_graph(rng: np.random.Generator, n: int, p: float = 0.4) -> GraphTopology:
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return GraphTopology.from_edges(n, edges)


def make_graph_sample(topology: GraphTopology, rng: np.random.Generator, in_features: int = 10,
                      param_value: float = 0.0, mesh: Optional[TriMesh] = None) -> SimpleNamespace:
    """Graph sample with random normalized inputs, attributes and positions."""
    n = topology.n_nodes
    return SimpleNamespace(
        mesh=mesh,
        topology=topology,
        node_inputs=rng.uniform(-1.0, 1.0, size=(n, in_features)),
        node_targets=rng.uniform(-1.0, 1.0, size=(n, 4)),
        edge_attrs=rng.uniform(-1.0, 1.0, size=(topology.n_directed, 5)),
        positions=rng.uniform(-1.0, 1.0, size=(n, 2)),
        param_value=param_value,
        time_index=0,
        scenario_id="test",
    )


def tiny_sim_config(scenario: str = "calving", **overrides) -> SimConfig:
    """A 12 x 6 km domain with a few dozen nodes."""
    settings = {**TINY_DOMAIN, "n_steps": 2, **overrides}
    if scenario == "calving":
        return SimConfig.helheim_like(**settings)
    return SimConfig.pig_like(**settings)


def tiny_model_config(kind: str, **overrides) -> ModelConfig:
    settings = {"hidden": 5, "message": 5, "mlp_hidden": 5, "n_hidden_layers": 2, **overrides}
    return ModelConfig(kind=kind, **settings)


def dense_edge_attrs(topology: GraphTopology, attrs: np.ndarray) -> np.ndarray:
    """(N, N, A) array holding the attribute of directed edge (i, j) at [i, j]."""
    n = topology.n_nodes
    dense = np.zeros((n, n, attrs.shape[1]))
    dense[topology.receivers, topology.senders] = attrs
    return dense


def permute_graph_sample(sample: SimpleNamespace, perm: np.ndarray) -> SimpleNamespace:
    """Relabel nodes so that new node k is old node ``perm[k]``; edge attributes follow their node pairs."""
    inverse = np.argsort(perm)
    topology = GraphTopology.from_edges(sample.topology.n_nodes, inverse[sample.topology.edge_list])
    dense = dense_edge_attrs(sample.topology, sample.edge_attrs)[perm][:, perm]
    return SimpleNamespace(
        **{
            **vars(sample),
            "topology": topology,
            "node_inputs": sample.node_inputs[perm],
            "node_targets": sample.node_targets[perm],
            "edge_attrs": dense[topology.receivers, topology.senders],
            "positions": sample.positions[perm],
        }
    )
