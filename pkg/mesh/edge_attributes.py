"""Per-directed-edge attributes a_ij for the equivariant layers.

For directed edge (i -> j):
    distance      = |pos_j - pos_i|
    surface_slope = (s_j - s_i) / distance
    base_slope    = (b_j - b_i) / distance
    accel_x       = ((vx_j - vx_i) - (vx_j_prev - vx_i_prev)) / dt
    accel_y       = same for vy
"""

from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np

from mesh.topology import GraphTopology, build_topology
from mesh.trimesh import MeshValidationError, TriMesh

if TYPE_CHECKING:
    from icesim.state import SimState

EDGE_ATTRIBUTE_NAMES = ("distance", "surface_slope", "base_slope", "accel_x", "accel_y")
N_EDGE_ATTRIBUTES = len(EDGE_ATTRIBUTE_NAMES)


@dataclass(frozen=True, eq=False)
class EdgeAttributes:
    """Attribute table aligned with ``topology.receivers``/``senders``.

    Attributes:
        topology: Graph the rows refer to.
        values: (2E, 5) array, columns in EDGE_ATTRIBUTE_NAMES order.
    """

    topology: GraphTopology
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.topology.n_directed, N_EDGE_ATTRIBUTES):
            raise ValueError(
                f"edge attribute table must be ({self.topology.n_directed}, {N_EDGE_ATTRIBUTES}), "
                f"got {self.values.shape}"
            )

    def column(self, name: str) -> np.ndarray:
        return self.values[:, EDGE_ATTRIBUTE_NAMES.index(name)]

    def reversed(self) -> np.ndarray:
        """Rows reordered so row e holds the attributes of edge reverse[e]."""
        return self.values[self.topology.reverse]


def compute_edge_attributes(
    mesh: TriMesh,
    state: "SimState",
    prev_state: "SimState",
    dt: float,
    topology: Optional[GraphTopology] = None,
) -> EdgeAttributes:
    """
    Compute distance, slopes and velocity accelerations on every directed edge.

    Args:
        mesh: Mesh the states live on
        state: Oracle state at the current step
        prev_state: State at the previous step (pass ``state`` for t = 0)
        dt: Time between the two states in years
        topology: Precomputed topology of ``mesh``; built when omitted

    Returns:
        EdgeAttributes aligned with the topology's directed edge order

    Raises:
        ValueError: If dt <= 0 or the state size does not match the mesh
        MeshValidationError: If an edge joins coincident nodes
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    for name, st in (("state", state), ("prev_state", prev_state)):
        if len(st.thickness) != mesh.n_nodes:
            raise ValueError(f"{name} has {len(st.thickness)} nodes, mesh has {mesh.n_nodes}")
    if topology is None:
        topology = build_topology(mesh)

    i = topology.receivers
    j = topology.senders
    delta = mesh.nodes[j] - mesh.nodes[i]
    distance = np.hypot(delta[:, 0], delta[:, 1])
    if np.any(distance <= 0):
        e = int(np.flatnonzero(distance <= 0)[0])
        raise MeshValidationError(
            f"edge ({int(i[e])}, {int(j[e])}) joins coincident nodes", node=int(j[e])
        )

    surface_slope = (state.surface[j] - state.surface[i]) / distance
    base_slope = (state.bed[j] - state.bed[i]) / distance
    accel_x = ((state.vx[j] - state.vx[i]) - (prev_state.vx[j] - prev_state.vx[i])) / dt
    accel_y = ((state.vy[j] - state.vy[i]) - (prev_state.vy[j] - prev_state.vy[i])) / dt

    values = np.stack([distance, surface_slope, base_slope, accel_x, accel_y], axis=1)
    return EdgeAttributes(topology=topology, values=values)
