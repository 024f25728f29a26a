"""Explicit upwind finite-volume mass transport on the median-dual mesh.

    dH/dt = SMB - div(H v)

Each node owns its median-dual cell (a third of every adjacent triangle).
The dual face between nodes a and b carries the flux

    F_ab = H_up * (v_ab . n_ab),   v_ab = (v_a + v_b) / 2

with H_up the upwind thickness, so interior fluxes cancel pairwise and the
scheme conserves volume to round-off. On the mesh boundary each node sheds
ice through its half of the adjacent boundary edges (outflow only).
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from icesim.config import SimConfig
from icesim.state import SimState, surface_elevation
from mesh.trimesh import TriMesh


class CFLViolationError(ArithmeticError):
    """Raised when dt * max|v| / min edge exceeds the stability limit."""

    def __init__(self, dt: float, max_speed: float, min_edge: float, limit: float = 0.5):
        self.dt = dt
        self.max_speed = max_speed
        self.min_edge = min_edge
        self.courant = dt * max_speed / min_edge
        super().__init__(
            f"CFL violated: dt={dt:.6g} yr * max|v|={max_speed:.6g} m/yr / min edge={min_edge:.6g} m "
            f"= {self.courant:.4g} > {limit}"
        )


@dataclass(frozen=True, eq=False)
class DualGeometry:
    """Median-dual face normals of a mesh.

    Attributes:
        edges: (E, 2) undirected edges (a, b), a < b.
        normals: (E, 2) dual face normal oriented from a to b, scaled by the
            face length.
        boundary_nodes: (B,) node per boundary half-edge.
        boundary_normals: (B, 2) outward normal of that half-edge, scaled by
            its length.
        areas: (N,) dual cell areas.
        min_edge: Shortest mesh edge length.
    """

    edges: np.ndarray
    normals: np.ndarray
    boundary_nodes: np.ndarray
    boundary_normals: np.ndarray
    areas: np.ndarray
    min_edge: float


def build_dual_geometry(mesh: TriMesh) -> DualGeometry:
    """Assemble dual face normals from every triangle's three midpoint-centroid segments."""
    tri = mesh.triangles
    pts = mesh.nodes
    centroids = pts[tri].mean(axis=1)

    a_list, b_list, n_list = [], [], []
    for k in range(3):
        a = tri[:, k]
        b = tri[:, (k + 1) % 3]
        mid = 0.5 * (pts[a] + pts[b])
        seg = centroids - mid
        # rotate the segment by -90 degrees; flip to point from a to b
        normal = np.stack([seg[:, 1], -seg[:, 0]], axis=1)
        direction = pts[b] - pts[a]
        sign = np.sign(np.einsum("ij,ij->i", normal, direction))
        normal *= sign[:, None]
        a_list.append(a)
        b_list.append(b)
        n_list.append(normal)
    a = np.concatenate(a_list)
    b = np.concatenate(b_list)
    normals = np.concatenate(n_list)

    # canonical orientation a < b
    swap = a > b
    a, b = np.where(swap, b, a), np.where(swap, a, b)
    normals[swap] *= -1.0

    keys = a * mesh.n_nodes + b
    unique_keys, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
    edge_normals = np.zeros((len(unique_keys), 2))
    np.add.at(edge_normals, inverse, normals)
    edges = np.stack([unique_keys // mesh.n_nodes, unique_keys % mesh.n_nodes], axis=1)

    # boundary edges belong to exactly one triangle; each end node gets half
    boundary = counts == 1
    first_seen = np.zeros(len(unique_keys), dtype=np.int64)
    first_seen[inverse[::-1]] = np.arange(len(inverse))[::-1]
    bnd_edge = edges[boundary]
    bnd_src = first_seen[boundary]
    tri_of = bnd_src % len(tri)
    opposite = centroids[tri_of]
    pa, pb = pts[bnd_edge[:, 0]], pts[bnd_edge[:, 1]]
    tangent = pb - pa
    outward = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1)
    inward_dir = opposite - 0.5 * (pa + pb)
    flip = np.einsum("ij,ij->i", outward, inward_dir) > 0
    outward[flip] *= -1.0
    half = 0.5 * outward
    boundary_nodes = np.concatenate([bnd_edge[:, 0], bnd_edge[:, 1]])
    boundary_normals = np.concatenate([half, half])

    lengths = np.linalg.norm(pts[edges[:, 1]] - pts[edges[:, 0]], axis=1)
    return DualGeometry(
        edges=edges,
        normals=edge_normals,
        boundary_nodes=boundary_nodes,
        boundary_normals=boundary_normals,
        areas=mesh.nodal_areas(),
        min_edge=float(lengths.min()),
    )


@dataclass(frozen=True)
class MassBudget:
    """Volume terms of one step, all in m^3 (removals positive).

    Closure: delta_volume = smb + clamp - melt - calved - outflow.
    """

    volume_before: float = 0.0
    volume_after: float = 0.0
    smb: float = 0.0
    clamp: float = 0.0
    melt: float = 0.0
    calved: float = 0.0
    outflow: float = 0.0

    @property
    def residual(self) -> float:
        predicted = self.smb + self.clamp - self.melt - self.calved - self.outflow
        return (self.volume_after - self.volume_before) - predicted

    def combine(self, other: "MassBudget") -> "MassBudget":
        """Chain two consecutive budgets."""
        return MassBudget(
            volume_before=self.volume_before,
            volume_after=other.volume_after,
            smb=self.smb + other.smb,
            clamp=self.clamp + other.clamp,
            melt=self.melt + other.melt,
            calved=self.calved + other.calved,
            outflow=self.outflow + other.outflow,
        )


def check_cfl(dt: float, vx: np.ndarray, vy: np.ndarray, min_edge: float, limit: float = 0.5) -> float:
    """
    Return the Courant number dt * max|v| / min_edge.

    Raises:
        CFLViolationError: If it exceeds ``limit``
    """
    max_speed = float(np.max(np.hypot(vx, vy))) if len(vx) else 0.0
    courant = dt * max_speed / min_edge
    if courant > limit:
        raise CFLViolationError(dt, max_speed, min_edge, limit)
    return courant


def advance_thickness_with_budget(
    state: SimState,
    mesh: TriMesh,
    config: SimConfig,
    dt: Optional[float] = None,
    dual: Optional[DualGeometry] = None,
) -> Tuple[SimState, MassBudget]:
    """
    One explicit transport + SMB step and its volume budget.

    Args:
        state: State holding the (frozen) velocity for this step
        mesh: Mesh of the state
        config: Densities, boundary mode and default dt
        dt: Step length in years (defaults to config.dt)
        dual: Precomputed dual geometry of ``mesh``

    Returns:
        (new state at time + dt, budget of the step)

    Raises:
        CFLViolationError: If dt * max|v| / min edge > 0.5
    """
    dt = config.dt if dt is None else dt
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    dual = dual or build_dual_geometry(mesh)
    check_cfl(dt, state.vx, state.vy, dual.min_edge)

    H = state.thickness
    v = np.stack([state.vx, state.vy], axis=1)
    a, b = dual.edges[:, 0], dual.edges[:, 1]
    u_face = np.einsum("ij,ij->i", 0.5 * (v[a] + v[b]), dual.normals)
    h_up = np.where(u_face > 0, H[a], H[b])
    flux = h_up * u_face

    n = mesh.n_nodes
    net_out = np.bincount(a, weights=flux, minlength=n) - np.bincount(b, weights=flux, minlength=n)

    outflow_nodes = np.zeros(n)
    if not config.closed_boundary and len(dual.boundary_nodes):
        bn = dual.boundary_nodes
        u_out = np.maximum(np.einsum("ij,ij->i", v[bn], dual.boundary_normals), 0.0)
        outflow_nodes = np.bincount(bn, weights=H[bn] * u_out, minlength=n)
        net_out = net_out + outflow_nodes

    h_transport = H - dt * net_out / dual.areas
    source = np.where(state.ice_mask > 0, state.smb * dt, 0.0)
    h_source = h_transport + source
    h_new = np.maximum(h_source, 0.0)
    mask = (h_new > 0).astype(np.float64)
    surface = surface_elevation(h_new, state.bed, config.rho_ice, config.rho_water)

    areas = dual.areas
    budget = MassBudget(
        volume_before=float(np.dot(H, areas)),
        volume_after=float(np.dot(h_new, areas)),
        smb=float(np.dot(source, areas)),
        clamp=float(np.dot(h_new - h_source, areas)),
        outflow=float(dt * outflow_nodes.sum()),
    )
    new_state = state.replace(thickness=h_new, ice_mask=mask, surface=surface, time=state.time + dt)
    return new_state, budget


def advance_thickness(
    state: SimState,
    mesh: TriMesh,
    config: SimConfig,
    dt: Optional[float] = None,
    dual: Optional[DualGeometry] = None,
) -> SimState:
    """Advance H by one explicit step; see ``advance_thickness_with_budget``."""
    return advance_thickness_with_budget(state, mesh, config, dt=dt, dual=dual)[0]
