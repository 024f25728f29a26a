"""Statically refined outlet-glacier meshes.

Nodes are laid out column by column on a lightly jittered lattice whose
spacing shrinks from ``coarse_edge`` inland to ``fine_edge`` near the outlet
(x = length_x), then triangulated with Delaunay. The lattice pitch is
``target / LATTICE_FACTOR`` so that both the lattice edges and the
diagonals stay within 1.5x of the local target length.
"""

import math

import numpy as np
from scipy.spatial import Delaunay

from icesim.config import SimConfig
from mesh.trimesh import BOUNDARY_FRONT, BOUNDARY_INTERIOR, BOUNDARY_LATERAL, TriMesh
from observability.logging_config import get_logger

logger = get_logger(__name__)

LATTICE_FACTOR = 1.2
MAX_NODES = 200_000


class MeshGenerationError(ValueError):
    """Raised when the requested sizing cannot produce a valid mesh."""


def target_edge_length(config: SimConfig, x: np.ndarray) -> np.ndarray:
    """Desired edge length at distance ``length_x - x`` from the outlet."""
    d = config.length_x - np.asarray(x, dtype=np.float64)
    if config.transition_zone > 0:
        ramp = np.clip((d - config.fine_zone) / config.transition_zone, 0.0, 1.0)
    else:
        ramp = (d > config.fine_zone).astype(np.float64)
    return config.fine_edge + (config.coarse_edge - config.fine_edge) * ramp


def _column_positions(config: SimConfig) -> np.ndarray:
    lx = config.length_x
    xs = [lx]
    x = lx
    while x > 0:
        x -= float(target_edge_length(config, x)) / LATTICE_FACTOR
        xs.append(x)
        if len(xs) > MAX_NODES:
            raise MeshGenerationError("column count exploded; check edge sizes against the domain")
    xs = np.array(xs)
    # stretch or compress so the last column lands on x = 0
    overshoot = -xs[-1]
    last_gap = xs[-2] - xs[-1]
    if overshoot > 0.5 * last_gap and len(xs) > 2:
        xs = xs[:-1]
    span = lx - xs[-1]
    xs = lx - (lx - xs) * (lx / span)
    xs[-1] = 0.0
    xs[0] = lx
    return xs[::-1]


def generate_mesh(config: SimConfig) -> TriMesh:
    """
    Build the scenario mesh: fine near the outlet, coarse inland.

    Args:
        config: Oracle configuration (domain, edge targets, seed)

    Returns:
        Validated counter-clockwise TriMesh with boundary flags (x = length_x
        is the front boundary, the other sides are lateral)

    Raises:
        MeshGenerationError: If the sizing cannot be realized on the domain
    """
    lx, ly = config.length_x, config.length_y
    if config.fine_edge > min(lx, ly):
        raise MeshGenerationError(
            f"fine edge {config.fine_edge} m does not fit a {lx} x {ly} m domain"
        )
    estimate = (lx * ly) / (config.fine_edge / LATTICE_FACTOR) ** 2
    if config.fine_zone >= lx and estimate > MAX_NODES:
        raise MeshGenerationError(f"sizing would need ~{int(estimate)} nodes (limit {MAX_NODES})")

    rng = np.random.default_rng(config.seed)
    columns = _column_positions(config)

    points = []
    for ci, x in enumerate(columns):
        pitch = float(target_edge_length(config, x)) / LATTICE_FACTOR
        n_rows = max(1, int(math.ceil(ly / pitch - 1e-9)))
        ys = np.linspace(0.0, ly, n_rows + 1)
        col = np.stack([np.full_like(ys, x), ys], axis=1)
        if 0 < ci < len(columns) - 1 and config.mesh_jitter > 0:
            # interior nodes wobble; boundary nodes stay on the rectangle
            interior = slice(1, -1)
            col[interior] += rng.uniform(-1.0, 1.0, size=(n_rows - 1, 2)) * config.mesh_jitter * pitch
        points.append(col)
    nodes = np.concatenate(points, axis=0)
    if len(nodes) > MAX_NODES:
        raise MeshGenerationError(f"sizing needs {len(nodes)} nodes (limit {MAX_NODES})")

    triangulation = Delaunay(nodes)
    triangles = triangulation.simplices.astype(np.int64)

    p0 = nodes[triangles[:, 0]]
    e1 = nodes[triangles[:, 1]] - p0
    e2 = nodes[triangles[:, 2]] - p0
    areas = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    keep = np.abs(areas) > 1e-6 * config.fine_edge ** 2
    triangles = triangles[keep]

    tol = 1e-6
    flags = np.full(len(nodes), BOUNDARY_INTERIOR, dtype=np.int8)
    on_lateral = (nodes[:, 0] <= tol) | (nodes[:, 1] <= tol) | (nodes[:, 1] >= ly - tol)
    flags[on_lateral] = BOUNDARY_LATERAL
    flags[nodes[:, 0] >= lx - tol] = BOUNDARY_FRONT

    mesh = TriMesh.from_arrays(nodes, triangles, flags, orient=True)
    logger.info(
        f"Generated mesh: {mesh.n_nodes} nodes, {mesh.n_triangles} triangles "
        f"(fine={config.fine_edge} m, coarse={config.coarse_edge} m, seed={config.seed})"
    )
    return mesh
