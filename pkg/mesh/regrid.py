"""Resampling between mesh nodes and a regular grid.

mesh -> grid uses the barycentric (P1) interpolant of the enclosing triangle;
grid points outside the mesh hull are marked invalid and filled with the
linear extension of the nearest triangle so that bilinear sampling near the
hull stays exact for affine fields. grid -> mesh is plain bilinear
interpolation from the four surrounding grid points.
"""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Union

import numpy as np
from scipy.spatial import cKDTree

from mesh.trimesh import TriMesh

# Barycentric tolerance for points on triangle edges.
_INSIDE_TOL = 1e-12


class GridExtentError(ValueError):
    """Raised when a mesh node falls outside the grid.

    Attributes:
        node: Index of the first node outside the grid extent.
    """

    def __init__(self, message: str, node: int):
        super().__init__(message)
        self.node = node


@dataclass(frozen=True)
class GridSpec:
    """Regular grid geometry. Point (ix, iy) sits at (x0 + ix*h, y0 + iy*h)."""

    x0: float
    y0: float
    spacing: float
    nx: int
    ny: int

    def __post_init__(self):
        if not self.spacing > 0:
            raise ValueError(f"grid spacing must be > 0, got {self.spacing}")
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"grid needs at least 2x2 points, got {self.nx}x{self.ny}")

    @classmethod
    def covering(cls, mesh: TriMesh, spacing: float = 1000.0) -> "GridSpec":
        """Smallest grid aligned to multiples of ``spacing`` covering the mesh bounding box."""
        if not spacing > 0:
            raise ValueError(f"grid spacing must be > 0, got {spacing}")
        xmin, ymin, xmax, ymax = mesh.bounding_box()
        x0 = math.floor(xmin / spacing) * spacing
        y0 = math.floor(ymin / spacing) * spacing
        nx = max(2, int(math.ceil((xmax - x0) / spacing - 1e-9)) + 1)
        ny = max(2, int(math.ceil((ymax - y0) / spacing - 1e-9)) + 1)
        return cls(x0=float(x0), y0=float(y0), spacing=float(spacing), nx=nx, ny=ny)

    def coordinates(self):
        """Return (X, Y), each (nx, ny), of every grid point."""
        xs = self.x0 + self.spacing * np.arange(self.nx)
        ys = self.y0 + self.spacing * np.arange(self.ny)
        return np.meshgrid(xs, ys, indexing="ij")


@dataclass(eq=False)
class RegularGrid:
    """Gridded variables with a shared validity mask.

    Attributes:
        spec: Grid geometry.
        values: name -> (nx, ny) array.
        valid: (nx, ny) bool, False outside the mesh hull.
    """

    spec: GridSpec
    valid: np.ndarray
    values: Dict[str, np.ndarray] = field(default_factory=dict)

    def save_csv(self, path: Union[str, Path], name: str = "value") -> Path:
        """Write one variable as rows ``x,y,value,valid``."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        X, Y = self.spec.coordinates()
        data = self.values[name]
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["x", "y", "value", "valid"])
            for x, y, v, ok in zip(X.ravel(), Y.ravel(), data.ravel(), self.valid.ravel()):
                writer.writerow([repr(float(x)), repr(float(y)), repr(float(v)), int(ok)])
        return path

    def save_binary(self, path: Union[str, Path], name: str = "value") -> Path:
        """Write one variable as flat little-endian float64, row-major (nx, ny)."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        np.ascontiguousarray(self.values[name], dtype="<f8").tofile(path)
        return path


@dataclass(frozen=True, eq=False)
class GridLocation:
    """Precomputed mesh -> grid interpolation weights.

    Attributes:
        spec: Grid geometry.
        triangle: (nx*ny,) triangle used for each grid point.
        weights: (nx*ny, 3) barycentric weights on that triangle's corners.
        valid: (nx, ny) True where the point lies inside the mesh.
    """

    spec: GridSpec
    triangle: np.ndarray
    weights: np.ndarray
    valid: np.ndarray


def _barycentric(mesh: TriMesh, tri_idx: np.ndarray, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    corners = mesh.triangles[tri_idx]
    x1, y1 = mesh.nodes[corners[:, 0], 0], mesh.nodes[corners[:, 0], 1]
    x2, y2 = mesh.nodes[corners[:, 1], 0], mesh.nodes[corners[:, 1], 1]
    x3, y3 = mesh.nodes[corners[:, 2], 0], mesh.nodes[corners[:, 2], 1]
    det = (y2 - y3) * (x1 - x3) + (x3 - x2) * (y1 - y3)
    l1 = ((y2 - y3) * (px - x3) + (x3 - x2) * (py - y3)) / det
    l2 = ((y3 - y1) * (px - x3) + (x1 - x3) * (py - y3)) / det
    return np.stack([l1, l2, 1.0 - l1 - l2], axis=1)


def locate_grid_points(mesh: TriMesh, spec: GridSpec) -> GridLocation:
    """
    Find the enclosing triangle and barycentric weights of every grid point.

    Each triangle scans the grid points inside its bounding box; the first
    triangle (lowest index) claiming a point keeps it. Unclaimed points are
    attached to the triangle with the nearest centroid.
    """
    X, Y = spec.coordinates()
    px, py = X.ravel(), Y.ravel()
    n_points = px.size
    owner = np.full(n_points, -1, dtype=np.int64)
    h = spec.spacing

    tri_nodes = mesh.nodes[mesh.triangles]
    lo = tri_nodes.min(axis=1)
    hi = tri_nodes.max(axis=1)
    ix_lo = np.clip(np.ceil((lo[:, 0] - spec.x0) / h - 1e-9).astype(np.int64), 0, spec.nx - 1)
    ix_hi = np.clip(np.floor((hi[:, 0] - spec.x0) / h + 1e-9).astype(np.int64), 0, spec.nx - 1)
    iy_lo = np.clip(np.ceil((lo[:, 1] - spec.y0) / h - 1e-9).astype(np.int64), 0, spec.ny - 1)
    iy_hi = np.clip(np.floor((hi[:, 1] - spec.y0) / h + 1e-9).astype(np.int64), 0, spec.ny - 1)

    for t in range(mesh.n_triangles):
        if ix_hi[t] < ix_lo[t] or iy_hi[t] < iy_lo[t]:
            continue
        gx, gy = np.meshgrid(
            np.arange(ix_lo[t], ix_hi[t] + 1), np.arange(iy_lo[t], iy_hi[t] + 1), indexing="ij"
        )
        flat = (gx * spec.ny + gy).ravel()
        flat = flat[owner[flat] < 0]
        if flat.size == 0:
            continue
        lam = _barycentric(mesh, np.full(flat.size, t), px[flat], py[flat])
        inside = np.all(lam >= -_INSIDE_TOL, axis=1)
        owner[flat[inside]] = t

    valid = owner >= 0
    if not np.all(valid):
        centroids = tri_nodes.mean(axis=1)
        _, nearest = cKDTree(centroids).query(np.stack([px[~valid], py[~valid]], axis=1))
        owner[~valid] = nearest

    weights = _barycentric(mesh, owner, px, py)
    return GridLocation(spec=spec, triangle=owner, weights=weights, valid=valid.reshape(spec.nx, spec.ny))


def mesh_to_grid(
    mesh: TriMesh,
    nodal_values: Union[np.ndarray, Dict[str, np.ndarray]],
    grid_spec: GridSpec = None,
    location: GridLocation = None,
) -> RegularGrid:
    """
    Interpolate nodal fields onto a regular grid.

    Args:
        mesh: Source mesh
        nodal_values: One (N,) array (stored as "value") or a name -> array dict
        grid_spec: Target grid; defaults to a 1 km grid covering the mesh
        location: Precomputed weights from ``locate_grid_points`` (reused
            across many fields on the same mesh/grid)

    Returns:
        RegularGrid with one entry per input field

    Raises:
        ValueError: On an empty mesh, wrong field length or non-finite values
    """
    if mesh is None or mesh.n_nodes == 0:
        raise ValueError("cannot interpolate from an empty mesh")
    fields = nodal_values if isinstance(nodal_values, dict) else {"value": nodal_values}
    if location is None:
        location = locate_grid_points(mesh, grid_spec or GridSpec.covering(mesh))
    spec = location.spec

    corners = mesh.triangles[location.triangle]
    out = {}
    for name, values in fields.items():
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (mesh.n_nodes,):
            raise ValueError(f"field {name!r} has shape {values.shape}, expected ({mesh.n_nodes},)")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"field {name!r} has non-finite nodal values")
        gridded = np.einsum("pk,pk->p", location.weights, values[corners])
        out[name] = gridded.reshape(spec.nx, spec.ny)
    return RegularGrid(spec=spec, valid=location.valid.copy(), values=out)


def bilinear_weights(spec: GridSpec, points: np.ndarray):
    """
    Corner indices and weights for bilinear sampling at arbitrary points.

    Returns:
        (ix, iy, wx, wy): lower-left corner indices and fractional offsets

    Raises:
        GridExtentError: If a point lies outside the grid extent
    """
    h = spec.spacing
    fx = (points[:, 0] - spec.x0) / h
    fy = (points[:, 1] - spec.y0) / h
    tol = 1e-9
    outside = (fx < -tol) | (fy < -tol) | (fx > spec.nx - 1 + tol) | (fy > spec.ny - 1 + tol)
    if np.any(outside):
        node = int(np.flatnonzero(outside)[0])
        raise GridExtentError(
            f"node {node} at ({points[node, 0]:.3f}, {points[node, 1]:.3f}) lies outside the grid", node=node
        )
    ix = np.clip(np.floor(fx).astype(np.int64), 0, spec.nx - 2)
    iy = np.clip(np.floor(fy).astype(np.int64), 0, spec.ny - 2)
    return ix, iy, fx - ix, fy - iy


def grid_to_mesh(grid: RegularGrid, mesh: TriMesh, name: str = "value") -> np.ndarray:
    """
    Sample a gridded variable at the mesh nodes with bilinear interpolation.

    Raises:
        GridExtentError: naming the first node outside the grid
    """
    return sample_bilinear(grid.spec, grid.values[name], mesh.nodes)


def sample_bilinear(spec: GridSpec, values: np.ndarray, points: np.ndarray) -> np.ndarray:
    ix, iy, wx, wy = bilinear_weights(spec, points)
    v00 = values[ix, iy]
    v10 = values[ix + 1, iy]
    v01 = values[ix, iy + 1]
    v11 = values[ix + 1, iy + 1]
    return (1 - wx) * (1 - wy) * v00 + wx * (1 - wy) * v10 + (1 - wx) * wy * v01 + wx * wy * v11
