"""Unstructured triangular mesh.

``TriMesh`` holds node coordinates (meters), CCW triangle connectivity and a
per-node boundary marker. Construction validates the mesh invariants; the
JSON layout read and written here is documented in ``mesh/mesh_schema.json``.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

BOUNDARY_INTERIOR = 0
BOUNDARY_LATERAL = 1
BOUNDARY_FRONT = 2
BOUNDARY_NAMES = {"interior": BOUNDARY_INTERIOR, "lateral": BOUNDARY_LATERAL, "front": BOUNDARY_FRONT}

# Nodes closer than this are treated as duplicates.
DUPLICATE_TOLERANCE_M = 1e-6


class MeshValidationError(ValueError):
    """Raised when a mesh violates a structural invariant.

    Attributes:
        triangle: Index of the offending triangle, if one is to blame.
        node: Index of the offending node, if one is to blame.
    """

    def __init__(self, message: str, triangle: int = None, node: int = None):
        super().__init__(message)
        self.triangle = triangle
        self.node = node


def _signed_areas(nodes: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p0 = nodes[triangles[:, 0]]
    e1 = nodes[triangles[:, 1]] - p0
    e2 = nodes[triangles[:, 2]] - p0
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Triangular finite-element mesh.

    Attributes:
        nodes: (N, 2) float64 node coordinates in meters.
        triangles: (T, 3) int64 node indices, counter-clockwise.
        boundary_flags: (N,) int8 marker, interior/lateral/front.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_flags: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.ascontiguousarray(self.nodes, dtype=np.float64))
        object.__setattr__(self, "triangles", np.ascontiguousarray(self.triangles, dtype=np.int64))
        object.__setattr__(self, "boundary_flags", np.ascontiguousarray(self.boundary_flags, dtype=np.int8))
        self.nodes.setflags(write=False)
        self.triangles.setflags(write=False)
        self.boundary_flags.setflags(write=False)
        self.validate()

    @classmethod
    def from_arrays(
        cls,
        nodes: Any,
        triangles: Any,
        boundary_flags: Any = None,
        orient: bool = True,
    ) -> "TriMesh":
        """
        Build a mesh from raw arrays.

        Args:
            nodes: (N, 2) coordinates
            triangles: (T, 3) indices
            boundary_flags: per-node markers; defaults to all interior
            orient: flip clockwise triangles to counter-clockwise before
                validation

        Raises:
            MeshValidationError: If the arrays do not form a valid mesh
        """
        nodes = np.asarray(nodes, dtype=np.float64)
        triangles = np.array(triangles, dtype=np.int64)
        if boundary_flags is None:
            boundary_flags = np.zeros(len(nodes), dtype=np.int8)
        if orient and triangles.ndim == 2 and triangles.shape[1] == 3 and len(triangles):
            in_range = (triangles.min() >= 0) and (triangles.max() < len(nodes))
            if in_range:
                clockwise = _signed_areas(nodes, triangles) < 0
                triangles[clockwise] = triangles[clockwise][:, [0, 2, 1]]
        return cls(nodes=nodes, triangles=triangles, boundary_flags=boundary_flags)

    def validate(self) -> None:
        """
        Check the mesh invariants.

        Raises:
            MeshValidationError: naming the first offending triangle or node
        """
        nodes, triangles = self.nodes, self.triangles
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise MeshValidationError(f"nodes must have shape (N, 2), got {nodes.shape}")
        n = len(nodes)
        if n < 3:
            raise MeshValidationError(f"mesh needs at least 3 nodes, got {n}")
        if not np.all(np.isfinite(nodes)):
            bad = int(np.flatnonzero(~np.all(np.isfinite(nodes), axis=1))[0])
            raise MeshValidationError(f"node {bad} has non-finite coordinates", node=bad)
        if triangles.ndim != 2 or triangles.shape[1] != 3 or len(triangles) == 0:
            raise MeshValidationError(f"triangles must have shape (T, 3) with T >= 1, got {triangles.shape}")
        if self.boundary_flags.shape != (n,):
            raise MeshValidationError(
                f"boundary_flags must have shape ({n},), got {self.boundary_flags.shape}"
            )

        out_of_range = np.any((triangles < 0) | (triangles >= n), axis=1)
        if np.any(out_of_range):
            t = int(np.flatnonzero(out_of_range)[0])
            raise MeshValidationError(
                f"triangle {t} references node outside [0, {n}): {triangles[t].tolist()}", triangle=t
            )

        repeated = (
            (triangles[:, 0] == triangles[:, 1])
            | (triangles[:, 1] == triangles[:, 2])
            | (triangles[:, 0] == triangles[:, 2])
        )
        if np.any(repeated):
            t = int(np.flatnonzero(repeated)[0])
            raise MeshValidationError(f"triangle {t} repeats a node: {triangles[t].tolist()}", triangle=t)

        areas = _signed_areas(nodes, triangles)
        extent = float(np.ptp(nodes, axis=0).max()) or 1.0
        degenerate = np.abs(areas) <= 1e-12 * extent * extent
        if np.any(degenerate):
            t = int(np.flatnonzero(degenerate)[0])
            raise MeshValidationError(f"triangle {t} is degenerate (zero area)", triangle=t)
        if np.any(areas < 0):
            t = int(np.flatnonzero(areas < 0)[0])
            raise MeshValidationError(f"triangle {t} is oriented clockwise", triangle=t)

        used = np.zeros(n, dtype=bool)
        used[triangles.ravel()] = True
        if not np.all(used):
            node = int(np.flatnonzero(~used)[0])
            raise MeshValidationError(f"node {node} belongs to no triangle", node=node)

        pairs = cKDTree(nodes).query_pairs(DUPLICATE_TOLERANCE_M, output_type="ndarray")
        if len(pairs):
            i, j = (int(v) for v in pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))][0])
            raise MeshValidationError(
                f"nodes {i} and {j} are closer than {DUPLICATE_TOLERANCE_M} m", node=j
            )

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def triangle_areas(self) -> np.ndarray:
        return _signed_areas(self.nodes, self.triangles)

    def nodal_areas(self) -> np.ndarray:
        """Lumped (median-dual) area per node: a third of each adjacent triangle."""
        areas = np.zeros(self.n_nodes)
        np.add.at(areas, self.triangles.ravel(), np.repeat(self.triangle_areas() / 3.0, 3))
        return areas

    def bounding_box(self) -> Tuple[float, float, float, float]:
        """Return (xmin, ymin, xmax, ymax)."""
        lo = self.nodes.min(axis=0)
        hi = self.nodes.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def edge_lengths(self) -> np.ndarray:
        """Length of every undirected mesh edge."""
        edges = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        edges = np.unique(edges, axis=0)
        return np.linalg.norm(self.nodes[edges[:, 1]] - self.nodes[edges[:, 0]], axis=1)

    def triangle_gradients(self, values: np.ndarray) -> np.ndarray:
        """
        Constant P1 gradient of a nodal field on every triangle.

        Built from corner differences so a constant field gives exact zeros.

        Returns:
            (T, 2) array of (d/dx, d/dy)
        """
        values = np.asarray(values, dtype=np.float64)
        tri = self.triangles
        p0 = self.nodes[tri[:, 0]]
        e1 = self.nodes[tri[:, 1]] - p0
        e2 = self.nodes[tri[:, 2]] - p0
        df1 = values[tri[:, 1]] - values[tri[:, 0]]
        df2 = values[tri[:, 2]] - values[tri[:, 0]]
        two_area = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        gx = (df1 * e2[:, 1] - df2 * e1[:, 1]) / two_area
        gy = (df2 * e1[:, 0] - df1 * e2[:, 0]) / two_area
        return np.stack([gx, gy], axis=1)

    def nodal_gradient(self, values: np.ndarray) -> np.ndarray:
        """Area-weighted average of the adjacent triangle gradients, (N, 2)."""
        grads = self.triangle_gradients(values)
        weights = self.triangle_areas()
        idx = self.triangles.ravel()
        n = self.n_nodes
        weight_sum = np.bincount(idx, weights=np.repeat(weights, 3), minlength=n)
        gx = np.bincount(idx, weights=np.repeat(grads[:, 0] * weights, 3), minlength=n)
        gy = np.bincount(idx, weights=np.repeat(grads[:, 1] * weights, 3), minlength=n)
        return np.stack([gx, gy], axis=1) / weight_sum[:, None]

    def to_dict(self) -> Dict[str, Any]:
        inverse = {v: k for k, v in BOUNDARY_NAMES.items()}
        return {
            "nodes": self.nodes.tolist(),
            "triangles": self.triangles.tolist(),
            "boundary": [inverse[int(f)] for f in self.boundary_flags],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], orient: bool = True) -> "TriMesh":
        """
        Build a mesh from the documented JSON layout.

        Raises:
            MeshValidationError: If keys are missing or a boundary flag is unknown
        """
        for key in ("nodes", "triangles"):
            if key not in data:
                raise MeshValidationError(f"mesh document is missing '{key}'")
        flags = data.get("boundary")
        if flags is not None:
            try:
                flags = [BOUNDARY_NAMES[f] if isinstance(f, str) else int(f) for f in flags]
            except KeyError as e:
                raise MeshValidationError(f"unknown boundary flag {e.args[0]!r}") from e
        return cls.from_arrays(data["nodes"], data["triangles"], flags, orient=orient)

    def save_json(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f)
        return path

    @classmethod
    def load_json(cls, path: Union[str, Path]) -> "TriMesh":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))
