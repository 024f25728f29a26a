"""Graph topology extracted from a triangular mesh.

Two nodes are neighbors when they share a triangle edge. Besides the
per-node neighbor lists the topology carries a CSR-ordered directed edge
list (receiver i, sender j) and sparse aggregation operators used by the
message-passing layers.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import List

import numpy as np
from scipy import sparse

from mesh.trimesh import MeshValidationError, TriMesh


@dataclass(frozen=True, eq=False)
class GraphTopology:
    """Undirected graph over mesh nodes.

    Attributes:
        n_nodes: Number of nodes N.
        edge_list: (E, 2) unique undirected edges with i < j, lexicographic.
        receivers: (2E,) directed edge receiver i, sorted (CSR order).
        senders: (2E,) directed edge sender j; edge e is the pair (i, j)
            with j in N(i).
        indptr: (N+1,) CSR offsets into receivers/senders.
        reverse: (2E,) index of the opposite directed edge (j, i).
        degrees: (N,) |N(i)|.
        norm_C: (N,) 1/|N(i)|, 0 for isolated nodes.
    """

    n_nodes: int
    edge_list: np.ndarray
    receivers: np.ndarray
    senders: np.ndarray
    indptr: np.ndarray
    reverse: np.ndarray
    degrees: np.ndarray
    norm_C: np.ndarray
    _receive_op: sparse.csr_matrix = field(repr=False)
    _send_op: sparse.csr_matrix = field(repr=False)

    @classmethod
    def from_edges(cls, n_nodes: int, edges) -> "GraphTopology":
        """
        Build a topology from an arbitrary undirected edge collection.

        Duplicate and reversed pairs collapse to one edge.

        Raises:
            ValueError: On self loops or out-of-range indices
        """
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if len(edges) and (edges.min() < 0 or edges.max() >= n_nodes):
            raise ValueError(f"edge index outside [0, {n_nodes})")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValueError("self loops are not allowed in a graph topology")
        edges = np.unique(np.sort(edges, axis=1), axis=0) if len(edges) else np.zeros((0, 2), np.int64)

        directed = np.concatenate([edges, edges[:, ::-1]], axis=0)
        order = np.lexsort((directed[:, 1], directed[:, 0]))
        directed = directed[order]
        receivers = np.ascontiguousarray(directed[:, 0])
        senders = np.ascontiguousarray(directed[:, 1])

        degrees = np.bincount(receivers, minlength=n_nodes).astype(np.int64)
        indptr = np.zeros(n_nodes + 1, dtype=np.int64)
        np.cumsum(degrees, out=indptr[1:])

        # Directed edges are sorted by (i, j), so (j, i) is found by the same key.
        keys = receivers * n_nodes + senders
        reverse = np.searchsorted(keys, senders * n_nodes + receivers)

        norm_C = np.zeros(n_nodes)
        connected = degrees > 0
        norm_C[connected] = 1.0 / degrees[connected]

        n_directed = len(receivers)
        ones = np.ones(n_directed)
        cols = np.arange(n_directed)
        receive_op = sparse.csr_matrix((ones, (receivers, cols)), shape=(n_nodes, n_directed))
        send_op = sparse.csr_matrix((ones, (senders, cols)), shape=(n_nodes, n_directed))

        return cls(
            n_nodes=int(n_nodes),
            edge_list=edges,
            receivers=receivers,
            senders=senders,
            indptr=indptr,
            reverse=reverse,
            degrees=degrees,
            norm_C=norm_C,
            _receive_op=receive_op,
            _send_op=send_op,
        )

    @property
    def n_edges(self) -> int:
        return len(self.edge_list)

    @property
    def n_directed(self) -> int:
        return len(self.receivers)

    @property
    def neighbor_lists(self) -> List[np.ndarray]:
        """Sorted neighbor indices of every node."""
        return np.split(self.senders, self.indptr[1:-1])

    def sum_at_receivers(self, values: np.ndarray) -> np.ndarray:
        """Sum per-directed-edge rows into their receiving node, (N, ...)."""
        flat = values.reshape(len(values), int(np.prod(values.shape[1:])))
        out = np.asarray(self._receive_op @ flat)
        return out.reshape((self.n_nodes,) + values.shape[1:])

    def sum_at_senders(self, values: np.ndarray) -> np.ndarray:
        """Sum per-directed-edge rows into their sending node, (N, ...)."""
        flat = values.reshape(len(values), int(np.prod(values.shape[1:])))
        out = np.asarray(self._send_op @ flat)
        return out.reshape((self.n_nodes,) + values.shape[1:])

    def to_dense(self) -> np.ndarray:
        """Dense 0/1 adjacency matrix without self loops."""
        adj = np.zeros((self.n_nodes, self.n_nodes))
        adj[self.receivers, self.senders] = 1.0
        return adj

    def normalized_adjacency(self) -> sparse.csr_matrix:
        """D̃^{-1/2} (A + I) D̃^{-1/2} with self loops, as used by the GCN rule."""
        n = self.n_nodes
        deg_tilde = (self.degrees + 1).astype(np.float64)
        inv_sqrt = 1.0 / np.sqrt(deg_tilde)
        rows = np.concatenate([self.receivers, np.arange(n)])
        cols = np.concatenate([self.senders, np.arange(n)])
        vals = inv_sqrt[rows] * inv_sqrt[cols]
        return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))

    @cached_property
    def gcn_operator(self) -> sparse.csr_matrix:
        """``normalized_adjacency()`` computed once per topology."""
        return self.normalized_adjacency()


def build_topology(mesh: TriMesh) -> GraphTopology:
    """
    Extract the neighbor relation of a triangular mesh.

    Args:
        mesh: Validated triangular mesh

    Returns:
        GraphTopology with one undirected edge per shared triangle side

    Raises:
        MeshValidationError: If the mesh has a degenerate triangle or an
            out-of-range index
    """
    mesh.validate()
    tri = mesh.triangles
    sides = tri[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    try:
        return GraphTopology.from_edges(mesh.n_nodes, sides)
    except ValueError as e:
        raise MeshValidationError(f"cannot build topology: {e}") from e
