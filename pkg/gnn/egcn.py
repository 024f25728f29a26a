"""E(2)-equivariant graph convolution and the EGCN emulator.

One layer, for directed edge (i <- j) with j in N(i) and C_i = 1/|N(i)|:

    m_ij  = phi_e([h_i, h_j, |x_i - x_j|^2, a_ij])
    x'_i  = x_i + C_i * sum_j (x_i - x_j) * phi_x(m_ij)
    m_i   = C_i * sum_j m_ij
    h'_i  = phi_h([h_i, m_i])

Messages see x only through squared distances, so rotating and translating
x moves x' the same way and leaves h' unchanged.
"""

from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from config.model_config import ModelConfig
from mesh.edge_attributes import N_EDGE_ATTRIBUTES
from mesh.topology import GraphTopology
from ndnn.layers import Linear, Mlp, Module, ShapeMismatchError
from ndnn.tensor import ParamTensor

# input schema columns of the initial velocity
VX0_COLUMN = 3
VY0_COLUMN = 4


class EgcnLayer(Module):
    """phi_e, phi_x and phi_h of one equivariant layer."""

    def __init__(
        self,
        in_features: int,
        out_features: int,
        rng: np.random.Generator,
        message: int = 128,
        mlp_hidden: int = 128,
        n_edge_attrs: int = N_EDGE_ATTRIBUTES,
        slope: float = 0.01,
        name: str = "egcn",
    ):
        self.in_features = in_features
        self.out_features = out_features
        self.message = message
        self.n_edge_attrs = n_edge_attrs
        self.phi_e = Mlp(2 * in_features + 1 + n_edge_attrs, message, rng, hidden=mlp_hidden, slope=slope,
                         name=f"{name}.phi_e")
        self.phi_x = Mlp(message, 1, rng, hidden=mlp_hidden, slope=slope, name=f"{name}.phi_x")
        self.phi_h = Mlp(in_features + message, out_features, rng, hidden=mlp_hidden, slope=slope,
                         name=f"{name}.phi_h")

    def parameters(self) -> List[ParamTensor]:
        return self.phi_e.parameters() + self.phi_x.parameters() + self.phi_h.parameters()

    def _check(self, h: np.ndarray, x: np.ndarray, topology: GraphTopology, edge_attrs: np.ndarray) -> None:
        n = topology.n_nodes
        if h.shape != (n, self.in_features):
            raise ShapeMismatchError("egcn h", h.shape, (n, self.in_features))
        if x.shape != (n, 2):
            raise ShapeMismatchError("egcn x", x.shape, (n, 2))
        if edge_attrs.shape != (topology.n_directed, self.n_edge_attrs):
            raise ShapeMismatchError("egcn edge_attrs", edge_attrs.shape, (topology.n_directed, self.n_edge_attrs))

    def forward(
        self, h: np.ndarray, x: np.ndarray, topology: GraphTopology, edge_attrs: np.ndarray
    ) -> Tuple[Tuple[np.ndarray, np.ndarray], Any]:
        """
        Apply the layer.

        Args:
            h: (N, F) node features
            x: (N, 2) coordinate embedding
            topology: Graph; sums run over N(i)
            edge_attrs: (2E, A) attributes aligned with the directed edges

        Returns:
            ((h', x'), cache)
        """
        self._check(h, x, topology, edge_attrs)
        i, j = topology.receivers, topology.senders
        C = topology.norm_C[:, None]

        d = x[i] - x[j]
        r2 = np.sum(d * d, axis=1, keepdims=True)
        e_in = np.concatenate([h[i], h[j], r2, edge_attrs], axis=1)
        m, c_e = self.phi_e.forward(e_in)
        w, c_x = self.phi_x.forward(m)

        x_new = x + C * topology.sum_at_receivers(d * w)
        m_agg = C * topology.sum_at_receivers(m)
        h_new, c_h = self.phi_h.forward(np.concatenate([h, m_agg], axis=1))
        return (h_new, x_new), (topology, d, w, c_e, c_x, c_h)

    def backward(
        self, dh_new: np.ndarray, dx_new: np.ndarray, cache: Any
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Accumulate parameter gradients.

        Returns:
            (dh, dx, d_edge_attrs)
        """
        topology, d, w, c_e, c_x, c_h = cache
        i = topology.receivers
        C = topology.norm_C[:, None]
        F = self.in_features

        d_hn = self.phi_h.backward(dh_new, c_h)
        dh = d_hn[:, :F].copy()
        dm = (C * d_hn[:, F:])[i]

        # x' = x + C * sum_j d_ij * w_ij
        d_sum = (C * dx_new)[i]
        dd = d_sum * w
        dw = np.sum(d_sum * d, axis=1, keepdims=True)
        dm += self.phi_x.backward(dw, c_x)

        de_in = self.phi_e.backward(dm, c_e)
        dh += topology.sum_at_receivers(de_in[:, :F])
        dh += topology.sum_at_senders(de_in[:, F:2 * F])
        dd += 2.0 * d * de_in[:, 2 * F:2 * F + 1]
        d_attrs = de_in[:, 2 * F + 1:]

        dx = dx_new + topology.sum_at_receivers(dd) - topology.sum_at_senders(dd)
        return dh, dx, d_attrs


def egcn_layer_forward(
    h: np.ndarray, x: np.ndarray, topology: GraphTopology, edge_attrs: np.ndarray, layer: EgcnLayer
) -> Tuple[np.ndarray, np.ndarray]:
    """(h', x') of one equivariant layer."""
    return layer.forward(h, x, topology, edge_attrs)[0]


def egcn_layer_dense(
    h: np.ndarray, x: np.ndarray, adjacency: np.ndarray, edge_attrs: np.ndarray, layer: EgcnLayer
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Reference evaluation over all node pairs with a dense adjacency.

    Args:
        adjacency: (N, N) 0/1 matrix, adjacency[i, j] = 1 when j in N(i)
        edge_attrs: (N, N, A) attribute of pair (i, j); ignored off-graph
    """
    n = len(h)
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    d = x[ii] - x[jj]
    r2 = np.sum(d * d, axis=1, keepdims=True)
    e_in = np.concatenate([h[ii], h[jj], r2, edge_attrs.reshape(n * n, -1)], axis=1)
    m = layer.phi_e.forward(e_in)[0].reshape(n, n, -1)
    w = layer.phi_x.forward(m.reshape(n * n, -1))[0].reshape(n, n, 1)

    deg = adjacency.sum(axis=1)
    C = np.divide(1.0, deg, out=np.zeros(n), where=deg > 0)[:, None]
    A = adjacency[:, :, None]
    x_new = x + C * np.sum(A * d.reshape(n, n, 2) * w, axis=1)
    m_agg = C * np.sum(A * m, axis=1)
    h_new = layer.phi_h.forward(np.concatenate([h, m_agg], axis=1))[0]
    return h_new, x_new


class EgcnModel(Module):
    """Input layer, ``n_hidden_layers`` equivariant layers, output layer.

    The input layer maps the node inputs to h0; the coordinate embedding
    starts from the normalized initial velocity (``coord_mode="velocity"``)
    or the normalized node position (``"position"``). With the ``coords``
    head the velocity outputs come from the final embedding (or its
    displacement in position mode) and thickness/mask from a linear map on
    the final features; the ``hidden`` head maps the final features to all
    four outputs.
    """

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.config = config
        self.input_layer = Linear(config.in_features, config.hidden, rng, name="egcn.input")
        self.layers = [
            EgcnLayer(
                config.hidden, config.hidden, rng,
                message=config.message, mlp_hidden=config.mlp_hidden,
                slope=config.negative_slope, name=f"egcn.layer{k}",
            )
            for k in range(config.n_hidden_layers)
        ]
        head_width = config.out_features - 2 if config.output_head == "coords" else config.out_features
        self.output_layer = Linear(config.hidden, head_width, rng, name="egcn.output")

    def parameters(self) -> List[ParamTensor]:
        params = self.input_layer.parameters()
        for layer in self.layers:
            params += layer.parameters()
        return params + self.output_layer.parameters()

    def architecture(self) -> Dict[str, Any]:
        return self.config.to_dict()

    def prepare(self, samples: List[Any]) -> List[Any]:
        return list(samples)

    def _initial_coords(self, sample: Any) -> np.ndarray:
        if self.config.coord_mode == "position":
            return np.array(sample.positions, dtype=np.float64)
        return sample.node_inputs[:, [VX0_COLUMN, VY0_COLUMN]].copy()

    def forward(self, sample: Any) -> Tuple[np.ndarray, Any]:
        """
        Predict the normalized (vx, vy, H, mask) of every node.

        Raises:
            ShapeMismatchError: If the sample does not carry ``in_features`` inputs
        """
        inputs = sample.node_inputs
        if inputs.ndim != 2 or inputs.shape[1] != self.config.in_features:
            raise ShapeMismatchError("egcn inputs", inputs.shape, (len(inputs), self.config.in_features))
        topology, edge_attrs = sample.topology, sample.edge_attrs

        h, c_in = self.input_layer.forward(inputs)
        x0 = self._initial_coords(sample)
        x = x0
        layer_caches = []
        for layer in self.layers:
            (h, x), c = layer.forward(h, x, topology, edge_attrs)
            layer_caches.append(c)
        head, c_out = self.output_layer.forward(h)

        if self.config.output_head == "coords":
            velocity = x - x0 if self.config.coord_mode == "position" else x
            pred = np.concatenate([velocity, head], axis=1)
        else:
            pred = head
        return pred, (c_in, layer_caches, c_out, len(x), edge_attrs.shape)

    def backward(self, dpred: np.ndarray, cache: Any) -> Dict[str, np.ndarray]:
        """Accumulate gradients; returns gradients of ``node_inputs``, ``edge_attrs`` and ``positions``."""
        c_in, layer_caches, c_out, n, attrs_shape = cache
        if self.config.output_head == "coords":
            dx = dpred[:, :2].copy()
            dh = self.output_layer.backward(dpred[:, 2:], c_out)
        else:
            dx = np.zeros((n, 2))
            dh = self.output_layer.backward(dpred, c_out)
        dx_direct = dx.copy() if self.config.coord_mode == "position" else None

        d_attrs = None
        for layer, c in zip(reversed(self.layers), reversed(layer_caches)):
            dh, dx, da = layer.backward(dh, dx, c)
            d_attrs = da if d_attrs is None else d_attrs + da

        d_inputs = self.input_layer.backward(dh, c_in)
        if self.config.coord_mode == "velocity":
            d_inputs[:, VX0_COLUMN] += dx[:, 0]
            d_inputs[:, VY0_COLUMN] += dx[:, 1]
            dx = np.zeros_like(dx)
        elif self.config.output_head == "coords":
            # x0 also enters as "- x0" in the displacement read-out
            dx = dx - dx_direct
        if d_attrs is None:
            d_attrs = np.zeros(attrs_shape)
        return {"node_inputs": d_inputs, "edge_attrs": d_attrs, "positions": dx}

    def predict_nodes(self, sample: Any) -> np.ndarray:
        return self.forward(sample)[0]
