"""Degree-normalized graph convolution and the GCN emulator.

    h' = LeakyReLU(D̃^{-1/2} (A + I) D̃^{-1/2} h W)
"""

from typing import Any, Dict, List, Tuple

import numpy as np
from scipy import sparse

from config.model_config import ModelConfig
from mesh.topology import GraphTopology
from ndnn.layers import Linear, Module, ShapeMismatchError, leaky_relu, leaky_relu_backward
from ndnn.tensor import ParamTensor, glorot_uniform


class GcnLayer(Module):
    """Weight matrix W (F_in x F_out), no bias, LeakyReLU after propagation."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, slope: float = 0.01,
                 name: str = "gcn"):
        self.in_features = in_features
        self.out_features = out_features
        self.slope = slope
        self.W = ParamTensor(f"{name}.W", glorot_uniform(rng, in_features, out_features, (in_features, out_features)))

    def parameters(self) -> List[ParamTensor]:
        return [self.W]

    def forward(self, h: np.ndarray, operator: sparse.spmatrix) -> Tuple[np.ndarray, Any]:
        """
        Args:
            h: (N, F_in) node features
            operator: (N, N) normalized adjacency with self loops
        """
        if h.ndim != 2 or h.shape[1] != self.in_features:
            raise ShapeMismatchError("gcn h", h.shape, (len(h), self.in_features))
        if operator.shape != (len(h), len(h)):
            raise ShapeMismatchError("gcn operator", operator.shape, (len(h), len(h)))
        z = np.asarray(operator @ (h @ self.W.data))
        return leaky_relu(z, self.slope), (h, z, operator)

    def backward(self, dy: np.ndarray, cache: Any) -> np.ndarray:
        h, z, operator = cache
        dz = leaky_relu_backward(dy, z, self.slope)
        dhw = np.asarray(operator.T @ dz)
        self.W.grad += h.T @ dhw
        return dhw @ self.W.data.T


def gcn_layer_forward(h: np.ndarray, topology: GraphTopology, layer: GcnLayer) -> np.ndarray:
    return layer.forward(h, topology.gcn_operator)[0]


def gcn_layer_dense(h: np.ndarray, adjacency: np.ndarray, layer: GcnLayer) -> np.ndarray:
    """Reference evaluation with a dense adjacency (no self loops in ``adjacency``)."""
    a_tilde = adjacency + np.eye(len(adjacency))
    inv_sqrt = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    operator = inv_sqrt[:, None] * a_tilde * inv_sqrt[None, :]
    return leaky_relu(operator @ h @ layer.W.data, layer.slope)


class GcnModel(Module):
    """Linear input layer, ``n_hidden_layers`` GCN layers, linear output layer."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.config = config
        self.input_layer = Linear(config.in_features, config.hidden, rng, name="gcn.input")
        self.layers = [
            GcnLayer(config.hidden, config.hidden, rng, slope=config.negative_slope, name=f"gcn.layer{k}")
            for k in range(config.n_hidden_layers)
        ]
        self.output_layer = Linear(config.hidden, config.out_features, rng, name="gcn.output")

    def parameters(self) -> List[ParamTensor]:
        params = self.input_layer.parameters()
        for layer in self.layers:
            params += layer.parameters()
        return params + self.output_layer.parameters()

    def architecture(self) -> Dict[str, Any]:
        return self.config.to_dict()

    def prepare(self, samples: List[Any]) -> List[Any]:
        return list(samples)

    def forward(self, sample: Any) -> Tuple[np.ndarray, Any]:
        inputs = sample.node_inputs
        if inputs.ndim != 2 or inputs.shape[1] != self.config.in_features:
            raise ShapeMismatchError("gcn inputs", inputs.shape, (len(inputs), self.config.in_features))
        operator = sample.topology.gcn_operator
        h, c_in = self.input_layer.forward(inputs)
        caches = []
        for layer in self.layers:
            h, c = layer.forward(h, operator)
            caches.append(c)
        pred, c_out = self.output_layer.forward(h)
        return pred, (c_in, caches, c_out)

    def backward(self, dpred: np.ndarray, cache: Any) -> Dict[str, np.ndarray]:
        c_in, caches, c_out = cache
        dh = self.output_layer.backward(dpred, c_out)
        for layer, c in zip(reversed(self.layers), reversed(caches)):
            dh = layer.backward(dh, c)
        return {"node_inputs": self.input_layer.backward(dh, c_in)}

    def predict_nodes(self, sample: Any) -> np.ndarray:
        return self.forward(sample)[0]
