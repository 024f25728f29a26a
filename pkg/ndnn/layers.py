"""Linear maps, LeakyReLU and the single-hidden-layer MLP.

Layers never keep activations between calls: ``forward`` returns
``(output, cache)`` and ``backward(dout, cache)`` accumulates parameter
gradients into ``ParamTensor.grad`` and returns the input gradient. The same
layer can therefore be applied several times per step (e.g. on every graph
edge) and from several threads, as long as gradient accumulation is
serialized.
"""

from typing import Any, List, Tuple

import numpy as np

from ndnn.tensor import ParamTensor, glorot_uniform

DEFAULT_NEGATIVE_SLOPE = 0.01


class ShapeMismatchError(ValueError):
    """Raised when two operands have incompatible shapes."""

    def __init__(self, op: str, left: Tuple[int, ...], right: Tuple[int, ...]):
        self.op = op
        self.left = tuple(left)
        self.right = tuple(right)
        super().__init__(f"{op}: incompatible shapes {self.left} and {self.right}")


def linear_forward(x: np.ndarray, W: np.ndarray, b: np.ndarray = None) -> np.ndarray:
    """
    y = x W + b.

    Args:
        x: (..., F_in)
        W: (F_in, F_out)
        b: (F_out,) or None

    Raises:
        ShapeMismatchError: If the operand widths disagree
    """
    if x.shape[-1] != W.shape[0]:
        raise ShapeMismatchError("linear_forward", x.shape, W.shape)
    y = x @ W
    if b is not None:
        if b.shape != (W.shape[1],):
            raise ShapeMismatchError("linear_forward(bias)", W.shape, b.shape)
        y = y + b
    return y


def linear_backward(
    dy: np.ndarray, x: np.ndarray, W: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Gradients of y = x W + b.

    Returns:
        (dx, dW, db)
    """
    if dy.shape[:-1] != x.shape[:-1] or dy.shape[-1] != W.shape[1]:
        raise ShapeMismatchError("linear_backward", dy.shape, x.shape[:-1] + (W.shape[1],))
    dx = dy @ W.T
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    dW = x2.T @ dy2
    db = dy2.sum(axis=0)
    return dx, dW, db


def leaky_relu(x: np.ndarray, slope: float = DEFAULT_NEGATIVE_SLOPE) -> np.ndarray:
    return np.where(x >= 0, x, slope * x)


def leaky_relu_backward(dy: np.ndarray, x: np.ndarray, slope: float = DEFAULT_NEGATIVE_SLOPE) -> np.ndarray:
    """Derivative 1 for x >= 0 (including x = 0), ``slope`` otherwise."""
    return np.where(x >= 0, dy, slope * dy)


class Module:
    """Base class: anything holding ParamTensors."""

    def parameters(self) -> List[ParamTensor]:
        return []

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()


class Linear(Module):
    """Affine layer with Glorot-uniform weights and zero bias."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, name: str = "linear",
                 bias: bool = True):
        self.in_features = in_features
        self.out_features = out_features
        self.W = ParamTensor(f"{name}.W", glorot_uniform(rng, in_features, out_features, (in_features, out_features)))
        self.b = ParamTensor(f"{name}.b", np.zeros(out_features)) if bias else None

    def parameters(self) -> List[ParamTensor]:
        return [self.W] if self.b is None else [self.W, self.b]

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        y = linear_forward(x, self.W.data, None if self.b is None else self.b.data)
        return y, x

    def backward(self, dy: np.ndarray, cache: Any) -> np.ndarray:
        dx, dW, db = linear_backward(dy, cache, self.W.data)
        self.W.grad += dW
        if self.b is not None:
            self.b.grad += db
        return dx


class LeakyReLU(Module):
    def __init__(self, slope: float = DEFAULT_NEGATIVE_SLOPE):
        self.slope = slope

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        return leaky_relu(x, self.slope), x

    def backward(self, dy: np.ndarray, cache: Any) -> np.ndarray:
        return leaky_relu_backward(dy, cache, self.slope)


class Mlp(Module):
    """in -> hidden -> out with one LeakyReLU after the hidden layer and a linear output."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, hidden: int = 128,
                 slope: float = DEFAULT_NEGATIVE_SLOPE, name: str = "mlp"):
        self.in_features = in_features
        self.hidden = hidden
        self.out_features = out_features
        self.fc1 = Linear(in_features, hidden, rng, name=f"{name}.fc1")
        self.act = LeakyReLU(slope)
        self.fc2 = Linear(hidden, out_features, rng, name=f"{name}.fc2")

    @staticmethod
    def parameter_count(in_features: int, out_features: int, hidden: int = 128) -> int:
        return (in_features + 1) * hidden + (hidden + 1) * out_features

    def parameters(self) -> List[ParamTensor]:
        return self.fc1.parameters() + self.fc2.parameters()

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        z, c1 = self.fc1.forward(x)
        a, c2 = self.act.forward(z)
        y, c3 = self.fc2.forward(a)
        return y, (c1, c2, c3)

    def backward(self, dy: np.ndarray, cache: Any) -> np.ndarray:
        c1, c2, c3 = cache
        da = self.fc2.backward(dy, c3)
        dz = self.act.backward(da, c2)
        return self.fc1.backward(dz, c1)
