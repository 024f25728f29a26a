"""Regular-grid convolutional baseline.

Mesh samples are interpolated onto the 1 km grid (barycentric inside the
mesh hull), pushed through a stack of zero-padded 3x3 convolutions, and
the predicted grids are sampled back at the mesh nodes bilinearly so every
engine is scored at the same points.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from config.model_config import ModelConfig
from mesh.regrid import GridLocation, GridSpec, locate_grid_points, mesh_to_grid, sample_bilinear
from mesh.trimesh import TriMesh
from ndnn.layers import Module, ShapeMismatchError, leaky_relu, leaky_relu_backward
from ndnn.tensor import ParamTensor, glorot_uniform

KERNEL_SIZE = 3


def _im2col(grid: np.ndarray) -> np.ndarray:
    """(C, nx, ny) -> (C*9, nx*ny) columns of the zero-padded 3x3 neighborhoods."""
    c, nx, ny = grid.shape
    padded = np.pad(grid, ((0, 0), (1, 1), (1, 1)))
    windows = sliding_window_view(padded, (KERNEL_SIZE, KERNEL_SIZE), axis=(1, 2))  # (C, nx, ny, 3, 3)
    return windows.transpose(0, 3, 4, 1, 2).reshape(c * KERNEL_SIZE * KERNEL_SIZE, nx * ny)


def _col2im(cols: np.ndarray, shape: Tuple[int, int, int]) -> np.ndarray:
    c, nx, ny = shape
    cols = cols.reshape(c, KERNEL_SIZE, KERNEL_SIZE, nx, ny)
    padded = np.zeros((c, nx + 2, ny + 2))
    for di in range(KERNEL_SIZE):
        for dj in range(KERNEL_SIZE):
            padded[:, di:di + nx, dj:dj + ny] += cols[:, di, dj]
    return padded[:, 1:-1, 1:-1]


def _check_kernel(grid: np.ndarray, kernel: np.ndarray) -> None:
    if kernel.ndim != 4 or kernel.shape[2:] != (KERNEL_SIZE, KERNEL_SIZE):
        raise ShapeMismatchError("conv2d kernel (must be C_out x C_in x 3 x 3)", kernel.shape, (KERNEL_SIZE, KERNEL_SIZE))
    if grid.ndim != 3 or grid.shape[0] != kernel.shape[1]:
        raise ShapeMismatchError("conv2d", grid.shape, kernel.shape)


def conv2d_forward(grid: np.ndarray, kernel: np.ndarray, bias: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Zero-padded 3x3 cross-correlation keeping the grid dims.

    out[o, x, y] = sum_c sum_{di,dj} kernel[o, c, di, dj] * grid[c, x+di-1, y+dj-1]

    Args:
        grid: (C_in, nx, ny)
        kernel: (C_out, C_in, 3, 3)
        bias: (C_out,) or None

    Raises:
        ShapeMismatchError: If the kernel is not 3x3 or the channels disagree
    """
    _check_kernel(grid, kernel)
    c_out = kernel.shape[0]
    _, nx, ny = grid.shape
    out = kernel.reshape(c_out, -1) @ _im2col(grid)
    if bias is not None:
        out = out + bias[:, None]
    return out.reshape(c_out, nx, ny)


def conv2d_backward(
    dout: np.ndarray, grid: np.ndarray, kernel: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dgrid, dkernel, dbias)."""
    c_out = kernel.shape[0]
    cols = _im2col(grid)
    d2 = dout.reshape(c_out, -1)
    dkernel = (d2 @ cols.T).reshape(kernel.shape)
    dbias = d2.sum(axis=1)
    dgrid = _col2im(kernel.reshape(c_out, -1).T @ d2, grid.shape)
    return dgrid, dkernel, dbias


class Conv2d(Module):
    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator, name: str = "conv"):
        fan_in = in_channels * KERNEL_SIZE * KERNEL_SIZE
        fan_out = out_channels * KERNEL_SIZE * KERNEL_SIZE
        shape = (out_channels, in_channels, KERNEL_SIZE, KERNEL_SIZE)
        self.kernel = ParamTensor(f"{name}.kernel", glorot_uniform(rng, fan_in, fan_out, shape))
        self.bias = ParamTensor(f"{name}.bias", np.zeros(out_channels))

    def parameters(self) -> List[ParamTensor]:
        return [self.kernel, self.bias]

    def forward(self, grid: np.ndarray) -> Tuple[np.ndarray, Any]:
        return conv2d_forward(grid, self.kernel.data, self.bias.data), grid

    def backward(self, dout: np.ndarray, cache: Any) -> np.ndarray:
        dgrid, dk, db = conv2d_backward(dout, cache, self.kernel.data)
        self.kernel.grad += dk
        self.bias.grad += db
        return dgrid


@dataclass(eq=False)
class GridSample:
    """One mesh sample interpolated onto the regular grid.

    Attributes:
        inputs: (C_in, nx, ny) gridded node inputs.
        targets: (C_out, nx, ny) gridded node targets.
        valid: (nx, ny) cells inside the mesh hull.
        spec: Grid geometry.
        source: The mesh sample this grid was built from.
    """

    inputs: np.ndarray
    targets: np.ndarray
    valid: np.ndarray
    spec: GridSpec
    source: Any = None


def to_grid_sample(sample: Any, location: GridLocation) -> GridSample:
    """Grid every input and target channel of a mesh sample."""
    mesh = sample.mesh
    fields = {f"in{k}": sample.node_inputs[:, k] for k in range(sample.node_inputs.shape[1])}
    fields.update({f"out{k}": sample.node_targets[:, k] for k in range(sample.node_targets.shape[1])})
    grid = mesh_to_grid(mesh, fields, location=location)
    inputs = np.stack([grid.values[f"in{k}"] for k in range(sample.node_inputs.shape[1])])
    targets = np.stack([grid.values[f"out{k}"] for k in range(sample.node_targets.shape[1])])
    return GridSample(inputs=inputs, targets=targets, valid=grid.valid, spec=location.spec, source=sample)


class FcnModel(Module):
    """Input conv, ``n_hidden_layers`` hidden convs with LeakyReLU, linear output conv."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.config = config
        self.input_conv = Conv2d(config.in_features, config.hidden, rng, name="fcn.input")
        self.hidden_convs = [
            Conv2d(config.hidden, config.hidden, rng, name=f"fcn.hidden{k}") for k in range(config.n_hidden_layers)
        ]
        self.output_conv = Conv2d(config.hidden, config.out_features, rng, name="fcn.output")
        self._locations: Dict[int, Tuple[TriMesh, GridLocation]] = {}

    def parameters(self) -> List[ParamTensor]:
        params = self.input_conv.parameters()
        for conv in self.hidden_convs:
            params += conv.parameters()
        return params + self.output_conv.parameters()

    def architecture(self) -> Dict[str, Any]:
        return self.config.to_dict()

    def location_for(self, mesh: TriMesh) -> GridLocation:
        """Grid weights of ``mesh`` on the model's grid spacing, computed once per mesh."""
        entry = self._locations.get(id(mesh))
        if entry is None or entry[0] is not mesh:
            location = locate_grid_points(mesh, GridSpec.covering(mesh, self.config.grid_spacing))
            entry = (mesh, location)
            self._locations[id(mesh)] = entry
        return entry[1]

    def prepare(self, samples: List[Any]) -> List[GridSample]:
        """Turn mesh samples into grid samples (grid samples pass through)."""
        return [s if isinstance(s, GridSample) else to_grid_sample(s, self.location_for(s.mesh)) for s in samples]

    def forward_grid(self, grid: np.ndarray) -> Tuple[np.ndarray, Any]:
        if grid.ndim != 3 or grid.shape[0] != self.config.in_features:
            raise ShapeMismatchError("fcn inputs", grid.shape, (self.config.in_features,) + grid.shape[1:])
        z, c_in = self.input_conv.forward(grid)
        caches = []
        for conv in self.hidden_convs:
            pre, c = conv.forward(z)
            z = leaky_relu(pre, self.config.negative_slope)
            caches.append((c, pre))
        out, c_out = self.output_conv.forward(z)
        return out, (c_in, caches, c_out)

    def forward(self, item: Any) -> Tuple[np.ndarray, Any]:
        """Predict the (4, nx, ny) output grids of a GridSample or a raw input grid."""
        grid = item.inputs if isinstance(item, GridSample) else item
        return self.forward_grid(grid)

    def backward(self, dout: np.ndarray, cache: Any) -> np.ndarray:
        c_in, caches, c_out = cache
        dz = self.output_conv.backward(dout, c_out)
        for conv, (c, pre) in zip(reversed(self.hidden_convs), reversed(caches)):
            dz = conv.backward(leaky_relu_backward(dz, pre, self.config.negative_slope), c)
        return self.input_conv.backward(dz, c_in)

    def predict_nodes(self, sample: Any) -> np.ndarray:
        """Grid the sample, predict, and sample the predicted grids at the mesh nodes."""
        grid_sample = sample if isinstance(sample, GridSample) else self.prepare([sample])[0]
        mesh_sample = grid_sample.source
        pred, _ = self.forward(grid_sample)
        points = mesh_sample.mesh.nodes
        return np.stack([sample_bilinear(grid_sample.spec, pred[c], points) for c in range(len(pred))], axis=1)
