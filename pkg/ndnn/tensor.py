"""Trainable parameter buffers and initialization."""

import math
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence, Tuple

import numpy as np


@dataclass(eq=False)
class ParamTensor:
    """A trainable array with its gradient and Adam state.

    Attributes:
        name: Dotted parameter name, unique within a model.
        data: float64 values.
        grad: Accumulated gradient, same shape as ``data``.
        adam_m: First-moment estimate.
        adam_v: Second-moment estimate.
        step: Number of Adam updates applied.
    """

    name: str
    data: np.ndarray
    grad: np.ndarray = field(default=None, repr=False)
    adam_m: np.ndarray = field(default=None, repr=False)
    adam_v: np.ndarray = field(default=None, repr=False)
    step: int = 0

    def __post_init__(self):
        self.data = np.array(self.data, dtype=np.float64)
        for buf in ("grad", "adam_m", "adam_v"):
            if getattr(self, buf) is None:
                setattr(self, buf, np.zeros_like(self.data))
            elif getattr(self, buf).shape != self.data.shape:
                raise ValueError(f"{self.name}.{buf} shape {getattr(self, buf).shape} != {self.data.shape}")

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def zero_grad(self) -> None:
        self.grad.fill(0.0)

    def reset_optimizer(self) -> None:
        self.adam_m.fill(0.0)
        self.adam_v.fill(0.0)
        self.step = 0


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape: Sequence[int]) -> np.ndarray:
    """Uniform in +/- sqrt(6 / (fan_in + fan_out))."""
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=tuple(shape))


def zero_grads(params: Iterable[ParamTensor]) -> None:
    for p in params:
        p.zero_grad()


def count_parameters(params: Iterable[ParamTensor]) -> int:
    return int(sum(p.size for p in params))


def snapshot(params: Iterable[ParamTensor]) -> List[np.ndarray]:
    """Copies of the parameter values, in order."""
    return [p.data.copy() for p in params]


def restore(params: Sequence[ParamTensor], values: Sequence[np.ndarray]) -> None:
    for p, v in zip(params, values):
        p.data[...] = v
