"""Adam with bias correction, state kept on each ParamTensor."""

import math
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Sequence

import numpy as np

from ndnn.tensor import ParamTensor


class NonFiniteGradientError(ArithmeticError):
    """Raised when a gradient holds NaN or inf; no parameter is updated."""

    def __init__(self, param: str, count: int):
        self.param = param
        self.count = count
        super().__init__(f"non-finite gradient in parameter {param!r} ({count} entries)")


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and loop settings.

    Attributes:
        lr: Adam learning rate.
        epochs: Passes over the training set.
        beta1, beta2, eps: Adam constants.
        batch_size: Graphs per optimizer step; gradients are averaged.
        seed: Seed of the per-epoch shuffle.
        shuffle: Shuffle the training set every epoch.
    """

    lr: float = 0.001
    epochs: int = 400
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 1
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.lr) and self.lr >= 0):
            raise ValueError(f"lr must be a finite value >= 0, got {self.lr}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError(f"Adam betas must lie in [0, 1), got {self.beta1}, {self.beta2}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown TrainConfig fields: {sorted(unknown)}")
        return cls(**data)


def adam_step(params: Sequence[ParamTensor], config: TrainConfig) -> None:
    """
    Apply one Adam update to every parameter from its ``grad``.

    All gradients are checked before anything is written, so a failing step
    leaves parameters and moments untouched.

    Raises:
        NonFiniteGradientError: Naming the first parameter with a bad gradient
    """
    for p in params:
        bad = ~np.isfinite(p.grad)
        if bad.any():
            raise NonFiniteGradientError(p.name, int(bad.sum()))

    b1, b2 = config.beta1, config.beta2
    for p in params:
        p.step += 1
        p.adam_m *= b1
        p.adam_m += (1.0 - b1) * p.grad
        p.adam_v *= b2
        p.adam_v += (1.0 - b2) * (p.grad * p.grad)
        m_hat = p.adam_m / (1.0 - b1 ** p.step)
        v_hat = p.adam_v / (1.0 - b2 ** p.step)
        p.data -= config.lr * m_hat / (np.sqrt(v_hat) + config.eps)
