"""Parameter-stratified train/val/test splits.

Test samples are every sample whose scenario parameter is a held-out
value. The remaining samples are split either by parameter (``val_values``)
or by a seeded shuffle with ``floor(train_fraction * n)`` train samples.
"""

import math
from dataclasses import dataclass
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

HELHEIM_TRAINVAL_MPA = (0.70, 0.80, 0.85, 0.90, 1.00)
HELHEIM_TEST_MPA = (0.75, 0.95)
PIG_MELT_RATES = tuple(float(v) for v in range(0, 72, 2))
PIG_TEST_RATES = (0.0, 20.0, 40.0, 60.0)
PIG_VAL_RATES = (10.0, 30.0, 50.0, 70.0)

_REL_TOL = 1e-9


class UnknownParamError(ValueError):
    """Raised when a sample's parameter value appears in no split list."""

    def __init__(self, value: float):
        self.value = value
        super().__init__(f"parameter value {value} is neither a train/val nor a test value")


def _contains(values: Sequence[float], value: float) -> bool:
    return any(math.isclose(v, value, rel_tol=_REL_TOL, abs_tol=1e-12) for v in values)


@dataclass(frozen=True)
class SplitSpec:
    """Which parameter values go where.

    Attributes:
        trainval_values: Parameters whose samples feed train and validation.
        test_values: Held-out parameters.
        val_values: When given, validation is these parameters (a subset of
            ``trainval_values``) instead of a random fraction.
        train_fraction: Train share of the shuffled train/val pool.
        seed: Shuffle seed.
    """

    trainval_values: Tuple[float, ...]
    test_values: Tuple[float, ...] = ()
    val_values: Optional[Tuple[float, ...]] = None
    train_fraction: float = 0.7
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "trainval_values", tuple(float(v) for v in self.trainval_values))
        object.__setattr__(self, "test_values", tuple(float(v) for v in self.test_values))
        if self.val_values is not None:
            object.__setattr__(self, "val_values", tuple(float(v) for v in self.val_values))
        overlap = [v for v in self.test_values if _contains(self.trainval_values, v)]
        if overlap:
            raise ValueError(f"parameter values {overlap} are both train/val and test values")
        if self.val_values is not None:
            stray = [v for v in self.val_values if not _contains(self.trainval_values, v)]
            if stray:
                raise ValueError(f"validation values {stray} are not train/val values")
        if not 0.0 <= self.train_fraction <= 1.0:
            raise ValueError(f"train_fraction must be in [0, 1], got {self.train_fraction}")

    def to_dict(self) -> dict:
        return {
            "trainval_values": list(self.trainval_values),
            "test_values": list(self.test_values),
            "val_values": None if self.val_values is None else list(self.val_values),
            "train_fraction": self.train_fraction,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SplitSpec":
        val = data.get("val_values")
        return cls(
            trainval_values=tuple(data["trainval_values"]),
            test_values=tuple(data.get("test_values", ())),
            val_values=None if val is None else tuple(val),
            train_fraction=data.get("train_fraction", 0.7),
            seed=data.get("seed", 0),
        )


def helheim_split_spec(seed: int = 0) -> SplitSpec:
    """Five calving thresholds shuffled 70/30 into train/val, two held out (values in Pa)."""
    return SplitSpec(
        trainval_values=tuple(v * 1e6 for v in HELHEIM_TRAINVAL_MPA),
        test_values=tuple(v * 1e6 for v in HELHEIM_TEST_MPA),
        seed=seed,
    )


def pig_split_spec(seed: int = 0) -> SplitSpec:
    """Melt rates 0..70 step 2: four validation rates, four test rates, the rest train."""
    return SplitSpec(
        trainval_values=tuple(v for v in PIG_MELT_RATES if not _contains(PIG_TEST_RATES, v)),
        test_values=PIG_TEST_RATES,
        val_values=PIG_VAL_RATES,
        seed=seed,
    )


def split_dataset(samples: Sequence[Any], spec: SplitSpec) -> Tuple[List[Any], List[Any], List[Any]]:
    """
    Partition samples into (train, val, test).

    Raises:
        UnknownParamError: If a sample's ``param_value`` is in no list
    """
    pool, val, test = [], [], []
    for sample in samples:
        value = sample.param_value
        if _contains(spec.test_values, value):
            test.append(sample)
        elif _contains(spec.trainval_values, value):
            if spec.val_values is not None and _contains(spec.val_values, value):
                val.append(sample)
            else:
                pool.append(sample)
        else:
            raise UnknownParamError(value)

    if spec.val_values is not None:
        return pool, val, test

    order = np.random.default_rng(spec.seed).permutation(len(pool))
    n_train = int(math.floor(spec.train_fraction * len(pool)))
    train = [pool[k] for k in order[:n_train]]
    val = [pool[k] for k in order[n_train:]]
    return train, val, test
