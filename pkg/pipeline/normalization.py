"""Nominal per-variable bounds and the affine map to [-1, 1].

Bounds come from the oracle configuration (not from dataset min/max), so
every split and every later evaluation normalize with the same numbers.
The bounds' SHA-256 digest travels with datasets and checkpoints.
"""

import hashlib
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from icesim.config import MELT_RATE_RANGE, SIGMA_MAX_RANGE, SimConfig
from ndnn.container import canonical_json
from observability.logging_config import get_logger

logger = get_logger(__name__)

NODE_INPUT_NAMES = ("param", "time", "smb", "vx0", "vy0", "surface0", "bed", "thickness0", "mask0", "extra")
NODE_TARGET_NAMES = ("vx", "vy", "thickness", "mask")
EXTRA_FEATURES = ("constant", "x_coord")

# bounds key used by each input column
INPUT_BOUNDS_KEYS = ("param", "time", "smb", "vx", "vy", "surface", "bed", "thickness", "mask", "extra")

DEFAULT_VELOCITY_LIMIT = 5000.0  # m/yr
DEFAULT_ACCEL_LIMIT = 1.0e5  # m/yr^2


class BoundsMismatchError(ValueError):
    """Raised when data normalized with one set of bounds meets another."""


@dataclass(frozen=True, eq=False)
class Bounds:
    """Variable name -> (lo, hi) with lo < hi."""

    ranges: Dict[str, Tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        for name, (lo, hi) in self.ranges.items():
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"bounds for {name!r} must satisfy lo < hi, got ({lo}, {hi})")

    def range_of(self, name: str) -> Tuple[float, float]:
        if name not in self.ranges:
            raise KeyError(f"no bounds for variable {name!r}")
        return self.ranges[name]

    def normalize(self, name: str, values: np.ndarray, clip: bool = True) -> np.ndarray:
        """
        Map physical values to [-1, 1].

        Out-of-range values are clipped (and logged) unless ``clip`` is False.
        """
        lo, hi = self.range_of(name)
        z = 2.0 * (np.asarray(values, dtype=np.float64) - lo) / (hi - lo) - 1.0
        if clip:
            outside = np.abs(z) > 1.0
            if np.any(outside):
                logger.warning(
                    f"{int(outside.sum())} {name} values outside nominal bounds [{lo}, {hi}] were clipped"
                )
                z = np.clip(z, -1.0, 1.0)
        return z

    def denormalize(self, name: str, z: np.ndarray) -> np.ndarray:
        lo, hi = self.range_of(name)
        return lo + (np.asarray(z, dtype=np.float64) + 1.0) * (hi - lo) / 2.0

    def to_dict(self) -> Dict[str, list]:
        return {name: [float(lo), float(hi)] for name, (lo, hi) in sorted(self.ranges.items())}

    @classmethod
    def from_dict(cls, data: Dict[str, list]) -> "Bounds":
        return cls({name: (float(v[0]), float(v[1])) for name, v in data.items()})

    def digest(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode("utf-8")).hexdigest()

    def check_digest(self, expected: str) -> None:
        """
        Raises:
            BoundsMismatchError: If ``expected`` differs from this digest
        """
        actual = self.digest()
        if expected and expected != actual:
            raise BoundsMismatchError(
                f"normalization bounds differ from the ones used in training ({actual[:12]} != {expected[:12]})"
            )


def _padded(lo: float, hi: float, fraction: float = 0.05) -> Tuple[float, float]:
    pad = fraction * max(hi - lo, 1.0)
    return lo - pad, hi + pad


def nominal_bounds(
    config: SimConfig,
    extra_feature: str = "constant",
    velocity_limit: float = DEFAULT_VELOCITY_LIMIT,
    accel_limit: float = DEFAULT_ACCEL_LIMIT,
) -> Bounds:
    """
    Fixed bounds for every node and edge variable of a scenario family.

    Args:
        config: Oracle configuration (scenario kind, geometry, constants)
        extra_feature: Meaning of the 10th input ("constant" or "x_coord")
        velocity_limit: Nominal maximum speed in m/yr
        accel_limit: Nominal bound of the edge accelerations in m/yr^2
    """
    if extra_feature not in EXTRA_FEATURES:
        raise ValueError(f"extra_feature must be one of {EXTRA_FEATURES}, got {extra_feature!r}")
    param = SIGMA_MAX_RANGE if config.scenario == "calving" else MELT_RATE_RANGE
    relief = 3.0 * config.bed_roughness
    bed_lo = min(config.bed_inland, config.bed_front) - config.trough_depth - relief
    bed_hi = max(config.bed_inland, config.bed_front) + relief
    h_max = 1.5 * (config.thickness_inland + 0.5 * config.trough_depth)
    smb_lo, smb_hi = sorted((config.smb_inland, config.smb_front))
    ranges = {
        "param": param,
        "time": (0.0, config.t_end if config.t_end > 0 else 1.0),
        "smb": _padded(smb_lo, smb_hi),
        "vx": (-velocity_limit, velocity_limit),
        "vy": (-velocity_limit, velocity_limit),
        "surface": (0.0, max(bed_hi, 0.0) + h_max),
        "bed": (bed_lo, bed_hi),
        "thickness": (0.0, h_max),
        "mask": (0.0, 1.0),
        "extra": (0.0, config.length_x) if extra_feature == "x_coord" else (0.0, 1.0),
        "x": (0.0, config.length_x),
        "y": (0.0, config.length_y),
        "distance": (0.0, 2.0 * config.coarse_edge),
        "surface_slope": (-1.0, 1.0),
        "base_slope": (-1.0, 1.0),
        "accel_x": (-accel_limit, accel_limit),
        "accel_y": (-accel_limit, accel_limit),
    }
    return Bounds(ranges)
