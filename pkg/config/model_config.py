"""Model configuration module.

``ModelConfig`` is the architecture descriptor shared by the three emulators.
It is embedded verbatim in checkpoint headers so a checkpoint can rebuild the
exact network that produced it.
"""

from dataclasses import asdict, dataclass, fields
from typing import Any, Dict

MODEL_KINDS = ("egcn", "gcn", "fcn")
OUTPUT_HEADS = ("coords", "hidden")
COORD_MODES = ("velocity", "position")


@dataclass(frozen=True)
class ModelConfig:
    """Configuration for the emulator networks.

    Attributes:
        kind: One of "egcn", "gcn", "fcn".
        in_features: Node input channels (10).
        hidden: Feature width of the input/hidden layers (128).
        message: EGCN message width F_msg (128).
        mlp_hidden: Hidden width of the EGCN edge/coordinate/node MLPs (128).
        n_hidden_layers: Number of hidden graph/conv layers (5).
        out_features: Predicted channels vx, vy, H, mask (4).
        output_head: EGCN only. "coords" reads velocities from the final
            coordinate embedding, "hidden" predicts all 4 outputs from h.
        coord_mode: EGCN only. "velocity" seeds x with the initial velocity,
            "position" seeds x with node positions and reads the velocity as
            the displacement x_final - x_initial.
        negative_slope: LeakyReLU slope (0.01).
        grid_spacing: FCN regular grid spacing in meters (1000).
    """

    kind: str = "egcn"
    in_features: int = 10
    hidden: int = 128
    message: int = 128
    mlp_hidden: int = 128
    n_hidden_layers: int = 5
    out_features: int = 4
    output_head: str = "coords"
    coord_mode: str = "velocity"
    negative_slope: float = 0.01
    grid_spacing: float = 1000.0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"Unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if self.output_head not in OUTPUT_HEADS:
            raise ValueError(f"Unknown output head {self.output_head!r}; expected one of {OUTPUT_HEADS}")
        if self.coord_mode not in COORD_MODES:
            raise ValueError(f"Unknown coord mode {self.coord_mode!r}; expected one of {COORD_MODES}")
        for name in ("in_features", "hidden", "message", "mlp_hidden", "out_features"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.n_hidden_layers < 0:
            raise ValueError(f"n_hidden_layers must be >= 0, got {self.n_hidden_layers}")
        if self.grid_spacing <= 0:
            raise ValueError(f"grid_spacing must be > 0, got {self.grid_spacing}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelConfig":
        """Build from a dict, ignoring keys this version does not know."""
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})
