"""Oracle configuration.

``SimConfig`` groups the domain, meshing, time-stepping and physical
constants of the desk-scale ice-flow oracle; ``ScenarioParams`` carries the
swept scenario parameter (calving threshold or basal melt rate).
"""

import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict

SCENARIO_KINDS = ("calving", "melt")
SIGMA_MAX_RANGE = (0.5e6, 1.5e6)  # Pa
MELT_RATE_RANGE = (0.0, 100.0)  # m/yr


@dataclass(frozen=True)
class SimConfig:
    """Domain, mesh, time-stepping and physics constants of the oracle.

    Lengths are in meters, times in years, velocities in m/yr. The ice flows
    toward +x; the ocean/outlet boundary is x = length_x.
    """

    scenario: str = "calving"

    # domain and mesh
    length_x: float = 30000.0
    length_y: float = 12000.0
    fine_edge: float = 800.0
    coarse_edge: float = 2500.0
    fine_zone: float = 8000.0
    transition_zone: float = 8000.0
    mesh_jitter: float = 0.02
    seed: int = 0

    # time stepping: n_steps saved steps of length dt
    dt: float = 0.05
    n_steps: int = 260
    cfl_target: float = 0.25
    diffusion_safety: float = 0.2
    max_substeps: int = 5000

    # physical constants
    rho_ice: float = 917.0
    rho_water: float = 1023.0
    gravity: float = 9.81
    c_slide: float = 0.002  # m/yr per Pa**m_s
    m_slide: float = 1.0
    rate_factor: float = 2.1e8  # B, Pa s^(1/n)
    glen_n: float = 3.0

    # surface mass balance, linear in x (m/yr ice equivalent)
    smb_inland: float = 0.5
    smb_front: float = -1.0

    # synthetic geometry
    bed_inland: float = 300.0
    bed_front: float = -700.0
    trough_depth: float = 300.0
    trough_width: float = 0.15  # fraction of length_y
    bed_roughness: float = 20.0
    thickness_inland: float = 1200.0
    thickness_front: float = 600.0
    front_position: float = 0.8  # fraction of length_x

    closed_boundary: bool = False

    def __post_init__(self):
        if self.scenario not in SCENARIO_KINDS:
            raise ValueError(f"scenario must be one of {SCENARIO_KINDS}, got {self.scenario!r}")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.n_steps < 0:
            raise ValueError(f"n_steps must be >= 0, got {self.n_steps}")
        if not self.glen_n >= 1:
            raise ValueError(f"glen_n must be >= 1, got {self.glen_n}")
        if not (self.coarse_edge >= self.fine_edge > 0):
            raise ValueError(
                f"need coarse_edge >= fine_edge > 0, got coarse={self.coarse_edge}, fine={self.fine_edge}"
            )
        if not (self.length_x > 0 and self.length_y > 0):
            raise ValueError("domain lengths must be positive")
        if not 0 < self.front_position <= 1:
            raise ValueError(f"front_position must be in (0, 1], got {self.front_position}")

    @property
    def t_end(self) -> float:
        return self.n_steps * self.dt

    @classmethod
    def helheim_like(cls, **overrides) -> "SimConfig":
        """Calving outlet glacier: 13 years saved every 0.05 yr (261 states)."""
        base = cls(scenario="calving", dt=0.05, n_steps=260)
        return replace(base, **overrides)

    @classmethod
    def pig_like(cls, **overrides) -> "SimConfig":
        """Ice stream feeding a floating shelf: 240 monthly states."""
        base = cls(
            scenario="melt",
            dt=1.0 / 12.0,
            n_steps=239,
            bed_inland=-200.0,
            bed_front=-1000.0,
            thickness_inland=1500.0,
            thickness_front=300.0,
            front_position=0.85,
            trough_depth=200.0,
            smb_inland=0.3,
            smb_front=0.1,
        )
        return replace(base, **overrides)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown SimConfig fields: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class ScenarioParams:
    """Swept scenario parameter.

    Attributes:
        kind: "calving" (value = sigma_max in Pa) or "melt" (value = basal
            melt rate in m/yr).
        value: The parameter value.
    """

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"scenario kind must be one of {SCENARIO_KINDS}, got {self.kind!r}")
        lo, hi = SIGMA_MAX_RANGE if self.kind == "calving" else MELT_RATE_RANGE
        if not (math.isfinite(self.value) and lo <= self.value <= hi):
            unit = "Pa" if self.kind == "calving" else "m/yr"
            raise ValueError(f"{self.kind} parameter {self.value} {unit} outside [{lo}, {hi}]")

    @property
    def sigma_max(self) -> float:
        if self.kind != "calving":
            raise AttributeError("sigma_max is only defined for calving scenarios")
        return self.value

    @property
    def melt_rate(self) -> float:
        if self.kind != "melt":
            raise AttributeError("melt_rate is only defined for melt scenarios")
        return self.value

    @property
    def scenario_id(self) -> str:
        """Sortable id, e.g. ``calving-0.7500MPa`` or ``melt-020.00``."""
        if self.kind == "calving":
            return f"calving-{self.value / 1e6:.4f}MPa"
        return f"melt-{self.value:06.2f}"
