"""Oracle state at one timestep plus hydrostatic helpers."""

from dataclasses import dataclass, replace

import numpy as np

SEA_LEVEL = 0.0


def floating_mask(thickness: np.ndarray, bed: np.ndarray, rho_ice: float, rho_water: float) -> np.ndarray:
    """True where rho_ice * H < rho_water * (sea level - b)."""
    return rho_ice * thickness < rho_water * (SEA_LEVEL - bed)


def surface_elevation(thickness: np.ndarray, bed: np.ndarray, rho_ice: float, rho_water: float) -> np.ndarray:
    """Grounded: s = b + H. Floating: s = H (1 - rho_ice / rho_water)."""
    floating = floating_mask(thickness, bed, rho_ice, rho_water)
    return np.where(floating, thickness * (1.0 - rho_ice / rho_water), bed + thickness)


@dataclass(frozen=True, eq=False)
class SimState:
    """Per-node oracle fields at time ``time`` (years).

    Attributes:
        thickness: H in m, >= 0.
        vx, vy: velocity in m/yr.
        surface: s in m.
        bed: b in m.
        ice_mask: 1 where ice is present, 0 elsewhere (float64).
        smb: surface mass balance in m/yr ice equivalent.
        time: model time in years.
    """

    thickness: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    surface: np.ndarray
    bed: np.ndarray
    ice_mask: np.ndarray
    smb: np.ndarray
    time: float = 0.0

    @property
    def n_nodes(self) -> int:
        return len(self.thickness)

    def replace(self, **changes) -> "SimState":
        return replace(self, **changes)

    def validate(self) -> None:
        """
        Check H >= 0 and mask consistency.

        Raises:
            ValueError: naming the first offending node
        """
        n = self.n_nodes
        for name in ("vx", "vy", "surface", "bed", "ice_mask", "smb"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected ({n},)")
        for name in ("thickness", "vx", "vy", "surface", "bed", "smb"):
            values = getattr(self, name)
            if not np.all(np.isfinite(values)):
                node = int(np.flatnonzero(~np.isfinite(values))[0])
                raise ValueError(f"{name} is non-finite at node {node} (t={self.time})")
        if np.any(self.thickness < 0):
            node = int(np.flatnonzero(self.thickness < 0)[0])
            raise ValueError(f"negative thickness {self.thickness[node]} at node {node} (t={self.time})")
        bad = (self.ice_mask == 0) & (self.thickness != 0)
        if np.any(bad):
            node = int(np.flatnonzero(bad)[0])
            raise ValueError(f"ice-free node {node} carries thickness {self.thickness[node]} (t={self.time})")

    def total_volume(self, nodal_areas: np.ndarray) -> float:
        return float(np.dot(self.thickness, nodal_areas))
