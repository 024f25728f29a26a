"""Mass-removal processes: von Mises calving and basal melt of floating ice."""

from typing import Optional

import numpy as np

from icesim.config import SimConfig
from icesim.state import SimState, floating_mask, surface_elevation
from mesh.topology import GraphTopology
from mesh.trimesh import BOUNDARY_FRONT

_DEFAULT_CONSTANTS = SimConfig()


def ice_front_nodes(
    state: SimState, topology: GraphTopology, boundary_flags: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    Ice-covered nodes touching open water.

    A node is on the front when it carries ice and has an ice-free neighbor,
    or sits on the mesh's front boundary.
    """
    ice = state.ice_mask > 0
    ice_free = (~ice).astype(np.float64)
    free_neighbors = topology.sum_at_receivers(ice_free[topology.senders])
    front = ice & (free_neighbors > 0)
    if boundary_flags is not None:
        front |= ice & (boundary_flags == BOUNDARY_FRONT)
    return front


def apply_calving(
    state: SimState,
    stress: np.ndarray,
    sigma_max: float,
    topology: GraphTopology,
    boundary_flags: Optional[np.ndarray] = None,
    config: Optional[SimConfig] = None,
) -> SimState:
    """
    Remove front ice whose von Mises stress exceeds ``sigma_max``.

    Only nodes on the current ice front are eligible, once per call; interior
    nodes are untouched.

    Args:
        state: State before calving
        stress: Per-node sigma~ in Pa
        sigma_max: Calving threshold in Pa (``inf`` disables calving)
        topology: Mesh neighbor relation
        boundary_flags: Mesh boundary markers (front boundary counts as front)
        config: Densities for the surface update (defaults used when omitted)

    Returns:
        New state with calved nodes set to H = 0, mask = 0
    """
    config = config or _DEFAULT_CONSTANTS
    calve = ice_front_nodes(state, topology, boundary_flags) & (stress > sigma_max)
    if not np.any(calve):
        return state
    thickness = np.where(calve, 0.0, state.thickness)
    mask = np.where(calve, 0.0, state.ice_mask)
    surface = surface_elevation(thickness, state.bed, config.rho_ice, config.rho_water)
    return state.replace(thickness=thickness, ice_mask=mask, surface=surface)


def apply_basal_melt(
    state: SimState, melt_rate: float, dt: float, config: Optional[SimConfig] = None
) -> SimState:
    """
    Thin floating ice by ``melt_rate * dt``.

    H <- max(0, H - melt_rate * dt) on floating ice-covered nodes; nodes that
    reach zero thickness lose their ice mask.

    Raises:
        ValueError: On a negative melt rate or non-positive dt
    """
    if melt_rate < 0:
        raise ValueError(f"melt_rate must be >= 0, got {melt_rate}")
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if melt_rate == 0:
        return state
    config = config or _DEFAULT_CONSTANTS
    floating = floating_mask(state.thickness, state.bed, config.rho_ice, config.rho_water) & (state.ice_mask > 0)
    thickness = np.where(floating, np.maximum(0.0, state.thickness - melt_rate * dt), state.thickness)
    mask = np.where(floating & (thickness <= 0.0), 0.0, state.ice_mask)
    surface = surface_elevation(thickness, state.bed, config.rho_ice, config.rho_water)
    return state.replace(thickness=thickness, ice_mask=mask, surface=surface)
