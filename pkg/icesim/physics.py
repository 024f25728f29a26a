"""Sliding-law velocity and von Mises tensile stress.

Velocity stands in for a stress-balance solve:

    v = -C_slide * (rho g H |grad s|)^m_s * grad s / |grad s|

on ice-covered nodes, with grad s the area-weighted average of the P1
triangle gradients around each node.

The calving stress follows the von Mises law

    sigma = sqrt(3) * B * eps_e^(1/n)

with eps_e the effective tensile strain rate built from the positive
principal strain rates. Strain rates enter in 1/s (B is in Pa s^(1/n)).
"""

from typing import Tuple

import numpy as np

from icesim.config import SimConfig
from icesim.state import SimState
from mesh.trimesh import TriMesh

SECONDS_PER_YEAR = 365.2422 * 24 * 3600


def compute_velocity(state: SimState, mesh: TriMesh, config: SimConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    Evaluate the sliding law at every node.

    Args:
        state: Current oracle state (uses thickness, surface and ice_mask)
        mesh: Mesh the state lives on
        config: Physical constants (rho_ice, gravity, c_slide, m_slide)

    Returns:
        (vx, vy) in m/yr; zero on ice-free nodes and where grad s = 0
    """
    grad = mesh.nodal_gradient(state.surface)
    slope = np.hypot(grad[:, 0], grad[:, 1])
    driving = config.rho_ice * config.gravity * state.thickness * slope
    active = (state.ice_mask > 0) & (slope > 0)

    vx = np.zeros(mesh.n_nodes)
    vy = np.zeros(mesh.n_nodes)
    speed = config.c_slide * np.power(driving[active], config.m_slide)
    vx[active] = -speed * grad[active, 0] / slope[active]
    vy[active] = -speed * grad[active, 1] / slope[active]
    return vx, vy


def strain_rates(vx: np.ndarray, vy: np.ndarray, mesh: TriMesh) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodal strain-rate components (exx, eyy, exy) in 1/yr."""
    gvx = mesh.nodal_gradient(vx)
    gvy = mesh.nodal_gradient(vy)
    exx = gvx[:, 0]
    eyy = gvy[:, 1]
    exy = 0.5 * (gvx[:, 1] + gvy[:, 0])
    return exx, eyy, exy


def effective_tensile_strain_rate(exx: np.ndarray, eyy: np.ndarray, exy: np.ndarray) -> np.ndarray:
    """sqrt((max(0, e1)^2 + max(0, e2)^2) / 2) from the principal strain rates e1 >= e2."""
    mean = 0.5 * (exx + eyy)
    radius = np.sqrt((0.5 * (exx - eyy)) ** 2 + exy ** 2)
    e1 = np.maximum(mean + radius, 0.0)
    e2 = np.maximum(mean - radius, 0.0)
    return np.sqrt(0.5 * (e1 ** 2 + e2 ** 2))


def von_mises_stress(state: SimState, mesh: TriMesh, config: SimConfig) -> np.ndarray:
    """
    Tensile von Mises stress sigma~ (Pa) at every node.

    Returns:
        Non-negative array; zero wherever the velocity field is uniform
    """
    exx, eyy, exy = strain_rates(state.vx, state.vy, mesh)
    eps_e = effective_tensile_strain_rate(exx, eyy, exy) / SECONDS_PER_YEAR
    return np.sqrt(3.0) * config.rate_factor * np.power(eps_e, 1.0 / config.glen_n)
