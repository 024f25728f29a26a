"""Transient oracle runs: initial state, time stepping and trajectory files."""

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from icesim.config import ScenarioParams, SimConfig
from icesim.meshgen import generate_mesh
from icesim.physics import compute_velocity, von_mises_stress
from icesim.processes import apply_basal_melt, apply_calving
from icesim.state import SimState, surface_elevation
from icesim.transport import (
    DualGeometry,
    MassBudget,
    advance_thickness_with_budget,
    build_dual_geometry,
)
from mesh.topology import build_topology
from mesh.trimesh import TriMesh
from ndnn.container import read_container, write_container
from observability.logging_config import get_logger

logger = get_logger(__name__)

TRAJECTORY_KIND = "trajectory"
_N_ROUGHNESS_MODES = 6


class SubstepLimitError(ArithmeticError):
    """Raised when one saved step would need more than ``max_substeps`` sub-steps."""

    def __init__(self, step: int, needed: int, limit: int):
        self.step = step
        self.needed = needed
        super().__init__(f"step {step} needs {needed} sub-steps (limit {limit}); reduce dt or c_slide")


def synthetic_bed(mesh: TriMesh, config: SimConfig, seed: int) -> np.ndarray:
    """Sloping fjord bed with a central trough and seeded smooth roughness."""
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    lx, ly = config.length_x, config.length_y
    slope = config.bed_inland + (config.bed_front - config.bed_inland) * (x / lx)
    width = config.trough_width * ly
    trough = config.trough_depth * np.exp(-(((y - 0.5 * ly) / width) ** 2))

    rng = np.random.default_rng(seed)
    kx = rng.integers(1, 4, size=_N_ROUGHNESS_MODES)
    ky = rng.integers(1, 4, size=_N_ROUGHNESS_MODES)
    phase = rng.uniform(0.0, 2.0 * math.pi, size=(_N_ROUGHNESS_MODES, 2))
    amp = rng.normal(0.0, 1.0, size=_N_ROUGHNESS_MODES)
    rough = np.zeros(mesh.n_nodes)
    for k in range(_N_ROUGHNESS_MODES):
        rough += amp[k] * np.sin(2 * math.pi * kx[k] * x / lx + phase[k, 0]) * np.sin(
            2 * math.pi * ky[k] * y / ly + phase[k, 1]
        )
    rough *= config.bed_roughness / math.sqrt(_N_ROUGHNESS_MODES)
    return slope - trough + rough


def initial_state(mesh: TriMesh, config: SimConfig, seed: Optional[int] = None) -> SimState:
    """
    Synthetic t = 0 state.

    Thickness falls off parabolically from ``thickness_inland`` to
    ``thickness_front`` at the initial front ``front_position * length_x``
    (thicker over the trough) and is zero beyond it. The surface follows
    flotation and the velocity is the sliding law on that geometry.
    """
    seed = config.seed if seed is None else seed
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    bed = synthetic_bed(mesh, config, seed)

    x_front = config.front_position * config.length_x
    width = config.trough_width * config.length_y
    trough = np.exp(-(((y - 0.5 * config.length_y) / width) ** 2))
    profile = config.thickness_front + (config.thickness_inland - config.thickness_front) * (
        1.0 - (x / x_front) ** 2
    )
    thickness = np.where(x <= x_front + 1e-9, profile + 0.5 * config.trough_depth * trough, 0.0)
    thickness = np.maximum(thickness, 0.0)

    smb = config.smb_inland + (config.smb_front - config.smb_inland) * (x / config.length_x)
    mask = (thickness > 0).astype(np.float64)
    surface = surface_elevation(thickness, bed, config.rho_ice, config.rho_water)
    state = SimState(
        thickness=thickness,
        vx=np.zeros(mesh.n_nodes),
        vy=np.zeros(mesh.n_nodes),
        surface=surface,
        bed=bed,
        ice_mask=mask,
        smb=smb,
        time=0.0,
    )
    vx, vy = compute_velocity(state, mesh, config)
    return state.replace(vx=vx, vy=vy)


@dataclass
class Trajectory:
    """One scenario run: saved states plus the per-step mass budgets."""

    mesh: TriMesh
    config: SimConfig
    params: ScenarioParams
    seed: int
    states: List[SimState] = field(default_factory=list)
    budgets: List[MassBudget] = field(default_factory=list)

    @property
    def scenario_id(self) -> str:
        return self.params.scenario_id

    @property
    def n_states(self) -> int:
        return len(self.states)

    def volumes(self) -> np.ndarray:
        areas = self.mesh.nodal_areas()
        return np.array([s.total_volume(areas) for s in self.states])


def _substep_count(state: SimState, mesh: TriMesh, config: SimConfig, dual: DualGeometry, dt: float) -> int:
    """Sub-steps needed for the advective and the (sliding-law) diffusive limit."""
    speed = np.hypot(state.vx, state.vy)
    max_speed = float(speed.max()) if len(speed) else 0.0
    n_adv = math.ceil(dt * max_speed / (config.cfl_target * dual.min_edge)) if max_speed > 0 else 1

    grad = mesh.nodal_gradient(state.surface)
    slope = np.hypot(grad[:, 0], grad[:, 1])
    active = slope > 0
    if np.any(active):
        diffusivity = float(np.max(speed[active] * state.thickness[active] / slope[active]))
    else:
        diffusivity = 0.0
    n_diff = 1
    if diffusivity > 0:
        n_diff = math.ceil(dt * diffusivity / (config.diffusion_safety * dual.min_edge ** 2))
    return max(1, n_adv, n_diff)


def _removed_volume(before: SimState, after: SimState, areas: np.ndarray) -> float:
    return float(np.dot(before.thickness - after.thickness, areas))


def simulate(
    config: SimConfig,
    params: ScenarioParams,
    seed: Optional[int] = None,
    mesh: Optional[TriMesh] = None,
) -> Trajectory:
    """
    Run one scenario and keep its mass budgets.

    Each saved step applies calving (von Mises stress against sigma_max) or
    basal melt once, then advances thickness through as many explicit
    sub-steps as the CFL and diffusive limits require, recomputing velocity
    before every sub-step. The saved state carries the velocity of its own
    geometry.

    Args:
        config: Oracle configuration
        params: Scenario parameter (kind must match ``config.scenario``)
        seed: Seed of the synthetic bed (defaults to ``config.seed``)
        mesh: Mesh to run on. When omitted it is generated from ``config``,
            so its jitter follows ``config.seed`` and not ``seed``; every
            scenario of a sweep then shares one mesh.

    Returns:
        Trajectory with ``n_steps + 1`` states and ``n_steps`` budgets

    Raises:
        ValueError: If the scenario kinds disagree
        SubstepLimitError: If a step needs more than ``max_substeps`` sub-steps
    """
    if params.kind != config.scenario:
        raise ValueError(f"scenario parameter is {params.kind!r} but config scenario is {config.scenario!r}")
    seed = config.seed if seed is None else seed
    mesh = mesh if mesh is not None else generate_mesh(config)
    topology = build_topology(mesh)
    dual = build_dual_geometry(mesh)
    areas = dual.areas

    state = initial_state(mesh, config, seed)
    trajectory = Trajectory(mesh=mesh, config=config, params=params, seed=seed, states=[state])
    logger.info(
        f"Running {params.scenario_id}: {config.n_steps} steps of {config.dt:.5g} yr on {mesh.n_nodes} nodes"
    )

    for step in range(config.n_steps):
        volume_before = state.total_volume(areas)
        if params.kind == "calving":
            stress = von_mises_stress(state, mesh, config)
            processed = apply_calving(state, stress, params.sigma_max, topology, mesh.boundary_flags, config)
            budget = MassBudget(volume_before=volume_before, calved=_removed_volume(state, processed, areas))
        else:
            processed = apply_basal_melt(state, params.melt_rate, config.dt, config)
            budget = MassBudget(volume_before=volume_before, melt=_removed_volume(state, processed, areas))
        state = processed
        budget = replace(budget, volume_after=state.total_volume(areas))

        vx, vy = compute_velocity(state, mesh, config)
        state = state.replace(vx=vx, vy=vy)
        n_sub = _substep_count(state, mesh, config, dual, config.dt)
        if n_sub > config.max_substeps:
            raise SubstepLimitError(step, n_sub, config.max_substeps)
        sub_dt = config.dt / n_sub
        for k in range(n_sub):
            if k > 0:
                vx, vy = compute_velocity(state, mesh, config)
                state = state.replace(vx=vx, vy=vy)
            state, sub_budget = advance_thickness_with_budget(state, mesh, config, dt=sub_dt, dual=dual)
            budget = budget.combine(sub_budget)

        vx, vy = compute_velocity(state, mesh, config)
        state = state.replace(vx=vx, vy=vy, time=(step + 1) * config.dt)
        trajectory.states.append(state)
        trajectory.budgets.append(budget)
        logger.debug(
            f"{params.scenario_id} step {step + 1}: {n_sub} sub-steps, volume {budget.volume_after:.6e} m^3"
        )

    logger.info(f"Finished {params.scenario_id}: {trajectory.n_states} states")
    return trajectory


def run_transient(
    config: SimConfig,
    params: ScenarioParams,
    seed: Optional[int] = None,
    mesh: Optional[TriMesh] = None,
) -> List[SimState]:
    """Saved states of one scenario, t = 0 included (``n_steps + 1`` entries)."""
    return simulate(config, params, seed=seed, mesh=mesh).states


_STATE_FIELDS = ("thickness", "vx", "vy", "surface", "ice_mask")
_BUDGET_FIELDS = ("volume_before", "volume_after", "smb", "clamp", "melt", "calved", "outflow")


def save_trajectory(path: Union[str, Path], trajectory: Trajectory) -> Path:
    """Write a trajectory (mesh, params, per-step fields, budgets) to one container file."""
    metadata: Dict[str, Any] = {
        "scenario_id": trajectory.scenario_id,
        "params": {"kind": trajectory.params.kind, "value": trajectory.params.value},
        "config": trajectory.config.to_dict(),
        "seed": trajectory.seed,
        "n_states": trajectory.n_states,
    }
    states = trajectory.states
    arrays = {
        "mesh_nodes": trajectory.mesh.nodes,
        "mesh_triangles": trajectory.mesh.triangles,
        "mesh_boundary": trajectory.mesh.boundary_flags,
        "time": np.array([s.time for s in states]),
        "bed": states[0].bed,
        "smb": states[0].smb,
    }
    for name in _STATE_FIELDS:
        arrays[name] = np.stack([getattr(s, name) for s in states])
    arrays["budgets"] = np.array(
        [[getattr(b, f) for f in _BUDGET_FIELDS] for b in trajectory.budgets], dtype=np.float64
    ).reshape(len(trajectory.budgets), len(_BUDGET_FIELDS))
    return write_container(path, TRAJECTORY_KIND, metadata, arrays)


def load_trajectory(path: Union[str, Path]) -> Trajectory:
    """Inverse of ``save_trajectory``."""
    metadata, arrays = read_container(path, expected_kind=TRAJECTORY_KIND)
    mesh = TriMesh.from_arrays(arrays["mesh_nodes"], arrays["mesh_triangles"], arrays["mesh_boundary"], orient=False)
    config = SimConfig.from_dict(metadata["config"])
    params = ScenarioParams(**metadata["params"])
    states = [
        SimState(
            thickness=arrays["thickness"][k],
            vx=arrays["vx"][k],
            vy=arrays["vy"][k],
            surface=arrays["surface"][k],
            bed=arrays["bed"],
            ice_mask=arrays["ice_mask"][k],
            smb=arrays["smb"],
            time=float(arrays["time"][k]),
        )
        for k in range(metadata["n_states"])
    ]
    budgets = [MassBudget(**dict(zip(_BUDGET_FIELDS, map(float, row)))) for row in arrays["budgets"]]
    return Trajectory(mesh=mesh, config=config, params=params, seed=metadata["seed"], states=states, budgets=budgets)
