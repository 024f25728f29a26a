"""Graph samples built from oracle trajectories.

One sample per saved step per scenario. Node inputs (10 columns, see
``NODE_INPUT_NAMES``) hold the scenario parameter, the time, and the t = 0
fields; targets hold (vx, vy, H, mask) at the sample's step. Everything is
normalized to [-1, 1] with the nominal bounds.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from icesim.transient import Trajectory
from mesh.edge_attributes import EDGE_ATTRIBUTE_NAMES, compute_edge_attributes
from mesh.topology import GraphTopology, build_topology
from mesh.trimesh import TriMesh
from ndnn.container import ArtifactError, read_container, write_container
from observability.logging_config import get_logger
from pipeline.normalization import (
    EXTRA_FEATURES,
    INPUT_BOUNDS_KEYS,
    NODE_INPUT_NAMES,
    NODE_TARGET_NAMES,
    Bounds,
    nominal_bounds,
)

logger = get_logger(__name__)

DATASET_KIND = "dataset"
DATASET_SCHEMA_VERSION = 1
EDGE_MODES = ("per_step", "frozen")


class DatasetError(ValueError):
    """Raised for trajectories that cannot become samples (non-finite values, mesh mismatch)."""

    def __init__(self, message: str, scenario_id: Optional[str] = None, step: Optional[int] = None):
        self.scenario_id = scenario_id
        self.step = step
        super().__init__(message)


@dataclass(frozen=True)
class DatasetOptions:
    """Sample-construction switches.

    Attributes:
        edge_mode: "per_step" builds edge attributes from steps t and t-1,
            "frozen" uses the t = 0 attributes for every sample.
        extra_feature: 10th input column, "constant" (1) or "x_coord".
    """

    edge_mode: str = "per_step"
    extra_feature: str = "constant"

    def __post_init__(self):
        if self.edge_mode not in EDGE_MODES:
            raise ValueError(f"edge_mode must be one of {EDGE_MODES}, got {self.edge_mode!r}")
        if self.extra_feature not in EXTRA_FEATURES:
            raise ValueError(f"extra_feature must be one of {EXTRA_FEATURES}, got {self.extra_feature!r}")


@dataclass(eq=False)
class GraphSample:
    """One training graph.

    Attributes:
        mesh: Mesh shared by all samples of a dataset.
        topology: Neighbor relation of ``mesh``.
        edge_attrs: (2E, 5) normalized edge attributes.
        node_inputs: (N, 10) normalized inputs.
        node_targets: (N, 4) normalized (vx, vy, H, mask).
        positions: (N, 2) normalized node coordinates.
        param_value: Scenario parameter in physical units.
        time_index: Saved-step index t.
        scenario_id: Id of the source trajectory.
        bounds: Bounds used for normalization.
    """

    mesh: TriMesh
    topology: GraphTopology
    edge_attrs: np.ndarray
    node_inputs: np.ndarray
    node_targets: np.ndarray
    positions: np.ndarray
    param_value: float
    time_index: int
    scenario_id: str
    bounds: Bounds = field(repr=False, default=None)

    @property
    def n_nodes(self) -> int:
        return len(self.node_inputs)


@dataclass(eq=False)
class Dataset:
    """Samples plus the metadata stored with them."""

    samples: List[GraphSample]
    bounds: Bounds
    mesh: TriMesh
    options: DatasetOptions = field(default_factory=DatasetOptions)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def bounds_hash(self) -> str:
        return self.bounds.digest()

    def scenario_ids(self) -> List[str]:
        return sorted({s.scenario_id for s in self.samples})


def _same_mesh(a: TriMesh, b: TriMesh) -> bool:
    return (
        a is b
        or (np.array_equal(a.nodes, b.nodes) and np.array_equal(a.triangles, b.triangles))
    )


def _check_finite(values: np.ndarray, what: str, scenario_id: str, step: int) -> None:
    if not np.all(np.isfinite(values)):
        raise DatasetError(f"non-finite {what} in scenario {scenario_id} at step {step}", scenario_id, step)


def normalized_edge_attributes(values: np.ndarray, bounds: Bounds) -> np.ndarray:
    return np.stack([bounds.normalize(name, values[:, k]) for k, name in enumerate(EDGE_ATTRIBUTE_NAMES)], axis=1)


def build_dataset(
    trajectories: Sequence[Trajectory],
    mesh: TriMesh,
    bounds: Optional[Bounds] = None,
    options: Optional[DatasetOptions] = None,
) -> Dataset:
    """
    Convert trajectories into graph samples.

    Args:
        trajectories: Oracle runs, all on ``mesh``
        mesh: Shared mesh
        bounds: Normalization bounds (nominal bounds of the first
            trajectory's config when omitted)
        options: Edge-attribute mode and 10th-feature choice

    Returns:
        Dataset with one sample per saved step per scenario, ordered by
        scenario id then step

    Raises:
        DatasetError: On a mesh mismatch or non-finite field values
    """
    options = options or DatasetOptions()
    if not trajectories:
        raise DatasetError("no trajectories to build a dataset from")
    if bounds is None:
        bounds = nominal_bounds(trajectories[0].config, extra_feature=options.extra_feature)
    topology = build_topology(mesh)
    positions = np.stack(
        [bounds.normalize("x", mesh.nodes[:, 0]), bounds.normalize("y", mesh.nodes[:, 1])], axis=1
    )

    samples: List[GraphSample] = []
    for traj in sorted(trajectories, key=lambda t: t.scenario_id):
        if not _same_mesh(traj.mesh, mesh):
            raise DatasetError(f"trajectory {traj.scenario_id} was run on a different mesh", traj.scenario_id)
        first = traj.states[0]
        for name in ("thickness", "vx", "vy", "surface", "bed", "smb"):
            _check_finite(getattr(first, name), name, traj.scenario_id, 0)
        extra = mesh.nodes[:, 0] if options.extra_feature == "x_coord" else np.ones(mesh.n_nodes)
        static_columns = {
            "smb": first.smb, "vx0": first.vx, "vy0": first.vy, "surface0": first.surface,
            "bed": first.bed, "thickness0": first.thickness, "mask0": first.ice_mask, "extra": extra,
        }
        static = {
            name: bounds.normalize(key, static_columns[name])
            for name, key in zip(NODE_INPUT_NAMES, INPUT_BOUNDS_KEYS)
            if name in static_columns
        }
        param_z = float(bounds.normalize("param", np.array([traj.params.value]))[0])
        dt = traj.config.dt
        frozen_attrs = None
        if options.edge_mode == "frozen":
            frozen_attrs = normalized_edge_attributes(
                compute_edge_attributes(mesh, first, first, dt, topology).values, bounds
            )

        for t, state in enumerate(traj.states):
            for name in NODE_TARGET_NAMES:
                _check_finite(getattr(state, "ice_mask" if name == "mask" else name), name, traj.scenario_id, t)
            time_z = float(bounds.normalize("time", np.array([state.time]))[0])
            columns = []
            for name in NODE_INPUT_NAMES:
                if name == "param":
                    columns.append(np.full(mesh.n_nodes, param_z))
                elif name == "time":
                    columns.append(np.full(mesh.n_nodes, time_z))
                else:
                    columns.append(static[name])
            inputs = np.stack(columns, axis=1)
            targets = np.stack([
                bounds.normalize("vx", state.vx),
                bounds.normalize("vy", state.vy),
                bounds.normalize("thickness", state.thickness),
                bounds.normalize("mask", state.ice_mask),
            ], axis=1)
            if frozen_attrs is not None:
                edge_attrs = frozen_attrs
            else:
                prev = traj.states[t - 1] if t > 0 else state
                raw = compute_edge_attributes(mesh, state, prev, dt, topology).values
                _check_finite(raw, "edge attributes", traj.scenario_id, t)
                edge_attrs = normalized_edge_attributes(raw, bounds)
            samples.append(GraphSample(
                mesh=mesh,
                topology=topology,
                edge_attrs=edge_attrs,
                node_inputs=inputs,
                node_targets=targets,
                positions=positions,
                param_value=float(traj.params.value),
                time_index=t,
                scenario_id=traj.scenario_id,
                bounds=bounds,
            ))

    logger.info(f"Built dataset: {len(samples)} samples from {len(trajectories)} scenarios ({options.edge_mode} edges)")
    metadata = {
        "scenarios": [{"id": t.scenario_id, "kind": t.params.kind, "value": t.params.value}
                      for t in sorted(trajectories, key=lambda t: t.scenario_id)],
        "sim_config": trajectories[0].config.to_dict(),
    }
    return Dataset(samples=samples, bounds=bounds, mesh=mesh, options=options, metadata=metadata)


def save_dataset(path: Union[str, Path], dataset: Dataset) -> Path:
    """Write the dataset container (header: schema, bounds, scenarios; body: per-sample arrays)."""
    samples = dataset.samples
    scenario_ids = dataset.scenario_ids()
    header = {
        "schema_version": DATASET_SCHEMA_VERSION,
        "bounds": dataset.bounds.to_dict(),
        "bounds_hash": dataset.bounds_hash,
        "options": {"edge_mode": dataset.options.edge_mode, "extra_feature": dataset.options.extra_feature},
        "input_names": list(NODE_INPUT_NAMES),
        "target_names": list(NODE_TARGET_NAMES),
        "edge_attribute_names": list(EDGE_ATTRIBUTE_NAMES),
        "scenario_ids": scenario_ids,
        "n_samples": len(samples),
        **dataset.metadata,
    }
    n_directed = samples[0].edge_attrs.shape[0] if samples else 0
    arrays = {
        "mesh_nodes": dataset.mesh.nodes,
        "mesh_triangles": dataset.mesh.triangles,
        "mesh_boundary": dataset.mesh.boundary_flags,
        "node_inputs": np.stack([s.node_inputs for s in samples]) if samples else np.zeros((0, 0, 0)),
        "node_targets": np.stack([s.node_targets for s in samples]) if samples else np.zeros((0, 0, 0)),
        "edge_attrs": (
            np.stack([s.edge_attrs for s in samples]) if samples else np.zeros((0, n_directed, len(EDGE_ATTRIBUTE_NAMES)))
        ),
        "param_values": np.array([s.param_value for s in samples], dtype=np.float64),
        "time_index": np.array([s.time_index for s in samples], dtype=np.int64),
        "scenario_index": np.array([scenario_ids.index(s.scenario_id) for s in samples], dtype=np.int64),
    }
    return write_container(path, DATASET_KIND, header, arrays)


def load_dataset(path: Union[str, Path]) -> Dataset:
    """
    Read a dataset container.

    Raises:
        ArtifactError: If the file is missing, of another kind, or its bounds
            do not match the stored hash
    """
    header, arrays = read_container(path, expected_kind=DATASET_KIND)
    if header.get("schema_version") != DATASET_SCHEMA_VERSION:
        raise ArtifactError(f"{path}: unsupported dataset schema {header.get('schema_version')}")
    bounds = Bounds.from_dict(header["bounds"])
    if bounds.digest() != header.get("bounds_hash"):
        raise ArtifactError(f"{path}: stored bounds do not match their hash")
    mesh = TriMesh.from_arrays(arrays["mesh_nodes"], arrays["mesh_triangles"], arrays["mesh_boundary"], orient=False)
    topology = build_topology(mesh)
    positions = np.stack(
        [bounds.normalize("x", mesh.nodes[:, 0]), bounds.normalize("y", mesh.nodes[:, 1])], axis=1
    )
    options = DatasetOptions(**header["options"])
    scenario_ids = header["scenario_ids"]
    frozen = options.edge_mode == "frozen"

    samples = []
    shared: Dict[str, np.ndarray] = {}
    for k in range(header["n_samples"]):
        scenario_id = scenario_ids[int(arrays["scenario_index"][k])]
        edge_attrs = arrays["edge_attrs"][k]
        if frozen:
            edge_attrs = shared.setdefault(scenario_id, edge_attrs)
        samples.append(GraphSample(
            mesh=mesh,
            topology=topology,
            edge_attrs=edge_attrs,
            node_inputs=arrays["node_inputs"][k],
            node_targets=arrays["node_targets"][k],
            positions=positions,
            param_value=float(arrays["param_values"][k]),
            time_index=int(arrays["time_index"][k]),
            scenario_id=scenario_id,
            bounds=bounds,
        ))
    metadata = {key: header[key] for key in ("scenarios", "sim_config") if key in header}
    return Dataset(samples=samples, bounds=bounds, mesh=mesh, options=options, metadata=metadata)
