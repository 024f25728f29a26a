"""Tests for normalization bounds and graph-sample datasets."""

from dataclasses import replace

import numpy as np
import pytest

from builders import CALVING_VALUES, delaunay_mesh
from icesim.config import SimConfig
from pipeline.dataset import (
    DatasetError,
    DatasetOptions,
    build_dataset,
    load_dataset,
    save_dataset,
)
from pipeline.normalization import Bounds, BoundsMismatchError, nominal_bounds


# --------------------------------------------------------------------------- #
# Bounds                                                                       #
# --------------------------------------------------------------------------- #


def test_normalize_round_trip():
    bounds = Bounds({"v": (-10.0, 30.0)})
    values = np.array([-10.0, 10.0, 30.0, 0.0])
    z = bounds.normalize("v", values)
    np.testing.assert_allclose(z, [-1.0, 0.0, 1.0, -0.5])
    np.testing.assert_allclose(bounds.denormalize("v", z), values)


def test_out_of_range_values_are_clipped():
    bounds = Bounds({"v": (0.0, 1.0)})
    np.testing.assert_array_equal(bounds.normalize("v", np.array([-1.0, 2.0])), [-1.0, 1.0])
    np.testing.assert_array_equal(bounds.normalize("v", np.array([2.0]), clip=False), [3.0])


def test_bounds_validation_and_lookup():
    with pytest.raises(ValueError):
        Bounds({"v": (1.0, 1.0)})
    with pytest.raises(KeyError):
        Bounds({"v": (0.0, 1.0)}).range_of("w")


def test_digest_tracks_values():
    a = Bounds({"v": (0.0, 1.0), "w": (-1.0, 1.0)})
    b = Bounds({"w": (-1.0, 1.0), "v": (0.0, 1.0)})
    c = Bounds({"v": (0.0, 2.0), "w": (-1.0, 1.0)})
    assert a.digest() == b.digest() != c.digest()
    a.check_digest(b.digest())
    with pytest.raises(BoundsMismatchError):
        a.check_digest(c.digest())
    assert Bounds.from_dict(a.to_dict()).digest() == a.digest()


def test_nominal_bounds():
    config = SimConfig.helheim_like()
    bounds = nominal_bounds(config)
    assert bounds.range_of("param") == (0.5e6, 1.5e6)
    assert bounds.range_of("time") == (0.0, pytest.approx(13.0))
    assert bounds.normalize("accel_x", np.array([0.0]))[0] == 0.0
    assert nominal_bounds(config, extra_feature="x_coord").range_of("extra") == (0.0, config.length_x)
    assert nominal_bounds(SimConfig.pig_like()).range_of("param") == (0.0, 100.0)
    with pytest.raises(ValueError):
        nominal_bounds(config, extra_feature="y_coord")


# --------------------------------------------------------------------------- #
# Dataset construction                                                         #
# --------------------------------------------------------------------------- #


def test_dataset_layout(calving_dataset, calving_mesh, calving_config):
    n_states = calving_config.n_steps + 1
    assert len(calving_dataset) == len(CALVING_VALUES) * n_states
    assert calving_dataset.scenario_ids() == ["calving-0.7500MPa", "calving-1.0000MPa"]
    assert [s.time_index for s in calving_dataset.samples] == list(range(n_states)) * 2
    sample = calving_dataset.samples[0]
    n = calving_mesh.n_nodes
    assert sample.node_inputs.shape == (n, 10)
    assert sample.node_targets.shape == (n, 4)
    assert sample.edge_attrs.shape == (sample.topology.n_directed, 5)
    assert sample.positions.shape == (n, 2)
    for s in calving_dataset.samples:
        assert np.abs(s.node_inputs).max() <= 1.0
        assert np.abs(s.node_targets).max() <= 1.0


def test_input_columns(calving_dataset):
    first, second = calving_dataset.samples[0], calving_dataset.samples[-1]
    np.testing.assert_allclose(first.node_inputs[:, 0], -0.5)
    np.testing.assert_allclose(second.node_inputs[:, 0], 0.0, atol=1e-15)
    np.testing.assert_allclose(first.node_inputs[:, 1], -1.0)
    np.testing.assert_array_equal(first.node_inputs[:, 9], 1.0)
    # t = 0 targets repeat the t = 0 input fields
    np.testing.assert_array_equal(first.node_targets[:, 0], first.node_inputs[:, 3])
    np.testing.assert_array_equal(first.node_targets[:, 2], first.node_inputs[:, 7])
    np.testing.assert_array_equal(first.node_targets[:, 3], first.node_inputs[:, 8])


def test_first_step_edges_have_no_acceleration(calving_dataset):
    attrs = calving_dataset.samples[0].edge_attrs
    assert not np.any(attrs[:, 3:])


def test_frozen_edges_repeat_first_step(calving_trajectories, calving_mesh, calving_dataset):
    frozen = build_dataset(calving_trajectories, calving_mesh, bounds=calving_dataset.bounds,
                           options=DatasetOptions(edge_mode="frozen"))
    for s in frozen.samples[:3]:
        np.testing.assert_array_equal(s.edge_attrs, calving_dataset.samples[0].edge_attrs)


def test_x_coord_feature(calving_trajectories, calving_mesh):
    dataset = build_dataset(calving_trajectories, calving_mesh, options=DatasetOptions(extra_feature="x_coord"))
    sample = dataset.samples[0]
    np.testing.assert_allclose(sample.node_inputs[:, 9], sample.positions[:, 0])


def test_mesh_mismatch(calving_trajectories):
    with pytest.raises(DatasetError, match="different mesh") as exc:
        build_dataset(calving_trajectories, delaunay_mesh(20))
    assert exc.value.scenario_id == calving_trajectories[0].scenario_id


def test_non_finite_state(calving_trajectories, calving_mesh):
    traj = calving_trajectories[0]
    bad_state = traj.states[1].replace(vx=np.full(calving_mesh.n_nodes, np.nan))
    broken = replace(traj, states=[traj.states[0], bad_state] + traj.states[2:])
    with pytest.raises(DatasetError) as exc:
        build_dataset([broken], calving_mesh)
    assert (exc.value.scenario_id, exc.value.step) == (traj.scenario_id, 1)


def test_no_trajectories(calving_mesh):
    with pytest.raises(DatasetError):
        build_dataset([], calving_mesh)


def test_dataset_file_round_trip(tmp_path, calving_dataset):
    path = save_dataset(tmp_path / "dataset.bin", calving_dataset)
    loaded = load_dataset(path)
    assert loaded.bounds_hash == calving_dataset.bounds_hash
    assert len(loaded) == len(calving_dataset)
    for a, b in zip(loaded.samples, calving_dataset.samples):
        np.testing.assert_array_equal(a.node_inputs, b.node_inputs)
        np.testing.assert_array_equal(a.node_targets, b.node_targets)
        np.testing.assert_array_equal(a.edge_attrs, b.edge_attrs)
        assert (a.param_value, a.time_index, a.scenario_id) == (b.param_value, b.time_index, b.scenario_id)
    assert save_dataset(tmp_path / "again.bin", loaded).read_bytes() == path.read_bytes()
