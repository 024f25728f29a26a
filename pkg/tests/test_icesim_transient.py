"""Tests for oracle configs, mesh generation and transient runs."""

import numpy as np
import pytest

from builders import CALVING_VALUES, TINY_DOMAIN, tiny_sim_config
from icesim.config import ScenarioParams, SimConfig
from icesim.meshgen import MeshGenerationError, generate_mesh, target_edge_length
from icesim.transient import load_trajectory, run_transient, save_trajectory, simulate
from mesh.trimesh import BOUNDARY_FRONT, BOUNDARY_LATERAL


# --------------------------------------------------------------------------- #
# Configuration                                                                #
# --------------------------------------------------------------------------- #


def test_presets_match_saved_state_counts():
    helheim = SimConfig.helheim_like()
    pig = SimConfig.pig_like()
    assert (helheim.scenario, helheim.n_steps + 1) == ("calving", 261)
    assert (pig.scenario, pig.n_steps + 1) == ("melt", 240)
    assert pig.dt == pytest.approx(1 / 12)
    assert helheim.t_end == pytest.approx(13.0)


@pytest.mark.parametrize(
    "overrides",
    [{"dt": 0.0}, {"n_steps": -1}, {"fine_edge": 3000.0, "coarse_edge": 2000.0}, {"front_position": 1.5}],
)
def test_invalid_sim_config(overrides):
    with pytest.raises(ValueError):
        SimConfig(**overrides)


def test_sim_config_dict_round_trip():
    config = tiny_sim_config("melt")
    assert SimConfig.from_dict(config.to_dict()) == config
    with pytest.raises(ValueError, match="unknown"):
        SimConfig.from_dict({**config.to_dict(), "viscosity": 1.0})


def test_scenario_params_ranges_and_ids():
    assert ScenarioParams("calving", 0.75e6).scenario_id == "calving-0.7500MPa"
    assert ScenarioParams("melt", 20.0).scenario_id == "melt-020.00"
    with pytest.raises(ValueError):
        ScenarioParams("calving", 2.0e6)
    with pytest.raises(ValueError):
        ScenarioParams("melt", -1.0)
    with pytest.raises(AttributeError):
        ScenarioParams("melt", 10.0).sigma_max


# --------------------------------------------------------------------------- #
# Mesh generation                                                              #
# --------------------------------------------------------------------------- #


def test_target_edge_grades_from_front(calving_config):
    x = np.array([calving_config.length_x, 0.0])
    np.testing.assert_allclose(target_edge_length(calving_config, x), [1500.0, 2500.0])


def test_generated_mesh_boundaries(calving_mesh):
    x, y = calving_mesh.nodes[:, 0], calving_mesh.nodes[:, 1]
    flags = calving_mesh.boundary_flags
    np.testing.assert_array_equal(flags == BOUNDARY_FRONT, np.isclose(x, TINY_DOMAIN["length_x"]))
    assert np.all(flags[np.isclose(x, 0.0)] == BOUNDARY_LATERAL)
    assert np.all(flags[np.isclose(y, 0.0) & (x < TINY_DOMAIN["length_x"] - 1)] == BOUNDARY_LATERAL)
    assert calving_mesh.bounding_box() == pytest.approx((0.0, 0.0, 12000.0, 6000.0))
    assert calving_mesh.nodal_areas().sum() == pytest.approx(12000.0 * 6000.0)


def test_generated_mesh_is_finer_at_front():
    config = tiny_sim_config("calving", length_x=30000.0, fine_edge=800.0, coarse_edge=3000.0)
    mesh = generate_mesh(config)
    lengths = mesh.edge_lengths()
    assert lengths.max() <= 2.0 * config.coarse_edge
    near = np.sum(mesh.nodes[:, 0] > config.length_x - config.fine_zone)
    far = np.sum(mesh.nodes[:, 0] < config.fine_zone)
    assert near > far


def test_mesh_generation_is_seeded(calving_config):
    first = generate_mesh(calving_config)
    again = generate_mesh(calving_config)
    other = generate_mesh(tiny_sim_config("calving", seed=5))
    np.testing.assert_array_equal(first.nodes, again.nodes)
    assert first.nodes.shape != other.nodes.shape or not np.array_equal(first.nodes, other.nodes)


def test_mesh_too_fine_for_domain():
    with pytest.raises(MeshGenerationError):
        generate_mesh(tiny_sim_config("calving", fine_edge=7000.0, coarse_edge=8000.0))


# --------------------------------------------------------------------------- #
# Transient runs                                                               #
# --------------------------------------------------------------------------- #


def test_trajectory_shape_and_times(calving_trajectories, calving_config):
    for traj in calving_trajectories:
        assert traj.n_states == calving_config.n_steps + 1
        assert len(traj.budgets) == calving_config.n_steps
        times = [s.time for s in traj.states]
        np.testing.assert_allclose(times, np.arange(traj.n_states) * calving_config.dt)
        for state in traj.states:
            state.validate()
        np.testing.assert_array_equal(traj.states[0].bed, traj.states[-1].bed)


def test_budgets_close(calving_trajectories):
    for traj in calving_trajectories:
        volumes = traj.volumes()
        for k, budget in enumerate(traj.budgets):
            assert budget.volume_before == pytest.approx(volumes[k])
            assert budget.volume_after == pytest.approx(volumes[k + 1])
            assert abs(budget.residual) <= 1e-9 * budget.volume_before


def test_lower_threshold_calves_at_least_as_much(calving_trajectories):
    by_value = dict(zip(CALVING_VALUES, calving_trajectories))
    assert by_value[0.75e6].budgets[0].calved >= by_value[1.0e6].budgets[0].calved


def test_simulation_is_deterministic(calving_config, calving_mesh, calving_trajectories):
    rerun = simulate(calving_config, ScenarioParams("calving", CALVING_VALUES[0]), mesh=calving_mesh)
    for a, b in zip(rerun.states, calving_trajectories[0].states):
        np.testing.assert_array_equal(a.thickness, b.thickness)
        np.testing.assert_array_equal(a.vx, b.vx)


def test_run_transient_returns_saved_states(calving_config, calving_mesh, calving_trajectories):
    states = run_transient(calving_config, ScenarioParams("calving", CALVING_VALUES[1]), mesh=calving_mesh)
    assert len(states) == calving_config.n_steps + 1
    np.testing.assert_array_equal(states[-1].thickness, calving_trajectories[1].states[-1].thickness)


def test_scenario_kind_must_match(calving_config, calving_mesh):
    with pytest.raises(ValueError, match="scenario"):
        simulate(calving_config, ScenarioParams("melt", 10.0), mesh=calving_mesh)


def test_scenario_seed_moves_the_bed_but_not_the_mesh():
    config = tiny_sim_config(n_steps=1)
    params = ScenarioParams("calving", CALVING_VALUES[0])
    a = simulate(config, params, seed=1)
    b = simulate(config, params, seed=2)
    np.testing.assert_array_equal(a.mesh.nodes, b.mesh.nodes)
    np.testing.assert_array_equal(a.mesh.triangles, b.mesh.triangles)
    assert not np.array_equal(a.states[0].bed, b.states[0].bed)
    np.testing.assert_array_equal(a.mesh.nodes, generate_mesh(config).nodes)


def test_stronger_melt_loses_more_ice():
    config = tiny_sim_config("melt")
    mesh = generate_mesh(config)
    weak = simulate(config, ScenarioParams("melt", 0.0), mesh=mesh)
    strong = simulate(config, ScenarioParams("melt", 50.0), mesh=mesh)
    assert strong.budgets[0].melt > 0
    assert weak.budgets[0].melt == 0
    assert strong.volumes()[-1] < weak.volumes()[-1]


def test_trajectory_file_round_trip(tmp_path, calving_trajectories):
    traj = calving_trajectories[1]
    loaded = load_trajectory(save_trajectory(tmp_path / "traj.bin", traj))
    assert loaded.scenario_id == traj.scenario_id
    assert loaded.config == traj.config
    np.testing.assert_array_equal(loaded.mesh.triangles, traj.mesh.triangles)
    np.testing.assert_array_equal(loaded.states[-1].thickness, traj.states[-1].thickness)
    assert loaded.budgets == traj.budgets
