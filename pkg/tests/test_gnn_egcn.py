"""Tests for the equivariant graph layer and the EGCN emulator."""

import numpy as np
import pytest

from builders import dense_edge_attrs, make_graph_sample, permute_graph_sample, random_graph, tiny_model_config
from gnn.egcn import EgcnLayer, EgcnModel, egcn_layer_dense, egcn_layer_forward
from mesh.topology import GraphTopology
from ndnn.gradcheck import grad_check
from ndnn.layers import ShapeMismatchError

N_RIGID_MOTIONS = 100


class _LayerHarness:
    """Adapts one EgcnLayer to the (inputs) -> (out, cache) form grad_check drives."""

    def __init__(self, layer, topology):
        self.layer = layer
        self.topology = topology

    def parameters(self):
        return self.layer.parameters()

    def forward(self, inputs):
        h, x, attrs = inputs
        return self.layer.forward(h, x, self.topology, attrs)

    def backward(self, dout, cache):
        dh, dx, da = self.layer.backward(dout[0], dout[1], cache)
        return {"h": dh, "x": dx, "attrs": da}


def _rotation(theta: float) -> np.ndarray:
    return np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])


def _rigid_motions(rng: np.random.Generator, scale: float = 10.0):
    """Yield (Q, g) pairs; every second Q includes a reflection."""
    for k in range(N_RIGID_MOTIONS):
        Q = _rotation(rng.uniform(0.0, 2.0 * np.pi))
        if k % 2:
            Q = Q @ np.diag([1.0, -1.0])
        yield Q, rng.normal(scale=scale, size=2)


def _set_mlp(mlp, w1, b1, w2, b2) -> None:
    mlp.fc1.W.data[...] = np.asarray(w1, dtype=np.float64).reshape(mlp.fc1.W.data.shape)
    mlp.fc1.b.data[...] = b1
    mlp.fc2.W.data[...] = np.asarray(w2, dtype=np.float64).reshape(mlp.fc2.W.data.shape)
    mlp.fc2.b.data[...] = b2


def _scalar_mlp(w1, b1, w2, b2, inputs) -> float:
    z = sum(w * v for w, v in zip(w1, inputs)) + b1
    return w2 * (z if z >= 0 else 0.01 * z) + b2


@pytest.fixture
def layer_setup(rng):
    topology = random_graph(rng, 7)
    layer = EgcnLayer(4, 3, rng, message=5, mlp_hidden=6)
    h = rng.normal(size=(7, 4))
    x = rng.normal(size=(7, 2))
    attrs = rng.normal(size=(topology.n_directed, 5))
    return layer, topology, h, x, attrs


# --------------------------------------------------------------------------- #
# Layer                                                                        #
# --------------------------------------------------------------------------- #


@pytest.mark.parametrize("seed", range(50))
def test_layer_matches_dense_reference(seed):
    """Graphs of 1 to 10 nodes; every third one has no edges at all."""
    rng = np.random.default_rng(seed)
    n = 1 + seed % 10
    topology = random_graph(rng, n, p=(0.0, 0.25, 0.6)[seed % 3])
    layer = EgcnLayer(4, 3, rng, message=5, mlp_hidden=6)
    h = rng.normal(size=(n, 4))
    x = rng.normal(size=(n, 2))
    attrs = rng.normal(size=(topology.n_directed, 5))
    h_new, x_new = egcn_layer_forward(h, x, topology, attrs, layer)
    h_ref, x_ref = egcn_layer_dense(h, x, topology.to_dense(), dense_edge_attrs(topology, attrs), layer)
    np.testing.assert_allclose(h_new, h_ref, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(x_new, x_ref, rtol=1e-10, atol=1e-12)


def test_two_node_layer_by_hand(rng):
    layer = EgcnLayer(1, 1, rng, message=1, mlp_hidden=1, n_edge_attrs=1)
    E = ([0.5, -0.25, 1.0, 2.0], 0.1, 1.5, -0.2)
    X = ([-0.3], 0.0, 2.0, 0.05)
    H = ([1.0, 0.5], -0.4, 0.8, 0.3)
    _set_mlp(layer.phi_e, *E)
    _set_mlp(layer.phi_x, *X)
    _set_mlp(layer.phi_h, *H)

    h = [0.2, -0.4]
    x = [(0.0, 0.0), (1.0, 2.0)]
    # directed edges in CSR order: (0 <- 1), (1 <- 0)
    a = [0.3, -0.1]
    topology = GraphTopology.from_edges(2, [[0, 1]])
    h_new, x_new = egcn_layer_forward(np.array(h)[:, None], np.array(x), topology, np.array(a)[:, None], layer)

    for i in (0, 1):
        j = 1 - i
        dx, dy = x[i][0] - x[j][0], x[i][1] - x[j][1]
        m = _scalar_mlp(*E, [h[i], h[j], dx * dx + dy * dy, a[i]])
        w = _scalar_mlp(*X, [m])
        # one neighbor each, so C_i = 1
        assert x_new[i, 0] == pytest.approx(x[i][0] + dx * w, abs=1e-12)
        assert x_new[i, 1] == pytest.approx(x[i][1] + dy * w, abs=1e-12)
        assert h_new[i, 0] == pytest.approx(_scalar_mlp(*H, [h[i], m]), abs=1e-12)


def test_messages_see_coordinates_only_through_distance(rng):
    """Swinging node 2 around node 1 changes the shape but no edge length."""
    topology = GraphTopology.from_edges(3, [[0, 1], [1, 2]])
    layer = EgcnLayer(3, 3, rng, message=4, mlp_hidden=5)
    h = rng.normal(size=(3, 3))
    attrs = rng.normal(size=(topology.n_directed, 5))
    x = np.array([[0.0, 0.0], [1.0, 0.5], [2.5, 1.0]])
    moved = x.copy()
    moved[2] = x[1] + _rotation(1.3) @ (x[2] - x[1])

    h_new, x_new = egcn_layer_forward(h, x, topology, attrs, layer)
    h_moved, x_moved = egcn_layer_forward(h, moved, topology, attrs, layer)
    np.testing.assert_allclose(h_moved, h_new, rtol=0, atol=1e-12)
    np.testing.assert_allclose(x_moved[0], x_new[0], rtol=0, atol=1e-12)


def test_layer_is_rotation_and_translation_equivariant(layer_setup, rng):
    layer, topology, h, x, attrs = layer_setup
    h_new, x_new = egcn_layer_forward(h, x, topology, attrs, layer)
    for Q, g in _rigid_motions(rng):
        h_moved, x_moved = egcn_layer_forward(h, x @ Q.T + g, topology, attrs, layer)
        np.testing.assert_allclose(h_moved, h_new, rtol=0, atol=1e-9)
        np.testing.assert_allclose(x_moved, x_new @ Q.T + g, rtol=0, atol=1e-9)


def test_layer_is_permutation_equivariant(layer_setup, rng):
    layer, topology, h, x, attrs = layer_setup
    sample = make_graph_sample(topology, rng, in_features=4)
    sample.node_inputs, sample.positions, sample.edge_attrs = h, x, attrs
    perm = rng.permutation(topology.n_nodes)
    permuted = permute_graph_sample(sample, perm)
    h_new, x_new = egcn_layer_forward(h, x, topology, attrs, layer)
    h_perm, x_perm = egcn_layer_forward(
        permuted.node_inputs, permuted.positions, permuted.topology, permuted.edge_attrs, layer
    )
    np.testing.assert_allclose(h_perm, h_new[perm], rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(x_perm, x_new[perm], rtol=1e-12, atol=1e-12)


def test_isolated_node_keeps_coordinates(rng):
    topology = GraphTopology.from_edges(3, [[0, 1]])
    layer = EgcnLayer(2, 2, rng, message=3, mlp_hidden=4)
    h = rng.normal(size=(3, 2))
    x = rng.normal(size=(3, 2))
    h_new, x_new = egcn_layer_forward(h, x, topology, rng.normal(size=(2, 5)), layer)
    np.testing.assert_array_equal(x_new[2], x[2])
    expected = layer.phi_h.forward(np.concatenate([h[2], np.zeros(3)])[None, :])[0][0]
    np.testing.assert_allclose(h_new[2], expected)


def test_layer_rejects_bad_shapes(layer_setup):
    layer, topology, h, x, attrs = layer_setup
    with pytest.raises(ShapeMismatchError):
        layer.forward(h[:, :3], x, topology, attrs)
    with pytest.raises(ShapeMismatchError):
        layer.forward(h, x, topology, attrs[:, :4])


@pytest.mark.parametrize("slope, tol", [(1.0, 1e-6), (0.01, 1e-5)])
def test_layer_backward(rng, slope, tol):
    topology = random_graph(rng, 6)
    layer = EgcnLayer(3, 3, rng, message=4, mlp_hidden=5, slope=slope)
    arrays = {
        "h": rng.normal(size=(6, 3)),
        "x": rng.normal(size=(6, 2)),
        "attrs": rng.normal(size=(topology.n_directed, 5)),
    }
    inputs = (arrays["h"], arrays["x"], arrays["attrs"])
    report = grad_check(_LayerHarness(layer, topology), inputs, tol=tol, max_entries=15, input_arrays=arrays)
    assert report.passed, report.errors


# --------------------------------------------------------------------------- #
# Model                                                                        #
# --------------------------------------------------------------------------- #


@pytest.mark.parametrize("head", ["coords", "hidden"])
def test_model_output_shape(rng, head):
    topology = random_graph(rng, 9)
    model = EgcnModel(tiny_model_config("egcn", output_head=head), rng)
    pred = model.predict_nodes(make_graph_sample(topology, rng))
    assert pred.shape == (9, 4)


def test_velocity_mode_reads_initial_velocity(rng):
    """With no hidden layers the predicted velocity is the input velocity."""
    model = EgcnModel(tiny_model_config("egcn", n_hidden_layers=0), rng)
    sample = make_graph_sample(random_graph(rng, 5), rng)
    pred = model.predict_nodes(sample)
    np.testing.assert_array_equal(pred[:, :2], sample.node_inputs[:, 3:5])


@pytest.mark.parametrize("head", ["coords", "hidden"])
def test_position_mode_is_equivariant(rng, head):
    model = EgcnModel(tiny_model_config("egcn", coord_mode="position", output_head=head), rng)
    sample = make_graph_sample(random_graph(rng, 8), rng)
    positions = sample.positions
    base = model.predict_nodes(sample)
    velocity = base[:, :2] if head == "coords" else None
    for Q, g in _rigid_motions(rng, scale=5.0):
        sample.positions = positions @ Q.T + g
        moved = model.predict_nodes(sample)
        if velocity is not None:
            np.testing.assert_allclose(moved[:, :2], velocity @ Q.T, rtol=0, atol=1e-9)
            np.testing.assert_allclose(moved[:, 2:], base[:, 2:], rtol=0, atol=1e-9)
        else:
            np.testing.assert_allclose(moved, base, rtol=0, atol=1e-9)


@pytest.mark.parametrize("head", ["coords", "hidden"])
def test_velocity_mode_ignores_positions(rng, head):
    model = EgcnModel(tiny_model_config("egcn", output_head=head), rng)
    sample = make_graph_sample(random_graph(rng, 8), rng)
    base = model.predict_nodes(sample)
    for Q, g in _rigid_motions(rng):
        sample.positions = sample.positions @ Q.T + g
        np.testing.assert_array_equal(model.predict_nodes(sample), base)


@pytest.mark.parametrize(
    "overrides",
    [{}, {"coord_mode": "position"}, {"output_head": "hidden"}, {"coord_mode": "position", "output_head": "hidden"}],
)
def test_model_is_permutation_equivariant(rng, overrides):
    model = EgcnModel(tiny_model_config("egcn", **overrides), rng)
    sample = make_graph_sample(random_graph(rng, 9), rng)
    perm = rng.permutation(9)
    base = model.predict_nodes(sample)
    permuted = model.predict_nodes(permute_graph_sample(sample, perm))
    np.testing.assert_allclose(permuted, base[perm], rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("head", ["coords", "hidden"])
def test_zero_output_weights_give_the_bias(rng, head):
    model = EgcnModel(tiny_model_config("egcn", output_head=head), rng)
    bias = rng.normal(size=model.output_layer.b.data.shape)
    model.output_layer.W.data[...] = 0.0
    model.output_layer.b.data[...] = bias
    pred = model.predict_nodes(make_graph_sample(random_graph(rng, 6), rng))
    np.testing.assert_array_equal(pred[:, -len(bias):], np.tile(bias, (6, 1)))


@pytest.mark.parametrize(
    "overrides",
    [
        {"negative_slope": 1.0},
        {"negative_slope": 1.0, "coord_mode": "position"},
        {"negative_slope": 1.0, "output_head": "hidden"},
        {"negative_slope": 1.0, "n_hidden_layers": 0},
    ],
)
def test_model_backward(rng, overrides):
    model = EgcnModel(tiny_model_config("egcn", **overrides), rng)
    sample = make_graph_sample(random_graph(rng, 6), rng)
    arrays = {"node_inputs": sample.node_inputs, "edge_attrs": sample.edge_attrs, "positions": sample.positions}
    report = grad_check(model, sample, tol=1e-6, max_entries=12, input_arrays=arrays)
    assert report.passed, report.errors


def test_model_backward_with_leaky_slope(rng):
    model = EgcnModel(tiny_model_config("egcn"), rng)
    sample = make_graph_sample(random_graph(rng, 6), rng)
    report = grad_check(model, sample, tol=1e-5, max_entries=10)
    assert report.passed, report.errors


def test_model_rejects_wrong_input_width(rng):
    model = EgcnModel(tiny_model_config("egcn"), rng)
    sample = make_graph_sample(random_graph(rng, 5), rng, in_features=9)
    with pytest.raises(ShapeMismatchError):
        model.forward(sample)
