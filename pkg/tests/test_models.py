import json
import math

import numpy as np
import pytest

from charlink.graph import CharGraph, GraphConfig, build_knn_graph
from charlink.models import (
    DynamicGCNModel,
    NENETModel,
    VanillaGCNModel,
    create_model,
    load_checkpoint,
    nenet_backward,
    nenet_forward,
    nenet_static_edge_forward,
    propagation_matrix,
    save_checkpoint,
)
from charlink.models import CheckpointError
from charlink.models.gcn import feature_knn
from charlink.nn import softmax2
from charlink.scenes import DetectionSet, char_quad

from oracles import finite_difference_grads

MODEL_TYPES = ("nenet", "nenet_static_edge", "vanilla_gcn", "dynamic_gcn")


def random_graph(seed, n=10, k=3):
    rng = np.random.default_rng(seed)
    boxes = np.array([char_quad(rng.uniform(10, 90, 2), rng.uniform(-0.5, 0.5), 8, 11)
                      for _ in range(n)])
    return build_knn_graph(DetectionSet("r", boxes, [None] * n, 100, 100), GraphConfig(k=k))


def permuted(graph, perm):
    inv = np.argsort(perm)  # new index of old node i is inv[i]
    edges = inv[graph.edges]
    return CharGraph(graph.node_feats[perm], edges, graph.edge_feats.copy(),
                     graph.image_width, graph.image_height)


def edge_map(graph, probs, relabel=None):
    edges = graph.edges if relabel is None else relabel[graph.edges]
    return {(int(a), int(b)): p for (a, b), p in zip(edges, probs)}


# ---------------------------------------------------------------------------
# NENET


def test_single_node_graph_has_empty_prediction():
    g = CharGraph(np.full((1, 16), 0.3), np.zeros((0, 2)), np.zeros((0, 6)))
    for t in MODEL_TYPES:
        assert len(create_model(t).predict(g)) == 0


@pytest.mark.parametrize("model_type", ["nenet", "nenet_static_edge"])
def test_zero_parameters_give_one_half(model_type):
    m = create_model(model_type)
    m.set_params({k: np.zeros_like(v) for k, v in m.params().items()})
    pred, _ = nenet_forward(m, random_graph(0))
    np.testing.assert_array_equal(pred.probs, 0.5)


@pytest.mark.parametrize("model_type", MODEL_TYPES)
def test_permutation_equivariance(model_type):
    g = random_graph(1, n=12, k=4)
    m = create_model(model_type, seed=4)
    perm = np.random.default_rng(2).permutation(g.n)
    pg = permuted(g, perm)
    base = edge_map(g, m.predict(g).probs, relabel=np.argsort(perm))
    other = edge_map(pg, m.predict(pg).probs)
    assert base.keys() == other.keys()
    for key in base:
        assert abs(base[key] - other[key]) <= 1e-12


@pytest.mark.parametrize("static", [False, True])
def test_degree_invariance_of_node_update(static):
    rng = np.random.default_rng(3)
    m = NENETModel(static_edges=static, rng=rng)
    xi, xj = rng.random(16), rng.random(16)
    ef = rng.random(6)
    states = []
    for deg in (1, 2, 5):
        feats = np.vstack([xi] + [xj] * deg)
        edges = np.array([[0, j] for j in range(1, deg + 1)])
        g = CharGraph(feats, edges, np.tile(ef, (deg, 1)))
        _, cache = m.forward(g)
        states.append(cache.nodes[1][0])
    # Equal up to BLAS rounding, which varies with the number of message rows.
    np.testing.assert_allclose(states[1], states[0], rtol=0, atol=1e-12)
    np.testing.assert_allclose(states[2], states[0], rtol=0, atol=1e-12)


def test_directionality_single_layer():
    m = NENETModel(node_dims=(16, 8), edge_dims=(6, 2), rng=np.random.default_rng(5))
    g = random_graph(6)
    edges = [tuple(e) for e in g.edges.tolist()]
    i, j = next((a, b) for a, b in edges if (b, a) in edges)
    before = m.predict(g).probs
    feats = g.edge_feats.copy()
    feats[edges.index((i, j))] = 0.0
    after = m.predict(CharGraph(g.node_feats, g.edges, feats)).probs
    rev = edges.index((j, i))
    assert after[rev] == before[rev]
    assert after[edges.index((i, j))] != before[edges.index((i, j))]


def test_static_equals_masked_full_model():
    rng = np.random.default_rng(7)
    full = NENETModel(rng=rng)
    static = NENETModel(static_edges=True, rng=np.random.default_rng(8))
    # Share everything except edge-input columns of the second layer, which are zeroed.
    static.f[0], static.g[0] = full.f[0], full.g[0]
    for a, b in ((full.f[1], static.f[1]), (full.g[1], static.g[1])):
        a.W1[:, 64:] = 0.0
        b.W1[:, :64] = a.W1[:, :64]
        b.W1[:, 64:] = 0.0
        b.b1, b.W2, b.b2 = a.b1, a.W2, a.b2
    g = random_graph(9)
    np.testing.assert_allclose(nenet_static_edge_forward(static, g).probs, full.predict(g).probs,
                               atol=1e-12)
    with pytest.raises(ValueError):
        nenet_static_edge_forward(full, g)


def test_single_layer_static_and_full_agree():
    full = NENETModel(node_dims=(16, 8), edge_dims=(6, 2), rng=np.random.default_rng(1))
    static = NENETModel(node_dims=(16, 8), edge_dims=(6, 2), static_edges=True,
                        rng=np.random.default_rng(1))
    g = random_graph(2)
    np.testing.assert_array_equal(full.predict(g).probs, static.predict(g).probs)


def test_dim_mismatch():
    g = CharGraph(np.zeros((3, 10)), [[0, 1]], np.zeros((1, 6)))
    for t in MODEL_TYPES:
        with pytest.raises(ValueError):
            create_model(t).predict(g)


def _check_fd(model, graph, seed, tol):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, len(graph.edges))
    weights = rng.integers(0, 2, len(graph.edges)).astype(float)
    _, grads = model.loss_and_grads(graph, labels, weights)
    params = {k: v.copy() for k, v in model.params().items()}

    def loss(p):
        model.set_params(p)
        return model.loss_and_grads(graph, labels, weights)[0]

    fd = finite_difference_grads(loss, params)
    model.set_params(params)
    for name in params:
        err = np.abs(grads[name] - fd[name]).max()
        scale = max(np.abs(fd[name]).max(), 1e-6)
        assert err / scale < tol, (name, err, scale)


@pytest.mark.parametrize("seed", range(20))
def test_nenet_gradients_match_finite_differences(seed):
    static = seed % 4 == 3
    m = NENETModel(hidden=8, static_edges=static, rng=np.random.default_rng(seed))
    _check_fd(m, random_graph(100 + seed, n=10, k=3), seed, 1e-4)


@pytest.mark.parametrize("model_type, seed", [("vanilla_gcn", 0), ("vanilla_gcn", 1),
                                              ("dynamic_gcn", 0), ("dynamic_gcn", 1)])
def test_baseline_gradients_match_finite_differences(model_type, seed):
    m = create_model(model_type, seed=seed, hidden=8)
    _check_fd(m, random_graph(200 + seed, n=8, k=3), seed, 1e-4)


def test_zero_weights_give_zero_gradients():
    m = create_model("nenet", seed=1)
    g = random_graph(3)
    labels = np.ones(len(g.edges), dtype=int)
    _, cache = m.forward(g)
    grads = nenet_backward(m, g, cache, labels, np.zeros(len(g.edges)))
    assert all(not v.any() for v in grads.values())


def test_confident_correct_labels_have_smaller_gradient():
    m = create_model("nenet", seed=2)
    g = random_graph(4)
    f = m.f[-1]
    f.b2 = np.array([0.0, 0.0])
    # Push logits apart so probabilities are confident.
    f.W2 *= 20
    probs = m.predict(g).probs
    pred = (probs >= 0.5).astype(int)
    _, cache = m.forward(g)
    w = np.ones(len(pred))
    right = nenet_backward(m, g, cache, pred, w)
    wrong = nenet_backward(m, g, cache, 1 - pred, w)
    norm = lambda d: math.sqrt(sum(float((v ** 2).sum()) for v in d.values()))
    assert norm(right) < norm(wrong)


# ---------------------------------------------------------------------------
# Vanilla GCN


def test_propagation_matrix_on_path():
    p = propagation_matrix(3, [[0, 1], [2, 1]]).toarray()
    s6 = 1 / math.sqrt(6)
    expected = np.array([[1 / 2, s6, 0], [s6, 1 / 3, s6], [0, s6, 1 / 2]])
    np.testing.assert_allclose(p, expected, atol=1e-15)
    np.testing.assert_array_equal(p, p.T)


def test_vanilla_without_edges_is_per_node_mlp():
    m = VanillaGCNModel(rng=np.random.default_rng(0))
    x = np.random.default_rng(1).random((4, 16))
    g = CharGraph(x, np.zeros((0, 2)), np.zeros((0, 6)))
    out, _, _ = m.propagate(g)
    np.testing.assert_allclose(out, np.maximum(np.maximum(x @ m.H[0], 0) @ m.H[1], 0))
    assert len(m.predict(g)) == 0


def test_vanilla_locality():
    m = VanillaGCNModel(rng=np.random.default_rng(0))
    x = np.random.default_rng(2).random((2, 16))
    g = CharGraph(np.vstack([x, x]), [[0, 1], [2, 3]], np.zeros((2, 6)))
    probs = m.predict(g).probs
    assert probs[0] == probs[1]


# ---------------------------------------------------------------------------
# Dynamic GCN


def test_dynamic_zero_h_gives_equal_predictions():
    m = DynamicGCNModel(rng=np.random.default_rng(0))
    for h in m.h:
        for name in ("W1", "b1", "W2", "b2"):
            setattr(h, name, np.zeros_like(getattr(h, name)))
    probs = m.predict(random_graph(5)).probs
    assert np.ptp(probs) == 0.0


def test_dynamic_two_nodes_keep_their_edge():
    m = DynamicGCNModel(k=1, rng=np.random.default_rng(0))
    g = CharGraph(np.random.default_rng(1).random((2, 16)), [[0, 1], [1, 0]], np.zeros((2, 6)))
    _, layers = m.node_states(g)
    for edges, *_ in layers:
        assert sorted(map(tuple, edges.tolist())) == [(0, 1), (1, 0)]


def test_dynamic_rebuilds_graph_in_feature_space():
    # Two spatial clusters; constant layer-1 output makes every node equidistant in
    # feature space, so ties send every node to the lowest indices instead.
    centers = [(10, 10), (14, 10), (10, 14), (80, 80), (84, 80), (80, 84)]
    boxes = np.array([char_quad(c, 0.0, 3, 3) for c in centers])
    g = build_knn_graph(DetectionSet("c", boxes, [None] * 6, 100, 100), GraphConfig(k=2))
    m = DynamicGCNModel(k=2, rng=np.random.default_rng(0))
    h = m.h[0]
    h.W1[:], h.b1[:], h.W2[:] = 0.0, 0.0, 0.0
    h.b2[:] = 1.0
    states, layers = m.node_states(g)
    spatial = {tuple(e) for e in layers[0][0].tolist()}
    rebuilt = {tuple(e) for e in layers[1][0].tolist()}
    assert (5, 3) in spatial and (5, 0) in rebuilt
    assert rebuilt != spatial
    np.testing.assert_array_equal(layers[1][0], feature_knn(states[1], g.blocks, 2))
    np.testing.assert_array_equal(m.predict(g).edges, g.edges)


def test_feature_knn_respects_blocks():
    x = np.zeros((6, 3))
    edges = feature_knn(x, np.array([0, 3, 6]), 4)
    assert all((a < 3) == (b < 3) for a, b in edges)


# ---------------------------------------------------------------------------
# Checkpoints


@pytest.mark.parametrize("model_type", MODEL_TYPES)
def test_checkpoint_round_trip(tmp_path, model_type):
    m = create_model(model_type, seed=3)
    path = tmp_path / "m.json"
    save_checkpoint(path, m, seed=3)
    loaded, doc = load_checkpoint(path)
    assert loaded.model_type == model_type and doc["seed"] == 3
    for k, v in m.params().items():
        np.testing.assert_array_equal(loaded.params()[k], v)
    g = random_graph(0)
    np.testing.assert_array_equal(loaded.predict(g).probs, m.predict(g).probs)


def test_checkpoint_shape_validation(tmp_path):
    path = tmp_path / "m.json"
    save_checkpoint(path, create_model("nenet"), seed=0)
    doc = json.loads(path.read_text())
    doc["weights"]["f0.W1"]["rows"] += 1
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    doc["model_type"] = "mystery"
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_unknown_model_type():
    with pytest.raises(ValueError, match="unknown model type"):
        create_model("transformer")


def test_softmax_matches_prediction():
    m = create_model("nenet", seed=1)
    g = random_graph(2)
    logits, _ = m.forward(g)
    np.testing.assert_array_equal(m.predict(g).probs, softmax2(logits)[:, 1])
