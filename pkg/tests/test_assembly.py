import numpy as np
import pytest

from charlink.assembly import (
    assemble_words,
    connected_components,
    evaluate,
    match_rects,
    prf,
    true_word_rects,
)
from charlink.geometry import points_in_convex
from charlink.graph import build_knn_graph
from charlink.models import EdgePrediction
from charlink.scenes import (
    DetectionSet,
    DetectorNoise,
    GeneratorConfig,
    SceneAnnotation,
    WordAnnotation,
    char_quad,
    generate_scenes,
    simulate_all,
)
from charlink.supervision import label_edges, match_boxes

from oracles import components_by_closure


def test_components_examples():
    assert connected_components(4, [(0, 1), (1, 2)]) == [[0, 1, 2], [3]]
    assert connected_components(3, []) == [[0], [1], [2]]
    assert connected_components(4, [(3, 0)]) == [[0, 3], [1], [2]]
    with pytest.raises(IndexError):
        connected_components(2, [(0, 2)])


def test_components_match_closure_oracle():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 13))
        m = int(rng.integers(0, 2 * n))
        edges = rng.integers(0, n, size=(m, 2)).tolist()
        assert connected_components(n, edges) == components_by_closure(n, edges)


def chain(n, x0=20.0, y=40.0):
    return np.array([char_quad((x0 + 20 * i, y), 0.0, 17, 23) for i in range(n)])


def test_assemble_all_negative_gives_singletons():
    det = DetectionSet("c", chain(3), [None] * 3, 200, 100)
    edges = np.array([[0, 1], [1, 2]])
    words = assemble_words(det, EdgePrediction(np.zeros(2), edges))
    assert [w.members for w in words] == [[0], [1], [2]]


def test_assemble_chain_rect_contains_all_corners():
    boxes = chain(3)
    det = DetectionSet("c", boxes, [None] * 3, 200, 100)
    words = assemble_words(det, EdgePrediction(np.ones(2), np.array([[0, 1], [2, 1]])))
    assert len(words) == 1 and words[0].members == [0, 1, 2]
    assert points_in_convex(words[0].rect.corners(), boxes.reshape(-1, 2), tol=1e-9).all()
    assert points_in_convex(words[0].hull, boxes.reshape(-1, 2), tol=1e-9).all()


def test_assemble_two_chains_are_disjoint():
    boxes = np.vstack([chain(2), chain(3, y=120)])
    det = DetectionSet("c", boxes, [None] * 5, 200, 200)
    pred = EdgePrediction(np.array([0.9, 0.8, 0.7, 0.1]), np.array([[0, 1], [2, 3], [3, 4], [1, 2]]))
    words = assemble_words(det, pred)
    assert [w.members for w in words] == [[0, 1], [2, 3, 4]]


@pytest.fixture(scope="module")
def noisy():
    scenes = generate_scenes(GeneratorConfig(n_scenes=12, seed=31))
    dets = simulate_all(scenes, DetectorNoise(seed=4, drop=0.05, spurious=0.1))
    graphs = [build_knn_graph(d) for d in dets]
    labels = [label_edges(g, match_boxes(d, s), s) for s, d, g in zip(scenes, dets, graphs)]
    return scenes, dets, graphs, labels


def test_assembly_partitions_and_is_monotone(noisy):
    _, dets, graphs, _ = noisy
    rng = np.random.default_rng(1)
    for det, g in zip(dets, graphs):
        pred = EdgePrediction(rng.random(len(g.edges)), g.edges)
        prev = None
        for t in np.linspace(0, 1, 11):
            comps = [w.members for w in assemble_words(det, pred, t)]
            assert sorted(i for c in comps for i in c) == list(range(len(det)))
            if prev is not None:
                # Every component at the higher threshold lies inside one lower-threshold component.
                owner = {i: k for k, c in enumerate(prev) for i in c}
                assert all(len({owner[i] for i in c}) == 1 for c in comps)
            prev = comps


def test_perfect_predictions_score_one():
    words = [WordAnnotation("ab", chain(2)), WordAnnotation("cde", chain(3, y=120))]
    scene = SceneAnnotation("p", 200, 200, words)
    det = DetectionSet("p", scene.char_quads(), scene.char_index(), 200, 200)
    g = build_knn_graph(det)
    lab = label_edges(g, match_boxes(det, scene), scene)
    rep = evaluate([scene], [det], [EdgePrediction(lab.labels.astype(float), g.edges)])
    assert (rep.edge_f, rep.word_f, rep.word_precision, rep.word_recall) == (1.0, 1.0, 1.0, 1.0)


def test_half_recall_edge_scores(noisy):
    scenes, dets, graphs, labels = noisy
    preds = []
    for g, lab in zip(graphs, labels):
        probs = np.zeros(len(g.edges))
        pos = np.flatnonzero(lab.labels)
        probs[pos[::2]] = 1.0
        preds.append(EdgePrediction(probs, g.edges))
    rep = evaluate(scenes, dets, preds, labels=labels)
    total_pos = sum(int(l.labels.sum()) for l in labels)
    kept = sum(len(np.flatnonzero(l.labels)[::2]) for l in labels)
    assert rep.edge_precision == 1.0
    assert rep.edge_recall == pytest.approx(kept / total_pos)
    p, r, f = prf(1, 1, 2)
    assert (p, r) == (1.0, 0.5) and f == pytest.approx(2 / 3)


def test_evaluate_is_order_invariant(noisy):
    scenes, dets, graphs, labels = noisy
    rng = np.random.default_rng(2)
    preds = [EdgePrediction(rng.random(len(g.edges)), g.edges) for g in graphs]
    a = evaluate(scenes, dets, preds)
    order = rng.permutation(len(scenes))
    b = evaluate([scenes[i] for i in order], [dets[i] for i in order], [preds[i] for i in order])
    assert a.to_dict() == b.to_dict()
    with pytest.raises(ValueError):
        evaluate(scenes[:2], dets[1:3], preds[:2])


def test_word_matching_is_one_to_one():
    scene = SceneAnnotation("w", 200, 200, [WordAnnotation("abc", chain(3))])
    truth = true_word_rects(scene)
    pairs = match_rects(truth + truth, truth)
    assert pairs == [(0, 0)]
    assert prf(0, 0, 0) == (0.0, 0.0, 0.0)
