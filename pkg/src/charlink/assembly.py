"""Group characters into words from predicted links, and score the result."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import OrientedRect, convex_hull, envelope, iou, min_area_rect
from .graph import GraphConfig, build_knn_graph
from .supervision import label_edges, match_boxes

WORD_IOU = 0.5


class UnionFind:
    """Disjoint sets over 0..n-1 with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


def connected_components(n: int, edges) -> list[list[int]]:
    """Undirected components, each sorted, ordered by smallest member."""
    uf = UnionFind(n)
    for i, j in edges:
        i, j = int(i), int(j)
        if not (0 <= i < n and 0 <= j < n):
            raise IndexError(f"edge ({i}, {j}) out of range for {n} nodes")
        uf.union(i, j)
    groups: dict[int, list[int]] = {}
    for v in range(n):
        groups.setdefault(uf.find(v), []).append(v)
    return sorted(groups.values(), key=lambda g: g[0])


@dataclass
class WordPrediction:
    members: list[int]
    hull: np.ndarray
    rect: OrientedRect


def assemble_words(det, pred, threshold: float = 0.5, edges=None) -> list[WordPrediction]:
    """Components of the predicted-positive edges, each wrapped in a hull and min-area rect."""
    boxes = np.asarray(det.boxes, dtype=float).reshape(-1, 4, 2)
    edges = pred.edges if edges is None else edges
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    positive = edges[np.asarray(pred.probs) >= threshold]
    words = []
    for members in connected_components(len(boxes), positive):
        pts = boxes[members].reshape(-1, 2)
        words.append(WordPrediction(members, convex_hull(pts), min_area_rect(pts)))
    return words


def prf(tp: int, n_pred: int, n_true: int) -> tuple[float, float, float]:
    p = tp / n_pred if n_pred else 0.0
    r = tp / n_true if n_true else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def match_rects(pred_rects, true_rects, threshold: float = WORD_IOU) -> list[tuple[int, int]]:
    """Greedy one-to-one matching by descending IoU, keeping pairs with IoU >= threshold."""
    true_polys = [r.corners() for r in true_rects]
    true_env = [envelope(p) for p in true_polys]
    cand = []
    for pi, pr in enumerate(pred_rects):
        poly = pr.corners()
        env = envelope(poly)
        for ti, tp in enumerate(true_polys):
            if env.overlaps(true_env[ti]):
                score = iou(poly, tp)
                if score >= threshold:
                    cand.append((-score, pi, ti))
    cand.sort()
    used_p, used_t, pairs = set(), set(), []
    for _, pi, ti in cand:
        if pi not in used_p and ti not in used_t:
            used_p.add(pi)
            used_t.add(ti)
            pairs.append((pi, ti))
    return pairs


def true_word_rects(scene) -> list[OrientedRect]:
    return [min_area_rect(w.chars.reshape(-1, 2)) for w in scene.words]


@dataclass
class EvalReport:
    edge_precision: float = 0.0
    edge_recall: float = 0.0
    edge_f: float = 0.0
    word_precision: float = 0.0
    word_recall: float = 0.0
    word_f: float = 0.0
    coverage: float = 1.0  # mean per-scene fraction of intended links present as edges
    counts: dict = field(default_factory=dict)
    per_scene: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def scene_scores(scene, det, pred, labels, threshold: float = 0.5) -> dict:
    y = np.asarray(labels.labels, dtype=bool)
    yhat = pred.positive(threshold)
    words = assemble_words(det, pred, threshold)
    truth = true_word_rects(scene)
    matched = match_rects([w.rect for w in words], truth)
    return {
        "scene_id": scene.scene_id,
        "edge_tp": int((y & yhat).sum()), "edge_pred": int(yhat.sum()), "edge_true": int(y.sum()),
        "word_tp": len(matched), "word_pred": len(words), "word_true": len(truth),
        "coverage": labels.coverage,
    }


def summarize(rows: list[dict]) -> EvalReport:
    tot = {k: sum(r[k] for r in rows) for k in
           ("edge_tp", "edge_pred", "edge_true", "word_tp", "word_pred", "word_true")}
    ep, er, ef = prf(tot["edge_tp"], tot["edge_pred"], tot["edge_true"])
    wp, wr, wf = prf(tot["word_tp"], tot["word_pred"], tot["word_true"])
    cov = float(np.mean([r["coverage"] for r in rows])) if rows else 1.0
    for r in rows:
        r["edge_f"] = prf(r["edge_tp"], r["edge_pred"], r["edge_true"])[2]
        r["word_f"] = prf(r["word_tp"], r["word_pred"], r["word_true"])[2]
    return EvalReport(ep, er, ef, wp, wr, wf, cov, tot, rows)


def evaluate(scenes, detections, predictions, graph_cfg: GraphConfig | None = None,
             labels=None, threshold: float = 0.5) -> EvalReport:
    """Edge-level and word-level precision/recall/F over a set of scenes.

    ``predictions`` must carry the edges they score (as returned by
    ``LinkModel.predict``). Labels are derived from the annotations unless given.
    """
    graph_cfg = graph_cfg or GraphConfig()
    rows = []
    for i, (scene, det, pred) in enumerate(zip(scenes, detections, predictions, strict=True)):
        if scene.scene_id != det.scene_id:
            raise ValueError(f"scene id mismatch: {scene.scene_id!r} vs {det.scene_id!r}")
        if labels is not None:
            lab = labels[i]
        else:
            graph = build_knn_graph(det, graph_cfg, (scene.image_width, scene.image_height))
            lab = label_edges(graph, match_boxes(det, scene), scene)
        rows.append(scene_scores(scene, det, pred, lab, threshold))
    rows.sort(key=lambda r: r["scene_id"])
    return summarize(rows)
