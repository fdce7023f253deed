"""Directed k-NN character graphs with initial node and edge features.

Node features (16, all in [0, 1]):
    0-7   corner coordinates, x / image width and y / image height
    8-9   centroid
    10-11 width and height of the axis-aligned envelope, normalized
    12    envelope area / image area
    13    envelope aspect ratio w / h, clamped to [0, 10], divided by 10
    14-15 sin and cos of the top-edge orientation, mapped by (v + 1) / 2

Edge features (6, all in [0, 1]) for an edge src -> dst:
    0-1   centroid displacement dst - src, normalized, mapped by (v + 1) / 2
    2     minimum corner-to-corner distance / image diagonal
    3     centroid distance / image diagonal
    4     1 if dst lies right of src
    5     1 if dst lies above src (smaller y)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

NODE_DIM = 16
EDGE_DIM = 6


@dataclass
class GraphConfig:
    k: int = 4
    d_node: int = NODE_DIM
    d_edge: int = EDGE_DIM

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass(eq=False)
class CharGraph:
    node_feats: np.ndarray  # (n, d_node)
    edges: np.ndarray  # (m, 2) int, rows are (src, dst)
    edge_feats: np.ndarray  # (m, d_edge)
    image_width: int = 1
    image_height: int = 1
    # Node offsets of the scenes making up a merged batch graph.
    blocks: np.ndarray = field(default=None)

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if self.blocks is None:
            self.blocks = np.array([0, self.n], dtype=np.int64)

    @property
    def n(self) -> int:
        return len(self.node_feats)

    @property
    def src(self) -> np.ndarray:
        return self.edges[:, 0]

    @property
    def dst(self) -> np.ndarray:
        return self.edges[:, 1]

    @cached_property
    def outdeg(self) -> np.ndarray:
        return np.bincount(self.src, minlength=self.n)

    @cached_property
    def src_incidence(self) -> sp.csr_matrix:
        """(n, m) matrix with a 1 at (src[e], e)."""
        m = len(self.edges)
        return sp.csr_matrix((np.ones(m), (self.src, np.arange(m))), shape=(self.n, m))

    @cached_property
    def dst_incidence(self) -> sp.csr_matrix:
        m = len(self.edges)
        return sp.csr_matrix((np.ones(m), (self.dst, np.arange(m))), shape=(self.n, m))

    @cached_property
    def mean_operator(self) -> sp.csr_matrix:
        """(n, m) matrix averaging edge rows into their source node."""
        inv = 1.0 / np.maximum(self.outdeg, 1)
        m = len(self.edges)
        return sp.csr_matrix((inv[self.src], (self.src, np.arange(m))), shape=(self.n, m))

    def edge_blocks(self) -> np.ndarray:
        """Edge offsets per block; edges must be grouped by block."""
        return np.searchsorted(self.src, self.blocks, side="left")


def knn_edges(points: np.ndarray, k: int) -> np.ndarray:
    """Directed edges i -> j for the k nearest j of every i, ties to lower index."""
    n = len(points)
    if n <= 1:
        return np.zeros((0, 2), dtype=np.int64)
    kk = min(k, n - 1)
    d = ((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=-1)
    np.fill_diagonal(d, np.inf)
    order = np.argsort(d, axis=1, kind="stable")[:, :kk]
    src = np.repeat(np.arange(n), kk)
    return np.stack([src, order.ravel()], axis=1).astype(np.int64)


def init_node_features(quads, image_w: float, image_h: float) -> np.ndarray:
    """Feature rows for one quad ``(4, 2)`` or a stack ``(n, 4, 2)``."""
    if image_w <= 0 or image_h <= 0:
        raise ValueError("image dimensions must be positive")
    q = np.asarray(quads, dtype=float)
    single = q.ndim == 2
    q = q.reshape(-1, 4, 2)
    scale = np.array([image_w, image_h], dtype=float)
    norm = q / scale
    lo, hi = q.min(axis=1), q.max(axis=1)
    wh = hi - lo
    aspect = np.where(wh[:, 1] > 0, wh[:, 0] / np.where(wh[:, 1] > 0, wh[:, 1], 1.0), 10.0)
    top = q[:, 1] - q[:, 0]
    theta = np.arctan2(top[:, 1], top[:, 0])
    feats = np.concatenate([
        norm.reshape(-1, 8),
        norm.mean(axis=1),
        wh / scale,
        (wh[:, 0] * wh[:, 1] / (image_w * image_h))[:, None],
        (np.clip(aspect, 0.0, 10.0) / 10.0)[:, None],
        ((np.sin(theta) + 1) / 2)[:, None],
        ((np.cos(theta) + 1) / 2)[:, None],
    ], axis=1)
    return feats[0] if single else feats


def edge_features(quads: np.ndarray, edges: np.ndarray, image_w: float, image_h: float) -> np.ndarray:
    if image_w <= 0 or image_h <= 0:
        raise ValueError("image dimensions must be positive")
    q = np.asarray(quads, dtype=float).reshape(-1, 4, 2)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    diag = math.hypot(image_w, image_h)
    a, b = q[edges[:, 0]], q[edges[:, 1]]
    delta = b.mean(axis=1) - a.mean(axis=1)
    corner = np.sqrt(((a[:, :, None, :] - b[:, None, :, :]) ** 2).sum(axis=-1)).min(axis=(1, 2))
    return np.stack([
        (delta[:, 0] / image_w + 1) / 2,
        (delta[:, 1] / image_h + 1) / 2,
        corner / diag,
        np.hypot(delta[:, 0], delta[:, 1]) / diag,
        (delta[:, 0] > 0).astype(float),
        (delta[:, 1] < 0).astype(float),
    ], axis=1)


def init_edge_features(src, dst, image_w: float, image_h: float) -> np.ndarray:
    return edge_features(np.stack([src, dst]), np.array([[0, 1]]), image_w, image_h)[0]


def build_knn_graph(det, cfg: GraphConfig | None = None, image_size=None) -> CharGraph:
    """k-NN graph over the centroids of ``det.boxes`` (a DetectionSet).

    Features are normalized by ``image_size`` (width, height), falling back
    to the size recorded on the detection set.
    """
    cfg = cfg or GraphConfig()
    boxes = np.asarray(det.boxes, dtype=float).reshape(-1, 4, 2)
    W, H = image_size if image_size is not None else (det.image_width, det.image_height)
    if not W or not H:
        raise ValueError(f"image size unknown for scene {det.scene_id!r}")
    edges = knn_edges(boxes.mean(axis=1), cfg.k)
    return CharGraph(init_node_features(boxes, W, H), edges, edge_features(boxes, edges, W, H), W, H)


def merge_graphs(graphs) -> CharGraph:
    """Disjoint union; block offsets record where each graph's nodes start."""
    sizes = np.array([g.n for g in graphs], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    edges = np.concatenate([g.edges + off for g, off in zip(graphs, offsets[:-1])]) \
        if graphs else np.zeros((0, 2), np.int64)
    d_node = graphs[0].node_feats.shape[1] if graphs else NODE_DIM
    d_edge = graphs[0].edge_feats.shape[1] if graphs else EDGE_DIM
    return CharGraph(
        np.concatenate([g.node_feats for g in graphs]) if graphs else np.zeros((0, d_node)),
        edges,
        np.concatenate([g.edge_feats for g in graphs]) if graphs else np.zeros((0, d_edge)),
        blocks=offsets,
    )
