"""Link targets: map detections onto ground-truth characters, then label edges.

An edge i -> j is positive when both boxes map into the same word and j holds
the next *mapped* character after i in reading order. When the detector
misses a character the link therefore jumps over it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import convex_hull, envelope, iou

IOU_THRESHOLD = 0.25

# Per-detection (word_index, char_index), or None when unmapped.
BoxMapping = list


@dataclass
class LinkLabels:
    labels: np.ndarray  # (m,) int in {0, 1}, aligned with graph.edges
    intended: int  # successor pairs the annotation asks for
    covered: int  # of those, how many exist as graph edges

    @property
    def coverage(self) -> float:
        return 1.0 if self.intended == 0 else self.covered / self.intended

    def __len__(self):
        return len(self.labels)


def match_boxes(det, scene, threshold: float = IOU_THRESHOLD) -> BoxMapping:
    """Greedy one-to-one matching by descending IoU; pairs need IoU >= threshold."""
    if det.scene_id != scene.scene_id:
        raise ValueError(f"scene id mismatch: {det.scene_id!r} vs {scene.scene_id!r}")
    gt = scene.char_quads()
    index = scene.char_index()
    gt_hulls = [convex_hull(q) for q in gt]
    gt_env = [envelope(q) for q in gt]
    pairs = []
    for di, box in enumerate(det.boxes):
        env = envelope(box)
        hull = convex_hull(box)
        for gi, genv in enumerate(gt_env):
            if not env.overlaps(genv):
                continue
            score = iou(hull, gt_hulls[gi])
            if score >= threshold:
                pairs.append((-score, di, gi))
    pairs.sort()
    mapping: BoxMapping = [None] * len(det.boxes)
    taken = set()
    for _, di, gi in pairs:
        if mapping[di] is None and gi not in taken:
            mapping[di] = index[gi]
            taken.add(gi)
    return mapping


def successor_pairs(mapping: BoxMapping) -> list[tuple[int, int]]:
    """(i, j) detection pairs where j holds the next mapped character after i."""
    by_word: dict[int, list[tuple[int, int]]] = {}
    for det_idx, m in enumerate(mapping):
        if m is not None:
            by_word.setdefault(m[0], []).append((m[1], det_idx))
    pairs = []
    for word in sorted(by_word):
        chars = sorted(by_word[word])
        pairs.extend((a[1], b[1]) for a, b in zip(chars, chars[1:]))
    return pairs


def label_edges(graph, mapping: BoxMapping, scene=None) -> LinkLabels:
    if len(mapping) != graph.n:
        raise ValueError("mapping and graph disagree on the number of detections")
    intended = successor_pairs(mapping)
    wanted = set(intended)
    labels = np.array([1 if (int(i), int(j)) in wanted else 0 for i, j in graph.edges], dtype=np.int64)
    return LinkLabels(labels, len(intended), int(labels.sum()))
