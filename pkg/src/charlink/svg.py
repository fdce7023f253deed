"""SVG overlay of one scene: detections, predicted links, words and ground truth.

Detection boxes are the only ``<polygon>`` elements; every other shape is a
``<path>`` or ``<line>`` so the polygon count equals the box count.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .assembly import match_rects, true_word_rects

CHAR = "#1f5fd6"
CORRECT = "#1a9c3c"
WRONG = "#d62728"
TRUTH = "#888888"
LINK = "#f0a000"


def _pts(poly) -> str:
    return " ".join(f"{x:.2f},{y:.2f}" for x, y in np.asarray(poly, dtype=float))


def _path(poly) -> str:
    p = np.asarray(poly, dtype=float)
    return "M " + " L ".join(f"{x:.2f} {y:.2f}" for x, y in p) + " Z"


def render_svg(det, scene=None, pred=None, words=None, threshold: float = 0.5) -> str:
    """SVG 1.1 document for ``det``; ``scene``, ``pred`` and ``words`` are optional layers."""
    W = det.image_width or (scene.image_width if scene is not None else 0)
    H = det.image_height or (scene.image_height if scene is not None else 0)
    if not W or not H:
        boxes = np.asarray(det.boxes).reshape(-1, 2)
        W, H = (int(np.ceil(boxes.max(axis=0)[i])) + 1 for i in (0, 1)) if len(boxes) else (1, 1)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">',
        f"<title>{escape(str(det.scene_id))}</title>",
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
    ]
    if scene is not None:
        out.append(f'<g id="truth" fill="none" stroke="{TRUTH}" stroke-dasharray="4 3" stroke-width="1">')
        for r in true_word_rects(scene):
            out.append(f'<path d="{_path(r.corners())}"/>')
        out.append("</g>")

    out.append(f'<g id="chars" fill="none" stroke="{CHAR}" stroke-width="1">')
    for q in np.asarray(det.boxes, dtype=float).reshape(-1, 4, 2):
        out.append(f'<polygon points="{_pts(q)}"/>')
    out.append("</g>")

    if pred is not None and pred.edges is not None:
        centers = np.asarray(det.boxes, dtype=float).reshape(-1, 4, 2).mean(axis=1)
        out.append(f'<g id="links" stroke="{LINK}" stroke-width="1.5">')
        for (i, j), p in zip(pred.edges, pred.probs):
            if p >= threshold:
                (x1, y1), (x2, y2) = centers[i], centers[j]
                out.append(f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}"/>')
        out.append("</g>")

    if words:
        matched = set()
        if scene is not None:
            matched = {pi for pi, _ in match_rects([w.rect for w in words], true_word_rects(scene))}
        out.append('<g id="words" fill="none" stroke-width="1.5">')
        for k, w in enumerate(words):
            color = CORRECT if k in matched or scene is None else WRONG
            out.append(f'<path d="{_path(w.hull)}" stroke="{color}" stroke-opacity="0.4"/>')
            out.append(f'<path d="{_path(w.rect.corners())}" stroke="{color}"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
