"""Gaussian character heatmaps warped onto character quads.

Heatmaps are plain ``(height, width)`` float arrays with values in ``[0, 1]``.
"""

from __future__ import annotations

import numpy as np

from .geometry import as_points, envelope

DEFAULT_WINDOW = 50
DEFAULT_SIGMA = 18.5


def gaussian_value(x, y, size: int = DEFAULT_WINDOW, sigma: float = DEFAULT_SIGMA):
    """Isotropic Gaussian of unit peak centred at ``((size-1)/2, (size-1)/2)``."""
    c = 0.5 * (size - 1)
    return np.exp(-((np.asarray(x) - c) ** 2 + (np.asarray(y) - c) ** 2) / (2.0 * sigma ** 2))


def gaussian_window(size: int = DEFAULT_WINDOW, sigma: float = DEFAULT_SIGMA) -> np.ndarray:
    if size <= 0 or sigma <= 0:
        raise ValueError("size and sigma must be positive")
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    return gaussian_value(xx, yy, size, sigma)


def _collinear(p, q, r, tol=1e-12) -> bool:
    cross = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    scale = max(np.ptp(np.array([p, q, r]), axis=0).max(), 1.0)
    return abs(cross) <= tol * scale * scale


def homography_from_quads(src, dst) -> np.ndarray:
    """3x3 projective map sending each ``src`` corner to its ``dst`` corner.

    Solved as the 8x8 direct linear transform with ``h[2, 2] = 1`` on
    similarity-normalized corners, which keeps the system well conditioned
    at pixel-scale coordinates.
    """
    s = as_points(src)
    d = as_points(dst)
    if s.shape != (4, 2) or d.shape != (4, 2):
        raise ValueError("homography needs exactly 4 correspondences")
    for quad in (s, d):
        for i in range(4):
            if _collinear(*(quad[j] for j in range(4) if j != i)):
                raise ValueError("degenerate correspondence: three collinear corners")

    ts, td = _normalizer(s), _normalizer(d)
    a = np.zeros((8, 8))
    rhs = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(apply_homography(ts, s), apply_homography(td, d))):
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        rhs[2 * i], rhs[2 * i + 1] = u, v
    try:
        h = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise ValueError("degenerate correspondence: singular system") from exc
    h = np.linalg.solve(td, np.append(h, 1.0).reshape(3, 3) @ ts)
    return h / h[2, 2]


def _normalizer(pts) -> np.ndarray:
    """Similarity moving the centroid to 0 with mean distance sqrt(2)."""
    c = pts.mean(axis=0)
    scale = np.sqrt(2.0) / max(np.linalg.norm(pts - c, axis=1).mean(), 1e-300)
    return np.array([[scale, 0, -scale * c[0]], [0, scale, -scale * c[1]], [0, 0, 1.0]])


def apply_homography(h, points) -> np.ndarray:
    pts = as_points(points)
    hom = np.hstack([pts, np.ones((len(pts), 1))]) @ np.asarray(h, dtype=float).T
    return hom[:, :2] / hom[:, 2:3]


def window_quad(size: int) -> np.ndarray:
    s = float(size - 1)
    return np.array([[0.0, 0.0], [s, 0.0], [s, s], [0.0, s]])


def _bilinear(img: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    h, w = img.shape
    u0 = np.clip(np.floor(u).astype(int), 0, max(w - 2, 0))
    v0 = np.clip(np.floor(v).astype(int), 0, max(h - 2, 0))
    u1 = np.minimum(u0 + 1, w - 1)
    v1 = np.minimum(v0 + 1, h - 1)
    fu = u - u0
    fv = v - v0
    top = img[v0, u0] * (1 - fu) + img[v0, u1] * fu
    bot = img[v1, u0] * (1 - fu) + img[v1, u1] * fu
    return top * (1 - fv) + bot * fv


def warp_gaussian(window: np.ndarray, h, target_w: int, target_h: int) -> np.ndarray:
    """Warp ``window`` into a ``target_h x target_w`` map by inverse bilinear sampling.

    ``h`` maps window pixel coordinates to target pixel coordinates. Target
    pixels whose preimage falls outside the window stay 0.
    """
    out = np.zeros((target_h, target_w))
    size_h, size_w = window.shape
    corners = apply_homography(h, np.array([[0, 0], [size_w - 1, 0],
                                            [size_w - 1, size_h - 1], [0, size_h - 1]], float))
    box = envelope(corners)
    x0, y0 = max(int(np.floor(box.xmin)), 0), max(int(np.floor(box.ymin)), 0)
    x1, y1 = min(int(np.ceil(box.xmax)), target_w - 1), min(int(np.ceil(box.ymax)), target_h - 1)
    if x0 > x1 or y0 > y1:
        return out

    yy, xx = np.mgrid[y0:y1 + 1, x0:x1 + 1].astype(float)
    hinv = np.linalg.inv(np.asarray(h, dtype=float))
    hom = np.stack([xx.ravel(), yy.ravel(), np.ones(xx.size)], axis=1) @ hinv.T
    w = hom[:, 2]
    ok = np.abs(w) > 1e-15
    u = np.where(ok, hom[:, 0] / np.where(ok, w, 1.0), -1.0)
    v = np.where(ok, hom[:, 1] / np.where(ok, w, 1.0), -1.0)
    # Snap round-off so grid points of an identity warp land exactly.
    u = np.where(np.abs(u - np.round(u)) < 1e-9, np.round(u), u)
    v = np.where(np.abs(v - np.round(v)) < 1e-9, np.round(v), v)
    inside = ok & (u >= 0) & (u <= size_w - 1) & (v >= 0) & (v <= size_h - 1)
    vals = np.zeros(u.shape)
    vals[inside] = _bilinear(window, u[inside], v[inside])
    out[y0:y1 + 1, x0:x1 + 1] = np.clip(vals, 0.0, 1.0).reshape(xx.shape)
    return out


def char_heatmap(quad, image_w: int, image_h: int, size: int = DEFAULT_WINDOW,
                 sigma: float = DEFAULT_SIGMA, window: np.ndarray | None = None) -> np.ndarray:
    if window is None:
        window = gaussian_window(size, sigma)
    h = homography_from_quads(window_quad(window.shape[0]), quad)
    return warp_gaussian(window, h, image_w, image_h)


def render_scene_heatmap(scene, size: int = DEFAULT_WINDOW, sigma: float = DEFAULT_SIGMA) -> np.ndarray:
    """Ground-truth map for a scene: per-character warps combined by pixelwise max."""
    out = np.zeros((scene.image_height, scene.image_width))
    window = gaussian_window(size, sigma)
    for word in scene.words:
        for quad in word.chars:
            np.maximum(out, char_heatmap(quad, scene.image_width, scene.image_height,
                                         window=window), out=out)
    return out


def mse_loss(pred, target) -> float:
    """Summed squared pixel error (a sum over pixels, not a mean)."""
    p = np.asarray(pred, dtype=float)
    t = np.asarray(target, dtype=float)
    if p.shape != t.shape:
        raise ValueError(f"heatmap shapes differ: {p.shape} vs {t.shape}")
    return float(((p - t) ** 2).sum())


def write_pgm(heatmap, path) -> None:
    """Write an 8-bit binary PGM, values scaled by 255 and rounded half up."""
    m = np.asarray(heatmap, dtype=float)
    pixels = np.floor(np.clip(m, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (m.shape[1], m.shape[0]))
        fh.write(pixels.tobytes())
