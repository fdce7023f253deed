"""Planar primitives for character boxes: quads, IoU, hulls, min-area rectangles.

Coordinates are image pixels with y pointing down. A quad is a ``(4, 2)`` float
array whose corners run top-left, top-right, bottom-right, bottom-left in the
character's own frame; that order has positive shoelace area in raw (x, y)
numbers, which is what "counter-clockwise" means throughout this package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

HALF_PI = 0.5 * math.pi


class AABox(NamedTuple):
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    def overlaps(self, other: "AABox") -> bool:
        return (self.xmin <= other.xmax and other.xmin <= self.xmax
                and self.ymin <= other.ymax and other.ymin <= self.ymax)


@dataclass(frozen=True)
class OrientedRect:
    """Rectangle of size ``width`` x ``height`` rotated by ``angle`` about ``center``.

    ``width`` is measured along the direction ``(cos angle, sin angle)``.
    Rectangles produced by :func:`min_area_rect` have ``angle`` in ``[0, pi/2)``.
    """

    center: tuple[float, float]
    width: float
    height: float
    angle: float

    @property
    def area(self) -> float:
        return self.width * self.height

    def corners(self) -> np.ndarray:
        c, s = math.cos(self.angle), math.sin(self.angle)
        u = np.array([c, s]) * (0.5 * self.width)
        v = np.array([-s, c]) * (0.5 * self.height)
        ctr = np.asarray(self.center, dtype=float)
        return np.array([ctr - u - v, ctr + u - v, ctr + u + v, ctr - u + v])


def as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    return pts


def signed_area(poly) -> float:
    p = np.asarray(poly, dtype=float)
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_area(poly) -> float:
    return abs(signed_area(poly))


def make_quad(corners) -> np.ndarray:
    """Return a ``(4, 2)`` quad with positive winding, keeping corner 0 first."""
    q = as_points(corners)
    if q.shape != (4, 2):
        raise ValueError("quad must have 4 corners")
    if signed_area(q) < 0:
        q = q[[0, 3, 2, 1]]
    return q


def quad_centroid(q) -> np.ndarray:
    return np.asarray(q, dtype=float).mean(axis=0)


def envelope(poly) -> AABox:
    p = np.asarray(poly, dtype=float)
    lo, hi = p.min(axis=0), p.max(axis=0)
    return AABox(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))


def min_corner_distance(a, b) -> float:
    d = np.asarray(a, dtype=float)[:, None, :] - np.asarray(b, dtype=float)[None, :, :]
    return float(np.sqrt((d ** 2).sum(axis=-1)).min())


def _clip(subject: list, a: np.ndarray, b: np.ndarray) -> list:
    # Keep the part of `subject` left of the directed line a->b.
    out = []
    if not subject:
        return out
    ex, ey = b[0] - a[0], b[1] - a[1]

    def side(p):
        return ex * (p[1] - a[1]) - ey * (p[0] - a[0])

    prev = subject[-1]
    sp = side(prev)
    for cur in subject:
        sc = side(cur)
        if sc >= 0:
            if sp < 0:
                t = sp / (sp - sc)
                out.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
            out.append(cur)
        elif sp >= 0:
            t = sp / (sp - sc)
            out.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
        prev, sp = cur, sc
    return out


def polygon_intersection_area(a, b) -> float:
    """Area of the intersection of two convex polygons (Sutherland-Hodgman)."""
    pa = np.asarray(a, dtype=float)
    pb = np.asarray(b, dtype=float)
    if len(pa) < 3 or len(pb) < 3:
        return 0.0
    if signed_area(pa) < 0:
        pa = pa[::-1]
    if signed_area(pb) < 0:
        pb = pb[::-1]
    poly = [tuple(p) for p in pa]
    n = len(pb)
    for i in range(n):
        poly = _clip(poly, pb[i], pb[(i + 1) % n])
        if len(poly) < 3:
            return 0.0
    area = signed_area(np.array(poly))
    return min(max(area, 0.0), polygon_area(pa), polygon_area(pb))


def iou(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    # Fixed argument order makes the result exactly symmetric.
    if (len(a), tuple(a.ravel())) > (len(b), tuple(b.ravel())):
        a, b = b, a
    inter = polygon_intersection_area(a, b)
    union = polygon_area(a) + polygon_area(b) - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def convex_hull(points) -> np.ndarray:
    """Monotone-chain hull, CCW, collinear points dropped.

    A single point is returned as itself; a collinear set as its two endpoints.
    """
    pts = as_points(points)
    if len(pts) == 0:
        raise ValueError("convex_hull needs at least one point")
    pts = np.unique(pts, axis=0)  # sorted lexicographically by (x, y)
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    rows = [tuple(p) for p in pts]
    lower: list = []
    for p in rows:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(rows):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    return np.array(hull, dtype=float)


def min_area_rect(points, tie_tol: float = 1e-12) -> OrientedRect:
    """Smallest-area enclosing rectangle via rotating calipers over hull edges.

    One side of the result is collinear with a hull edge. Among equal-area
    candidates the smallest angle in ``[0, pi/2)`` wins.
    """
    hull = convex_hull(points)
    if len(hull) == 1:
        x, y = hull[0]
        return OrientedRect((float(x), float(y)), 0.0, 0.0, 0.0)

    edges = np.roll(hull, -1, axis=0) - hull
    if len(hull) == 2:
        edges = edges[:1]
    angles = np.mod(np.arctan2(edges[:, 1], edges[:, 0]), HALF_PI)
    angles[angles >= HALF_PI - 1e-12] = 0.0

    u = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    v = np.stack([-u[:, 1], u[:, 0]], axis=1)
    pu = u @ hull.T
    pv = v @ hull.T
    umin, umax = pu.min(axis=1), pu.max(axis=1)
    vmin, vmax = pv.min(axis=1), pv.max(axis=1)
    areas = (umax - umin) * (vmax - vmin)

    best = areas.min()
    tied = np.flatnonzero(areas <= best + tie_tol * max(best, 1.0))
    i = tied[np.argmin(angles[tied])]
    uc, vc = 0.5 * (umin[i] + umax[i]), 0.5 * (vmin[i] + vmax[i])
    center = uc * u[i] + vc * v[i]
    return OrientedRect((float(center[0]), float(center[1])),
                        float(umax[i] - umin[i]), float(vmax[i] - vmin[i]), float(angles[i]))


def points_in_convex(poly, pts, tol: float = 0.0) -> np.ndarray:
    """Boolean mask of ``pts`` lying inside or on the convex polygon ``poly``."""
    p = np.asarray(poly, dtype=float)
    q = np.asarray(pts, dtype=float).reshape(-1, 2)
    if signed_area(p) < 0:
        p = p[::-1]
    inside = np.ones(len(q), dtype=bool)
    for a, b in zip(p, np.roll(p, -1, axis=0)):
        e = b - a
        side = e[0] * (q[:, 1] - a[1]) - e[1] * (q[:, 0] - a[0])
        inside &= side >= -tol * max(np.hypot(*e), 1.0)
    return inside
