"""Shared plan-view geometry: poses, polygons, point tests.

Everything here works in meters in a right-handed x/y frame. Angles are
radians, normalized to [-pi, pi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

_EPS = 1e-9


def wrap_angle(theta: float) -> float:
    """Normalize an angle to the interval [-pi, pi)."""
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped < 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


@dataclass(frozen=True)
class Pose2D:
    """A planar rigid pose. Elevation is carried separately by callers."""

    x: float
    y: float
    theta: float = 0.0

    def compose(self, local: "Pose2D") -> "Pose2D":
        """World pose of `local` expressed relative to `self`."""
        c = math.cos(self.theta)
        s = math.sin(self.theta)
        return Pose2D(
            self.x + c * local.x - s * local.y,
            self.y + s * local.x + c * local.y,
            wrap_angle(self.theta + local.theta),
        )

    def apply(self, x: float, y: float) -> tuple[float, float]:
        c = math.cos(self.theta)
        s = math.sin(self.theta)
        return (self.x + c * x - s * y, self.y + s * x + c * y)


class DegeneratePolygon(ValueError):
    """Fewer than three distinct vertices, or zero enclosed area."""


def signed_area(vertices: Sequence[tuple[float, float]]) -> float:
    """Shoelace signed area; positive for counterclockwise rings."""
    total = 0.0
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        total += x1 * y2 - x2 * y1
    return 0.5 * total


@dataclass(frozen=True)
class Polygon2D:
    """A simple closed ring, stored counterclockwise without a repeated
    closing vertex. Use Polygon2D.make() so normalization always runs."""

    vertices: tuple[tuple[float, float], ...]

    @staticmethod
    def make(points: Iterable[tuple[float, float]]) -> "Polygon2D":
        verts: list[tuple[float, float]] = []
        for x, y in points:
            pt = (float(x), float(y))
            if verts and abs(pt[0] - verts[-1][0]) <= _EPS and abs(pt[1] - verts[-1][1]) <= _EPS:
                continue
            verts.append(pt)
        # drop a repeated closing vertex
        if len(verts) > 1 and abs(verts[0][0] - verts[-1][0]) <= _EPS and abs(verts[0][1] - verts[-1][1]) <= _EPS:
            verts.pop()
        if len(verts) < 3:
            raise DegeneratePolygon("need at least 3 distinct vertices, got %d" % len(verts))
        area = signed_area(verts)
        if abs(area) <= _EPS:
            raise DegeneratePolygon("zero-area ring")
        if area < 0.0:
            verts.reverse()
        return Polygon2D(tuple(verts))

    @property
    def area(self) -> float:
        return signed_area(self.vertices)

    @property
    def centroid(self) -> tuple[float, float]:
        """Area centroid of the ring."""
        a = 0.0
        cx = 0.0
        cy = 0.0
        n = len(self.vertices)
        for i in range(n):
            x1, y1 = self.vertices[i]
            x2, y2 = self.vertices[(i + 1) % n]
            cross = x1 * y2 - x2 * y1
            a += cross
            cx += (x1 + x2) * cross
            cy += (y1 + y2) * cross
        a *= 0.5
        return (cx / (6.0 * a), cy / (6.0 * a))

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        xs = [v[0] for v in self.vertices]
        ys = [v[1] for v in self.vertices]
        return (min(xs), min(ys), max(xs), max(ys))

    def contains(self, x: float, y: float) -> bool:
        """Even-odd membership. The exact crossing expression here is the
        one the rasterizer reproduces row-wise; keep them in sync."""
        inside = False
        n = len(self.vertices)
        for i in range(n):
            x1, y1 = self.vertices[i]
            x2, y2 = self.vertices[(i + 1) % n]
            if (y1 > y) != (y2 > y):
                x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
                if x < x_cross:
                    inside = not inside
        return inside

    def on_boundary(self, x: float, y: float, eps: float = _EPS) -> bool:
        n = len(self.vertices)
        for i in range(n):
            x1, y1 = self.vertices[i]
            x2, y2 = self.vertices[(i + 1) % n]
            if _point_on_segment(x, y, x1, y1, x2, y2, eps):
                return True
        return False

    def contains_or_boundary(self, x: float, y: float, eps: float = _EPS) -> bool:
        return self.on_boundary(x, y, eps) or self.contains(x, y)

    def transformed(self, pose: Pose2D) -> "Polygon2D":
        return Polygon2D.make(pose.apply(x, y) for x, y in self.vertices)

    def is_simple(self) -> bool:
        """True when no two non-adjacent edges intersect."""
        n = len(self.vertices)
        edges = [(self.vertices[i], self.vertices[(i + 1) % n]) for i in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                if j == i or (j + 1) % n == i or (i + 1) % n == j:
                    continue
                if _segments_cross(edges[i], edges[j]):
                    return False
        return True


def _point_on_segment(px: float, py: float, x1: float, y1: float,
                      x2: float, y2: float, eps: float) -> bool:
    dx = x2 - x1
    dy = y2 - y1
    length_sq = dx * dx + dy * dy
    if length_sq <= eps * eps:
        return abs(px - x1) <= eps and abs(py - y1) <= eps
    t = ((px - x1) * dx + (py - y1) * dy) / length_sq
    t = min(1.0, max(0.0, t))
    qx = x1 + t * dx
    qy = y1 + t * dy
    return math.hypot(px - qx, py - qy) <= eps


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _segments_cross(e1, e2) -> bool:
    (a, b), (c, d) = e1, e2
    d1 = _orient(*a, *b, *c)
    d2 = _orient(*a, *b, *d)
    d3 = _orient(*c, *d, *a)
    d4 = _orient(*c, *d, *b)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return True
    return False


def distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])
