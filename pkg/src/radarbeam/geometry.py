"""2-D geometry primitives shared by the world model and the estimators.

Convention used everywhere in this package: the base station sits at the
origin, boresight is the +y axis, and bearings are measured in degrees,
positive clockwise, so a point (x, y) has bearing atan2(x, y).
Line orientations are slope angles against the +x axis, wrapped to
(-90, 90] degrees (a line has no direction, only an orientation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

C0 = 3.0e8  # propagation speed (m/s)

_EPS = 1e-12


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("coordinates must be finite")

    def __add__(self, other: "Point2") -> "Point2":
        return Point2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Point2") -> "Point2":
        return Point2(self.x - other.x, self.y - other.y)

    def __mul__(self, k: float) -> "Point2":
        return Point2(self.x * k, self.y * k)

    __rmul__ = __mul__

    def dot(self, other: "Point2") -> float:
        return self.x * other.x + self.y * other.y

    def cross(self, other: "Point2") -> float:
        return self.x * other.y - self.y * other.x

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def unit(self) -> "Point2":
        n = self.norm()
        if n < _EPS:
            raise ValueError("cannot normalize a zero-length vector")
        return Point2(self.x / n, self.y / n)

    def perp(self) -> "Point2":
        """90 degree counter-clockwise rotation."""
        return Point2(-self.y, self.x)

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


ORIGIN = Point2(0.0, 0.0)


def bearing_deg(p: Point2) -> float:
    """Bearing of p seen from the origin: degrees off +y, positive clockwise."""
    return math.degrees(math.atan2(p.x, p.y))


def unit_from_bearing(deg: float) -> Point2:
    r = math.radians(deg)
    return Point2(math.sin(r), math.cos(r))


def wrap_orientation_deg(phi: float) -> float:
    """Wrap a line orientation to (-90, 90]."""
    r = math.fmod(phi, 180.0)
    if r <= -90.0:
        r += 180.0
    elif r > 90.0:
        r -= 180.0
    return r


def orientation_diff_deg(a: float, b: float) -> float:
    """Smallest angle between two line orientations (mod 180)."""
    d = math.fmod(a - b, 180.0)
    if d < -90.0:
        d += 180.0
    elif d > 90.0:
        d -= 180.0
    return abs(d)


def direction_from_orientation(phi_deg: float) -> Point2:
    r = math.radians(phi_deg)
    return Point2(math.cos(r), math.sin(r))


def mirror_across_line(p: Point2, anchor: Point2, direction: Point2) -> Point2:
    """Mirror image of p across the infinite line through anchor along direction."""
    u = direction.unit()
    w = p - anchor
    along = u * w.dot(u)
    # p = anchor + along + perp_component; the mirror flips the perp component
    return anchor + along * 2.0 - w


def point_to_line_distance(p: Point2, anchor: Point2, direction: Point2) -> float:
    u = direction.unit()
    return abs((p - anchor).cross(u))


def segment_line_crossing(a: Point2, b: Point2, anchor: Point2,
                          direction: Point2) -> Point2 | None:
    """Intersection of segment a-b with the infinite line, or None.

    Endpoint touches count as crossings.
    """
    n = direction.unit().perp()
    da = (a - anchor).dot(n)
    db = (b - anchor).dot(n)
    if da == db:
        return None  # segment parallel to the line
    t = da / (da - db)
    if t < 0.0 or t > 1.0:
        return None
    return a + (b - a) * t


def specular_point(source: Point2, target: Point2, anchor: Point2,
                   direction: Point2) -> Point2 | None:
    """Image-source reflection point on the infinite line.

    Mirrors `source` across the line and intersects the mirrored-source ->
    target segment with it.  None when source and target are not on the same
    side (no specular reflection exists).
    """
    v = mirror_across_line(source, anchor, direction)
    return segment_line_crossing(v, target, anchor, direction)


# ----------------------------------------------------------------------
# segment / polygon tests (used for blocker occupancy)
# ----------------------------------------------------------------------

def _orient(a: Point2, b: Point2, c: Point2) -> float:
    return (b - a).cross(c - a)


def _on_segment(a: Point2, b: Point2, p: Point2) -> bool:
    """p assumed collinear with a-b; is it inside the bounding box?"""
    return (min(a.x, b.x) - _EPS <= p.x <= max(a.x, b.x) + _EPS and
            min(a.y, b.y) - _EPS <= p.y <= max(a.y, b.y) + _EPS)


def seg_seg_intersect(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool:
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and \
       ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        return True
    if d1 == 0 and _on_segment(q1, q2, p1):
        return True
    if d2 == 0 and _on_segment(q1, q2, p2):
        return True
    if d3 == 0 and _on_segment(p1, p2, q1):
        return True
    if d4 == 0 and _on_segment(p1, p2, q2):
        return True
    return False


def point_in_convex_polygon(p: Point2, poly: list[Point2], eps: float = 1e-9) -> bool:
    """Containment test for a convex polygon in CCW order (boundary counts)."""
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        if _orient(a, b, p) < -eps:
            return False
    return True


def ensure_ccw(poly: list[Point2]) -> list[Point2]:
    area2 = sum(poly[i].cross(poly[(i + 1) % len(poly)]) for i in range(len(poly)))
    return list(poly) if area2 >= 0 else list(reversed(poly))


def segment_intersects_polygon(a: Point2, b: Point2, poly: list[Point2]) -> bool:
    poly = ensure_ccw(poly)
    if point_in_convex_polygon(a, poly) or point_in_convex_polygon(b, poly):
        return True
    n = len(poly)
    return any(seg_seg_intersect(a, b, poly[i], poly[(i + 1) % n]) for i in range(n))


def convex_hull(points: list[Point2]) -> list[Point2]:
    """Monotone-chain hull, CCW order."""
    pts = sorted(set(p.as_tuple() for p in points))
    if len(pts) <= 2:
        return [Point2(*p) for p in pts]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return [Point2(*p) for p in lower[:-1] + upper[:-1]]


def ray_convex_interval(p0: Point2, v: Point2,
                        poly: list[Point2]) -> tuple[float, float] | None:
    """Parameter interval [s_in, s_out] where p0 + s*v lies inside the CCW
    convex polygon, unrestricted in sign.  None when the line misses it."""
    lo, hi = -math.inf, math.inf
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        nrm = (b - a).perp()  # inward normal for CCW order
        num = nrm.dot(p0 - a)
        den = nrm.dot(v)
        if abs(den) < _EPS:
            if num < 0:
                return None
            continue
        s = -num / den
        if den > 0:
            lo = max(lo, s)
        else:
            hi = min(hi, s)
        if lo > hi:
            return None
    if lo > hi:
        return None
    return lo, hi
