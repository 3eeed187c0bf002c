"""Planar geometric primitives.

Orientation and in-circle predicates, circumcircles, triangle and convex
polygon areas, and exact two-disk union/intersection areas.  Everything here
is a pure function of its arguments; batch variants operate on numpy arrays.

Predicates use double precision with a relative epsilon band instead of exact
arithmetic: inputs are continuous random samples, so true degeneracies have
probability zero and residual numerical ties are handled upstream by
re-jittering the offending sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Relative epsilon for sign decisions in the predicates.
PREDICATE_EPS = 1e-12
# Below this relative gap to tangency, two disks are treated as just touching.
TANGENCY_EPS = 1e-12


class DegenerateTriangleError(ValueError):
    """Raised when three points required to span a triangle are collinear."""


class InvalidPolygonError(ValueError):
    """Raised when a vertex list does not describe a strictly convex polygon."""


class HypothesisViolationError(ValueError):
    """Raised when a caller-supplied configuration violates a precondition."""


@dataclass(frozen=True)
class Circle:
    """A disk given by center and nonnegative radius."""

    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not (self.radius >= 0.0 and math.isfinite(self.radius)):
            raise ValueError(f"radius must be finite and >= 0, got {self.radius}")

    @property
    def area(self) -> float:
        return math.pi * self.radius**2


@dataclass(frozen=True)
class ConvexPolygon:
    """A strictly convex polygon, vertices in counterclockwise order."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise InvalidPolygonError("need an (n, 2) array with n >= 3 vertices")
        if not np.all(np.isfinite(v)):
            raise InvalidPolygonError("vertices must be finite")
        n = v.shape[0]
        for i in range(n):
            if orient2d(v[i], v[(i + 1) % n], v[(i + 2) % n]) <= 0:
                raise InvalidPolygonError(
                    "vertices must be strictly convex and counterclockwise"
                )
        object.__setattr__(self, "vertices", v)

    @property
    def area(self) -> float:
        return convex_polygon_area(self)


def orient2d(a, b, c) -> int:
    """Sign of twice the signed area of triangle (a, b, c).

    Returns +1 for a counterclockwise turn, -1 for clockwise, 0 when the
    determinant is within the epsilon band of zero (collinear).
    """
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    cx, cy = float(c[0]), float(c[1])
    detleft = (ax - cx) * (by - cy)
    detright = (ay - cy) * (bx - cx)
    det = detleft - detright
    if abs(det) <= PREDICATE_EPS * (abs(detleft) + abs(detright)):
        return 0
    return 1 if det > 0 else -1


def incircle(a, b, c, d) -> int:
    """In-circle predicate for the circle through (a, b, c).

    For (a, b, c) in strictly counterclockwise order, returns +1 when d lies
    strictly inside their circumcircle, -1 strictly outside and 0 when the
    four points are cocircular within tolerance.  Swapping two of a, b, c
    (clockwise input) flips the sign.
    """
    if orient2d(a, b, c) == 0:
        raise DegenerateTriangleError("incircle needs a non-degenerate triangle")
    adx = float(a[0]) - float(d[0])
    ady = float(a[1]) - float(d[1])
    bdx = float(b[0]) - float(d[0])
    bdy = float(b[1]) - float(d[1])
    cdx = float(c[0]) - float(d[0])
    cdy = float(c[1]) - float(d[1])
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    t1 = alift * (bdx * cdy - cdx * bdy)
    t2 = blift * (cdx * ady - adx * cdy)
    t3 = clift * (adx * bdy - bdx * ady)
    det = t1 + t2 + t3
    if abs(det) <= PREDICATE_EPS * (abs(t1) + abs(t2) + abs(t3)):
        return 0
    return 1 if det > 0 else -1


def circumcircle(a, b, c) -> Circle:
    """Circle through three non-collinear points."""
    centers, radii = circumcircles_batch(
        np.asarray([a], dtype=float),
        np.asarray([b], dtype=float),
        np.asarray([c], dtype=float),
    )
    if not np.isfinite(radii[0]):
        raise DegenerateTriangleError("collinear points have no circumcircle")
    return Circle(center=(float(centers[0, 0]), float(centers[0, 1])), radius=float(radii[0]))


def circumcircles_batch(a: np.ndarray, b: np.ndarray, c: np.ndarray):
    """Circumcenters and circumradii for stacked triangles.

    Parameters are (n, 2) arrays of corresponding vertices.  Collinear rows
    yield inf radius and nan center instead of raising, so that callers can
    filter degenerate rows vectorially.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    ab = b - a
    ac = c - a
    d = 2.0 * (ab[:, 0] * ac[:, 1] - ab[:, 1] * ac[:, 0])
    ab2 = ab[:, 0] ** 2 + ab[:, 1] ** 2
    ac2 = ac[:, 0] ** 2 + ac[:, 1] ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        ux = (ac[:, 1] * ab2 - ab[:, 1] * ac2) / d
        uy = (ab[:, 0] * ac2 - ac[:, 0] * ab2) / d
    centers = a + np.stack([ux, uy], axis=1)
    radii = np.hypot(ux, uy)
    radii = np.where(d == 0.0, np.inf, radii)
    return centers, radii


def triangle_area(a, b, c) -> float:
    """Unsigned area of triangle (a, b, c); zero for collinear points."""
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    cx, cy = float(c[0]), float(c[1])
    return abs((bx - ax) * (cy - ay) - (by - ay) * (cx - ax)) / 2.0


def triangle_areas_batch(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (
        c[:, 0] - a[:, 0]
    )
    return np.abs(cross) / 2.0


def convex_polygon_area(p: ConvexPolygon | np.ndarray) -> float:
    """Shoelace area of a convex polygon (vertices in order)."""
    v = p.vertices if isinstance(p, ConvexPolygon) else np.asarray(p, dtype=float)
    if v.ndim != 2 or v.shape[0] < 3:
        raise InvalidPolygonError("need at least 3 vertices")
    x, y = v[:, 0], v[:, 1]
    return abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))) / 2.0


def two_disk_intersection_area(c1: Circle, c2: Circle) -> float:
    """Exact area of the intersection of two disks (circular lens formula)."""
    r1, r2 = c1.radius, c2.radius
    d = math.hypot(c1.center[0] - c2.center[0], c1.center[1] - c2.center[1])
    if r1 == 0.0 or r2 == 0.0:
        return 0.0
    if d >= r1 + r2 - TANGENCY_EPS * (r1 + r2 + d):
        return 0.0
    if d <= abs(r1 - r2):
        r = min(r1, r2)
        return math.pi * r * r
    # Clamp the acos arguments: roundoff can push them a hair outside [-1, 1].
    a1 = (d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)
    a2 = (d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)
    a1 = min(1.0, max(-1.0, a1))
    a2 = min(1.0, max(-1.0, a2))
    term = (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)
    return (
        r1 * r1 * math.acos(a1)
        + r2 * r2 * math.acos(a2)
        - 0.5 * math.sqrt(max(term, 0.0))
    )


def two_disk_union_area(c1: Circle, c2: Circle) -> float:
    """Exact area of the union of two disks."""
    return c1.area + c2.area - two_disk_intersection_area(c1, c2)


def two_triangle_union_bound_check(t1, t2, slack: float = 1e-9) -> bool:
    """Check the circumdisk-union lower bound for two admissible triangles.

    Preconditions (raise HypothesisViolationError otherwise): no vertex of
    either triangle lies strictly inside the other's circumdisk, and the
    circumradius of ``t1`` is at least that of ``t2``.  Returns whether

        area(B1 union B2) >= (pi/2 - 1) R1^2 + area(t1) + area(t2) - slack

    where B1, B2 are the circumdisks and R1 the larger circumradius.
    """
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    b1 = circumcircle(t1[0], t1[1], t1[2])
    b2 = circumcircle(t2[0], t2[1], t2[2])
    if b1.radius < b2.radius:
        raise HypothesisViolationError("t1 must have the larger circumradius")
    # vertices on the other disk's boundary are admissible (adjacent cells
    # share vertices), but the two circumdisks themselves must be distinct:
    # the bound genuinely fails for triangles inscribed in one common circle
    scale = 1e-12 * (1.0 + b1.radius)
    if (
        math.hypot(b1.center[0] - b2.center[0], b1.center[1] - b2.center[1]) <= scale
        and abs(b1.radius - b2.radius) <= scale
    ):
        raise HypothesisViolationError("circumdisks coincide")
    for p in t2:
        if _strictly_inside(p, b1):
            raise HypothesisViolationError("vertex of t2 inside circumdisk of t1")
    for p in t1:
        if _strictly_inside(p, b2):
            raise HypothesisViolationError("vertex of t1 inside circumdisk of t2")
    union = two_disk_union_area(b1, b2)
    bound = (
        (math.pi / 2.0 - 1.0) * b1.radius**2
        + triangle_area(*t1)
        + triangle_area(*t2)
    )
    return union >= bound - slack


def _strictly_inside(p, circle: Circle, rel_eps: float = 1e-12) -> bool:
    dx = float(p[0]) - circle.center[0]
    dy = float(p[1]) - circle.center[1]
    return math.hypot(dx, dy) < circle.radius * (1.0 - rel_eps)
