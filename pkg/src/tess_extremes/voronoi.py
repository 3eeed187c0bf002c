"""Voronoi cells as the Delaunay dual, and per-site functionals.

The 2D cell polygon of an interior site is the circumcenter cycle of its
incident Delaunay triangles; Voronoi adjacency equals Delaunay adjacency.
The inradius is half the nearest-neighbor distance and therefore needs no
triangulation, which keeps it available in dimensions 1 to 3.

The flower of a site is the union of the balls centered on its cell that
pass through the site; on a convex polygon that union is attained on the
vertex balls, and its volume is estimated by Monte Carlo rejection.  A
quadratic-time half-plane-intersection construction of single cells ships
here as the independent oracle for the dual construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .delaunay import Triangulation, triangulate
from .geom import ConvexPolygon
from .pointprocess import PointSample, Region, derive_seed, sample_poisson


class UnboundedCellError(ValueError):
    """Raised in strict mode when a hull site has no bounded cell."""


class PrecisionError(ValueError):
    """Raised when a Monte Carlo budget cannot meet the requested precision."""


@dataclass
class VoronoiCellRecord:
    """One Voronoi cell: site, polygon and functional values."""

    site_index: int
    site: np.ndarray
    polygon: ConvexPolygon | None
    inradius: float
    farthest_neighbor: float
    flower_volume: float
    flower_stderr: float
    neighbor_count: int
    bounded: bool


# ---------------------------------------------------------------------------
# Nearest-neighbor functionals (dimension-agnostic)
# ---------------------------------------------------------------------------


def nearest_neighbor_distances(points: np.ndarray, query_idx=None, workers: int = 1):
    """Distance from each (queried) point to its nearest other point."""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if len(points) < 2:
        raise ValueError("need at least two sites")
    tree = cKDTree(points)
    q = points if query_idx is None else points[query_idx]
    dist, _ = tree.query(q, k=2, workers=workers)
    return dist[:, 1]


def inradius(sample: PointSample | np.ndarray, site: int) -> float:
    """Inradius of the cell of one site: half the nearest-neighbor distance."""
    points = sample.points if isinstance(sample, PointSample) else np.asarray(sample)
    return float(nearest_neighbor_distances(points, query_idx=[site])[0]) / 2.0


def inradius_all(points: np.ndarray, query_idx=None, workers: int = 1) -> np.ndarray:
    return nearest_neighbor_distances(points, query_idx=query_idx, workers=workers) / 2.0


# ---------------------------------------------------------------------------
# Dual-graph functionals (2D)
# ---------------------------------------------------------------------------


def neighbor_count(t: Triangulation, site: int) -> int:
    indptr, _ = t.neighbor_lists
    return int(indptr[site + 1] - indptr[site])


def farthest_neighbor_distance(t: Triangulation, site: int) -> float:
    """Largest distance from the site to its Delaunay-adjacent sites.

    Only well defined for bounded cells; hull sites are rejected.
    """
    if t.is_hull_site(site):
        raise UnboundedCellError(f"site {site} lies on the hull")
    indptr, indices = t.neighbor_lists
    nbrs = indices[indptr[site]:indptr[site + 1]]
    return float(np.max(np.linalg.norm(t.points[nbrs] - t.points[site], axis=1)))


def neighbor_functionals(t: Triangulation):
    """Vectorized per-site (neighbor count, farthest distance, half min distance)."""
    indptr, indices = t.neighbor_lists
    src = np.repeat(np.arange(t.n_sites), np.diff(indptr))
    d = np.linalg.norm(t.points[indices] - t.points[src], axis=1)
    counts = np.diff(indptr)
    farthest = np.full(t.n_sites, np.nan)
    nearest = np.full(t.n_sites, np.nan)
    nonempty = counts > 0
    starts = indptr[:-1][nonempty]
    farthest[nonempty] = np.maximum.reduceat(d, starts)
    nearest[nonempty] = np.minimum.reduceat(d, starts)
    return counts, farthest, nearest / 2.0


def site_vertex_radii(t: Triangulation) -> np.ndarray:
    """Max distance from each site to its cell vertices.

    Cell vertices are circumcenters of incident triangles, whose distance to
    the site equals the circumradius, so this is the max incident
    circumradius.  It lower-bounds the flower volume via the disk it spans.
    """
    indptr, tri_ids = t.site_triangles
    out = np.zeros(t.n_sites)
    counts = np.diff(indptr)
    nonempty = counts > 0
    out[nonempty] = np.maximum.reduceat(t.circumradii[tri_ids], indptr[:-1][nonempty])
    return out


def voronoi_cell(t: Triangulation, site: int, strict: bool = False) -> ConvexPolygon | None:
    """Cell polygon of a site: incident circumcenters in rotational order.

    Returns None for hull sites (unbounded cells), or raises
    UnboundedCellError in strict mode.
    """
    if t.is_hull_site(site):
        if strict:
            raise UnboundedCellError(f"site {site} lies on the hull")
        return None
    tris = t.incident_triangles(site)
    centers = t.circumcenters[tris]
    rel = centers - t.points[site]
    order = np.argsort(np.arctan2(rel[:, 1], rel[:, 0]))
    verts = centers[order]
    verts = _dedupe_ring(verts)
    return ConvexPolygon(vertices=verts)


def _dedupe_ring(verts: np.ndarray, rel_tol: float = 1e-9) -> np.ndarray:
    scale = 1.0 + np.abs(verts).max()
    keep = [0]
    for i in range(1, len(verts)):
        if np.linalg.norm(verts[i] - verts[keep[-1]]) > rel_tol * scale:
            keep.append(i)
    if len(keep) > 1 and np.linalg.norm(verts[keep[-1]] - verts[keep[0]]) <= rel_tol * scale:
        keep.pop()
    return verts[keep]


def interior_site_mask(t: Triangulation, window: Region, shrink: float) -> np.ndarray:
    """Sites in the window whose cell geometry is provably unaffected by padding.

    Keeps sites inside the unpadded window, off the hull, with all incident
    circumcenters at distance more than ``shrink`` from the simulation
    boundary.  Cells failing the last test are treated as unbounded.
    """
    lo, hi = window.sim_bounds()
    indptr, tri_ids = t.site_triangles
    counts = np.diff(indptr)
    cx = t.circumcenters[tri_ids, 0]
    cy = t.circumcenters[tri_ids, 1]
    ok = np.zeros(t.n_sites, dtype=bool)
    nonempty = counts > 0
    starts = indptr[:-1][nonempty]
    min_x = np.minimum.reduceat(cx, starts)
    max_x = np.maximum.reduceat(cx, starts)
    min_y = np.minimum.reduceat(cy, starts)
    max_y = np.maximum.reduceat(cy, starts)
    ok[nonempty] = (
        (min_x > lo[0] + shrink)
        & (max_x < hi[0] - shrink)
        & (min_y > lo[1] + shrink)
        & (max_y < hi[1] - shrink)
    )
    ok[t.hull_sites] = False
    ok &= window.contains(t.points)
    return ok


# ---------------------------------------------------------------------------
# Flower volume
# ---------------------------------------------------------------------------


def flower_volume(cell, site, mc_points: int = 20_000, seed: int = 0):
    """Monte Carlo area of the union of cell-vertex balls through the site.

    Uniform rejection over the bounding box of the union; returns
    (estimate, standard error).  Budgets below 1000 points are refused.
    """
    if mc_points < 1000:
        raise PrecisionError("mc_points must be at least 1000")
    verts = cell.vertices if isinstance(cell, ConvexPolygon) else np.asarray(cell, dtype=float)
    site = np.asarray(site, dtype=float)
    radii = np.linalg.norm(verts - site, axis=1)
    lo = (verts - radii[:, None]).min(axis=0)
    hi = (verts + radii[:, None]).max(axis=0)
    box_area = float(np.prod(hi - lo))
    rng = np.random.default_rng(seed)
    pts = lo + rng.random((mc_points, 2)) * (hi - lo)
    d2 = ((pts[:, None, :] - verts[None, :, :]) ** 2).sum(axis=2)
    hit = np.any(d2 <= radii[None, :] ** 2, axis=1)
    p = float(np.count_nonzero(hit)) / mc_points
    return box_area * p, box_area * math.sqrt(max(p * (1.0 - p), 0.0) / mc_points)


def flower_contains(y, verts: np.ndarray, site) -> np.ndarray:
    """Membership of probe points in the union of cell-vertex balls."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    site = np.asarray(site, dtype=float)
    radii2 = ((verts - site) ** 2).sum(axis=1)
    d2 = ((y[:, None, :] - verts[None, :, :]) ** 2).sum(axis=2)
    return np.any(d2 <= radii2[None, :], axis=1)


# ---------------------------------------------------------------------------
# Quadratic-time half-plane oracle
# ---------------------------------------------------------------------------


def halfplane_cell(points: np.ndarray, site: int, box_halfwidth: float = 1e6):
    """Cell of one site by clipping a huge box with all bisector half-planes.

    Independent of the dual construction; O(n) half-planes each applied to
    the running polygon.  Returns (vertices, bounded, contributing) where
    ``contributing`` lists the site indices whose bisector supports an edge
    of the final polygon (the Voronoi neighbors when the cell is bounded).
    """
    points = np.asarray(points, dtype=float)
    x = points[site]
    h = box_halfwidth
    poly = [
        x + np.array([-h, -h]),
        x + np.array([h, -h]),
        x + np.array([h, h]),
        x + np.array([-h, h]),
    ]
    for j in range(len(points)):
        if j == site:
            continue
        normal = points[j] - x
        offset = float(normal @ (x + points[j])) / 2.0
        poly = _clip(poly, normal, offset)
        if len(poly) < 3:
            return np.empty((0, 2)), False, np.array([], dtype=int)
    verts = np.asarray(poly)
    bounded = bool(np.all(np.abs(verts - x) < 0.99 * h))
    mids = (verts + np.roll(verts, -1, axis=0)) / 2.0
    contributing = []
    for j in range(len(points)):
        if j == site:
            continue
        dx = np.linalg.norm(mids - x, axis=1)
        dj = np.linalg.norm(mids - points[j], axis=1)
        if np.any(np.abs(dx - dj) < 1e-9 * (1.0 + dx)):
            contributing.append(j)
    return verts, bounded, np.asarray(contributing, dtype=int)


def _clip(poly, normal, offset):
    """Keep the side normal . y <= offset of the polygon (Sutherland-Hodgman)."""
    out = []
    n = len(poly)
    for i in range(n):
        cur, nxt = poly[i], poly[(i + 1) % n]
        cur_in = float(normal @ cur) <= offset
        nxt_in = float(normal @ nxt) <= offset
        if cur_in:
            out.append(cur)
        if cur_in != nxt_in:
            denom = float(normal @ (nxt - cur))
            s = (offset - float(normal @ cur)) / denom
            out.append(cur + s * (nxt - cur))
    return out


def origin_cell_is_bounded_simplex(others: np.ndarray) -> bool:
    """Whether the cell of the origin among ``others`` + origin is a bounded
    polygon with exactly len(others) faces."""
    others = np.asarray(others, dtype=float)
    pts = np.vstack([others, [[0.0, 0.0]]])
    verts, bounded, contributing = halfplane_cell(pts, site=len(others))
    return bounded and len(contributing) == len(others)


# ---------------------------------------------------------------------------
# Neighbor-count distribution
# ---------------------------------------------------------------------------


def estimate_neighbor_pmf(n_cells_target: int = 1_000_000, seed: int = 0,
                          rho: float = 100_000.0, margin: float | None = None):
    """Empirical neighbor-count distribution of interior Poisson-Voronoi cells.

    Simulates unit-intensity windows of volume ``rho`` until at least
    ``n_cells_target`` interior cells have been collected.  Returns
    (pmf dict, number of cells).
    """
    if margin is None:
        margin = 4.0 * math.sqrt(2.0 / math.pi * math.log(rho))
    counts: dict[int, int] = {}
    n_cells = 0
    rep = 0
    while n_cells < n_cells_target:
        s = sample_poisson(Region.square(math.sqrt(rho), padding=margin), 1.0,
                           derive_seed(seed, rep))
        t = triangulate(s)
        mask = interior_site_mask(t, s.region, shrink=margin / 2.0)
        nc = np.diff(t.neighbor_lists[0])[mask]
        for k, c in zip(*np.unique(nc, return_counts=True)):
            counts[int(k)] = counts.get(int(k), 0) + int(c)
        n_cells += int(mask.sum())
        rep += 1
    pmf = {k: c / n_cells for k, c in sorted(counts.items())}
    return pmf, n_cells


def voronoi_cell_record(t: Triangulation, site: int, mc_points: int = 20_000,
                        seed: int = 0) -> VoronoiCellRecord:
    """Assemble the full per-cell record for one site."""
    bounded = not t.is_hull_site(site)
    poly = voronoi_cell(t, site) if bounded else None
    counts = neighbor_count(t, site)
    if bounded:
        d = farthest_neighbor_distance(t, site)
        fl, fe = flower_volume(poly, t.points[site], mc_points=mc_points, seed=seed)
    else:
        d, fl, fe = math.nan, math.nan, math.nan
    indptr, indices = t.neighbor_lists
    nbrs = indices[indptr[site]:indptr[site + 1]]
    r = float(np.min(np.linalg.norm(t.points[nbrs] - t.points[site], axis=1))) / 2.0
    return VoronoiCellRecord(
        site_index=site, site=t.points[site], polygon=poly, inradius=r,
        farthest_neighbor=d, flower_volume=fl, flower_stderr=fe,
        neighbor_count=int(counts), bounded=bounded,
    )
