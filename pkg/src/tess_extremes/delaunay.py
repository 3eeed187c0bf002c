"""Planar Delaunay triangulation and per-cell functionals.

The triangulation itself is delegated to Qhull (scipy.spatial.Delaunay),
which is robust and fast at the point counts the experiments need; the
empty-circumdisk property is audited against the quadratic-time in-circle
oracle in the test suite.  A direct local search for small-circumradius
cells is also provided: cells below a small radius bound can be enumerated
from close point triples without triangulating, which makes the
minimum-circumradius experiments cheap at large volumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import Delaunay as _SciDelaunay
from scipy.spatial import cKDTree, ConvexHull, QhullError

from .geom import circumcircles_batch, incircle, triangle_areas_batch
from .pointprocess import PointSample, Region


class DegenerateInputError(ValueError):
    """Raised when the sites do not span the plane."""


@dataclass
class Triangulation:
    """Delaunay triangulation of a point sample with derived cell data."""

    sample: PointSample
    points: np.ndarray = field(repr=False)
    simplices: np.ndarray = field(repr=False)       # (m, 3) vertex indices
    tri_neighbors: np.ndarray = field(repr=False)   # (m, 3) adjacent triangle ids, -1 at hull
    circumcenters: np.ndarray = field(repr=False)   # (m, 2)
    circumradii: np.ndarray = field(repr=False)     # (m,)
    areas: np.ndarray = field(repr=False)           # (m,)
    hull_sites: np.ndarray = field(repr=False)      # sorted indices of hull vertices
    _scipy: _SciDelaunay = field(repr=False)

    @property
    def n_sites(self) -> int:
        return len(self.points)

    @property
    def n_triangles(self) -> int:
        return len(self.simplices)

    @cached_property
    def neighbor_lists(self):
        """(indptr, indices) with site j adjacent to i iff they share an edge."""
        return self._scipy.vertex_neighbor_vertices

    @cached_property
    def site_triangles(self):
        """(indptr, tri_ids) grouping incident triangles by site index."""
        flat = self.simplices.ravel()
        order = np.argsort(flat, kind="stable")
        tri_ids = order // 3
        counts = np.bincount(flat, minlength=self.n_sites)
        indptr = np.concatenate([[0], np.cumsum(counts)])
        return indptr, tri_ids

    def incident_triangles(self, site: int) -> np.ndarray:
        indptr, tri_ids = self.site_triangles
        return tri_ids[indptr[site]:indptr[site + 1]]

    def is_hull_site(self, site: int) -> bool:
        return bool(np.isin(site, self.hull_sites))


def triangulate(sample: PointSample | np.ndarray) -> Triangulation:
    """Delaunay triangulation of the sample's sites.

    Raises DegenerateInputError when there are fewer than three sites or all
    sites are collinear.
    """
    if isinstance(sample, PointSample):
        points = np.asarray(sample.points, dtype=float)
    else:
        points = np.asarray(sample, dtype=float)
        sample = PointSample(
            points=points,
            region=Region(
                lower=tuple(points.min(axis=0)), upper=tuple(points.max(axis=0) + 1e-9)
            ),
            process="explicit",
            seed=0,
        )
    if len(points) < 3:
        raise DegenerateInputError("need at least 3 sites")
    try:
        sci = _SciDelaunay(points)
    except QhullError as exc:
        raise DegenerateInputError(f"degenerate site configuration: {exc}") from exc
    if len(sci.simplices) == 0:
        raise DegenerateInputError("all sites collinear")
    tri = sci.simplices
    a, b, c = points[tri[:, 0]], points[tri[:, 1]], points[tri[:, 2]]
    centers, radii = circumcircles_batch(a, b, c)
    areas = triangle_areas_batch(a, b, c)
    hull = np.unique(sci.convex_hull.ravel())
    return Triangulation(
        sample=sample,
        points=points,
        simplices=tri,
        tri_neighbors=sci.neighbors,
        circumcenters=centers,
        circumradii=radii,
        areas=areas,
        hull_sites=hull,
        _scipy=sci,
    )


@dataclass
class DelaunayCellTable:
    """Cells with nucleus (circumcenter) inside a window, as parallel arrays."""

    triangle_ids: np.ndarray
    nuclei: np.ndarray
    circumradius: np.ndarray
    area: np.ndarray

    def __len__(self) -> int:
        return len(self.triangle_ids)


def delaunay_cells_in_window(t: Triangulation, window: Region) -> DelaunayCellTable:
    """Exactly the cells whose circumcenter lies in the unpadded window."""
    mask = window.contains(t.circumcenters)
    ids = np.nonzero(mask)[0]
    return DelaunayCellTable(
        triangle_ids=ids,
        nuclei=t.circumcenters[ids],
        circumradius=t.circumradii[ids],
        area=t.areas[ids],
    )


_FUNCTIONALS = {
    "circumradius": lambda table: table.circumradius,
    "area": lambda table: table.area,
    "neg_circumradius": lambda table: -table.circumradius,
    "neg_area": lambda table: -table.area,
}


def empirical_neighbor_pairs(t: Triangulation, cube: Region, threshold: float,
                             functional: str = "circumradius") -> int:
    """Ordered pairs of distinct cells, nuclei in ``cube``, both above threshold.

    Minima are encoded by the negated functionals.  This is the inner sum of
    the pair-clustering diagnostic: with k exceeding cells in the cube the
    ordered-pair count is k (k - 1).
    """
    if functional not in _FUNCTIONALS:
        raise ValueError(f"functional must be one of {sorted(_FUNCTIONALS)}")
    table = delaunay_cells_in_window(t, cube)
    values = _FUNCTIONALS[functional](table)
    k = int(np.count_nonzero(values > threshold))
    return k * (k - 1)


def small_circumradius_cells(points: np.ndarray, vmax: float, window: Region,
                             tree: cKDTree | None = None):
    """Delaunay cells with circumradius below vmax and nucleus in the window.

    Enumerates point triples with pairwise distances below 2 vmax (any three
    cocircular points with radius < vmax satisfy this), keeps those whose
    circumdisk has radius < vmax and center in the window, and verifies the
    disk is empty.  Sites must cover the window dilated by at least vmax.

    Returns (centers, radii) arrays.
    """
    points = np.asarray(points, dtype=float)
    empty = (np.empty((0, 2)), np.empty(0))
    if len(points) < 3 or vmax <= 0:
        return empty
    if tree is None:
        tree = cKDTree(points)
    pairs = tree.query_pairs(r=2.0 * vmax, output_type="ndarray")
    if len(pairs) == 0:
        return empty
    adj: dict[int, set[int]] = {}
    for i, j in pairs:
        adj.setdefault(int(i), set()).add(int(j))
        adj.setdefault(int(j), set()).add(int(i))
    triples = []
    for i, j in pairs:
        i, j = int(i), int(j)
        common = adj[i] & adj[j]
        for k in common:
            if k > j:
                triples.append((i, j, k))
    if not triples:
        return empty
    tri = np.asarray(triples)
    centers, radii = circumcircles_batch(points[tri[:, 0]], points[tri[:, 1]], points[tri[:, 2]])
    keep = (radii < vmax) & window.contains(centers)
    centers, radii, tri = centers[keep], radii[keep], tri[keep]
    if len(tri) == 0:
        return empty
    # empty-circumdisk check; shrink slightly so the triple's own vertices
    # (at distance exactly R) are not reported
    hits = tree.query_ball_point(centers, r=radii * (1.0 - 1e-9))
    is_cell = np.fromiter((len(h) == 0 for h in hits), dtype=bool, count=len(hits))
    return centers[is_cell], radii[is_cell]


def audit_empty_circumdisk(t: Triangulation, use_predicate: bool = False) -> int:
    """Number of (triangle, site) violations of the empty-circumdisk property.

    With ``use_predicate`` the in-circle determinant is evaluated for every
    candidate (slow, test-scale only); otherwise a KD-tree distance check
    with a small relative tolerance is used.
    """
    tree = cKDTree(t.points)
    violations = 0
    for idx in range(t.n_triangles):
        center = t.circumcenters[idx]
        radius = t.circumradii[idx]
        inside = tree.query_ball_point(center, r=radius * (1.0 - 1e-9))
        offenders = set(inside) - set(t.simplices[idx].tolist())
        if not use_predicate:
            violations += len(offenders)
            continue
        a, b, c = t.points[t.simplices[idx]]
        if _ccw_order(a, b, c) < 0:
            a, b = b, a
        for s in offenders:
            if incircle(a, b, c, t.points[s]) > 0:
                violations += 1
    return violations


def _ccw_order(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def hull_area(t: Triangulation) -> float:
    return float(ConvexHull(t.points).volume)
