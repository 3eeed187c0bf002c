"""Reproducible point-process samplers on padded rectangular regions.

The observation window is the unpadded core of a ``Region``; samplers fill
the core dilated by the padding so that cells whose nucleus lies in the
window are unaffected by the missing exterior.  All samplers are pure
functions of (region, parameters, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .laws import GaussPoissonParams

COUNT_CAP = 100_000_000


class ResourceLimitError(RuntimeError):
    """Raised when a sampler would draw more points than the configured cap."""


@dataclass(frozen=True)
class Region:
    """A rectangular core region with symmetric padding, d in {1, 2, 3}."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    padding: float = 0.0

    def __post_init__(self):
        lower = tuple(float(x) for x in np.atleast_1d(self.lower))
        upper = tuple(float(x) for x in np.atleast_1d(self.upper))
        if len(lower) != len(upper) or not 1 <= len(lower) <= 3:
            raise ValueError("lower/upper must share a dimension in 1..3")
        if any(u <= l for l, u in zip(lower, upper)):
            raise ValueError("upper must exceed lower componentwise")
        if self.padding < 0.0:
            raise ValueError("padding must be nonnegative")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def core_volume(self) -> float:
        return float(np.prod([u - l for l, u in zip(self.lower, self.upper)]))

    def sim_bounds(self, extra: float = 0.0):
        pad = self.padding + extra
        lo = np.asarray(self.lower) - pad
        hi = np.asarray(self.upper) + pad
        return lo, hi

    @property
    def sim_volume(self) -> float:
        lo, hi = self.sim_bounds()
        return float(np.prod(hi - lo))

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask of points inside the unpadded core."""
        pts = np.atleast_2d(points)
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return np.all((pts >= lo) & (pts < hi), axis=1)

    @classmethod
    def square(cls, side: float, padding: float = 0.0, dim: int = 2) -> "Region":
        return cls(lower=(0.0,) * dim, upper=(side,) * dim, padding=padding)


@dataclass(frozen=True)
class PointSample:
    """Sites drawn on the simulation region of ``region``."""

    points: np.ndarray = field(repr=False)
    region: Region
    process: str
    seed: int

    @property
    def n(self) -> int:
        return len(self.points)


def derive_seed(master_seed: int, replicate_index: int) -> int:
    """Deterministic 64-bit stream seed for one replicate (splitmix mixing)."""
    mask = (1 << 64) - 1
    z = (int(master_seed) + 0x9E3779B97F4A7C15 * (int(replicate_index) + 1)) & mask
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
    return (z ^ (z >> 31)) & mask


def sample_poisson(region: Region, intensity: float, seed: int) -> PointSample:
    """Homogeneous Poisson sample on the padded simulation region."""
    if intensity <= 0.0:
        raise ValueError("intensity must be positive")
    lo, hi = region.sim_bounds()
    mean = intensity * float(np.prod(hi - lo))
    if mean > COUNT_CAP:
        raise ResourceLimitError(f"expected count {mean:.3g} exceeds cap {COUNT_CAP:.0g}")
    rng = np.random.default_rng(seed)
    n = rng.poisson(mean)
    pts = lo + rng.random((n, region.dim)) * (hi - lo)
    return PointSample(points=pts, region=region, process=f"poisson({intensity})", seed=seed)


def sample_gauss_poisson(region: Region, params: GaussPoissonParams, seed: int) -> PointSample:
    """Planar Gauss-Poisson cluster sample on the padded simulation region.

    Parents are drawn on the simulation region dilated by 1/2, the maximum
    offspring displacement, so the offspring process restricted to the
    simulation region is stationary.  Each parent independently produces no
    point, one point at the parent, or a pair at the parent plus/minus half
    a uniformly oriented unit vector; offspring outside the simulation
    region are dropped.
    """
    if region.dim != 2:
        raise ValueError("the Gauss-Poisson sampler is planar")
    lo, hi = region.sim_bounds(extra=0.5)
    mean = params.parent_intensity * float(np.prod(hi - lo))
    if mean * (params.p1 + 2.0 * params.p2) > COUNT_CAP:
        raise ResourceLimitError("expected count exceeds cap")
    rng = np.random.default_rng(seed)
    n_par = rng.poisson(mean)
    parents = lo + rng.random((n_par, 2)) * (hi - lo)
    u = rng.random(n_par)
    singles = parents[(u >= params.p0) & (u < params.p0 + params.p1)]
    pair_parents = parents[u >= params.p0 + params.p1]
    angles = rng.uniform(0.0, 2.0 * np.pi, size=len(pair_parents))
    offsets = 0.5 * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    pts = np.concatenate([singles, pair_parents + offsets, pair_parents - offsets])
    slo, shi = region.sim_bounds()
    keep = np.all((pts >= slo) & (pts <= shi), axis=1)
    label = (
        f"gauss_poisson(parent={params.parent_intensity},"
        f"p=({params.p0},{params.p1},{params.p2}))"
    )
    return PointSample(points=pts[keep], region=region, process=label, seed=seed)
