"""Analytic constants, typical-cell distributions and threshold families.

Everything needed to compare simulated tessellation extremes against their
analytic limits: closed-form constants, the typical-cell distribution of the
Delaunay circumradius and planar cell area, the Voronoi inradius and flower
laws, the Gauss-Poisson Palm isolation probability, per-experiment threshold
normalizations with their limit distributions, and Monte Carlo estimators for
the two constants that have no closed form.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, replace
from typing import Callable, Mapping

import numpy as np
from scipy.special import gammainc, gammaincc

from .geom import Circle, two_disk_intersection_area

__all__ = [
    "LawSet",
    "MCValue",
    "ThresholdFamily",
    "GaussPoissonParams",
    "constants",
    "bessel_k_sixth",
    "delaunay_circumradius_cdf",
    "delaunay_area_survival_2d",
    "delaunay_area_cdf_2d",
    "voronoi_inradius_survival",
    "flower_cdf",
    "gp_palm_isolated",
    "gp_pair_overlap_area",
    "threshold_family",
    "extremal_index_delaunay_max_R",
    "alpha_d4_estimate",
    "alpha_d5_estimate",
    "ConstantsStore",
    "EXPERIMENTS",
]

CACHE_ENV_VAR = "TESS_EXTREMES_CACHE"


# ---------------------------------------------------------------------------
# Closed-form constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MCValue:
    """A Monte Carlo constant with its provenance."""

    value: float
    stderr: float
    mc_samples: int
    seed: int

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "stderr": self.stderr,
            "mc_samples": self.mc_samples,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class LawSet:
    """Analytic constants for dimension ``d``.

    ``site_intensity`` is the intensity of the underlying Poisson process
    that makes the Delaunay tessellation have unit cell intensity.
    ``circumradius_rate`` is the rate of the Gamma law of the d-th power of
    the typical Delaunay circumradius, and ``min_circumradius_coeff`` the
    leading coefficient of its distribution function at small arguments.
    The two ``MCValue`` fields have no closed form and are filled on demand.
    """

    d: int
    unit_ball_volume: float          # volume of the d-dimensional unit ball
    site_intensity: float            # underlying Poisson intensity (beta)
    circumradius_rate: float         # rate of the Gamma law of R^d (delta)
    typical_cell_norm: float         # (d+1) * site_intensity
    min_circumradius_coeff: float    # small-v CDF coefficient, order v^(d^2)
    max_circumradius_coeff: float    # Gumbel coefficient of the dual max law
    max_area_rate: float | None      # exponential area-tail rate (d=2 only)
    min_area_coeff: float | None     # small-v area CDF coefficient (d=2 only)
    min_farthest_coeff: MCValue | None = None
    min_flower_coeff: MCValue | None = None

    def with_mc(self, farthest: MCValue | None = None, flower: MCValue | None = None):
        return replace(
            self,
            min_farthest_coeff=farthest or self.min_farthest_coeff,
            min_flower_coeff=flower or self.min_flower_coeff,
        )


def _site_intensity(d: int) -> float:
    g = math.gamma
    num = (d**3 + d**2) * g(d**2 / 2.0) * g((d + 1) / 2.0) ** d
    den = g((d**2 + 1) / 2.0) * g((d + 2) / 2.0) ** d * 2 ** (d + 1) * math.pi ** ((d - 1) / 2.0)
    return num / den


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def _max_circumradius_coeff(d: int) -> float:
    g = math.gamma
    return (1.0 / math.factorial(d)) * (math.sqrt(math.pi) * g(d / 2.0 + 1.0) / g((d + 1) / 2.0)) ** (d - 1)


def constants(d: int) -> LawSet:
    """Closed-form constants for dimension d in 1..6."""
    if not (1 <= d <= 6):
        raise ValueError(f"dimension must be in 1..6, got {d}")
    beta = _site_intensity(d)
    kappa = unit_ball_volume(d)
    delta = kappa * beta
    max_area_rate = 2.0 * math.pi / (3.0 * math.sqrt(3.0)) if d == 2 else None
    min_area_coeff = (
        2.0 ** (-2.0 / 3.0) / math.sqrt(3.0) / 5.0 * math.pi ** (2.0 / 3.0) * math.gamma(1.0 / 6.0) ** 2
        if d == 2
        else None
    )
    return LawSet(
        d=d,
        unit_ball_volume=kappa,
        site_intensity=beta,
        circumradius_rate=delta,
        typical_cell_norm=(d + 1) * beta,
        min_circumradius_coeff=delta**d / math.factorial(d),
        max_circumradius_coeff=_max_circumradius_coeff(d),
        max_area_rate=max_area_rate,
        min_area_coeff=min_area_coeff,
    )


def extremal_index_delaunay_max_R(d: int) -> float:
    """Extremal index of the maximum Delaunay circumradius (1, 1/2, 35/128 for d=1,2,3)."""
    if not (1 <= d <= 3):
        raise ValueError(f"dimension must be in 1..3, got {d}")
    law = constants(d)
    return law.max_circumradius_coeff * law.site_intensity * math.factorial(d - 1)


# ---------------------------------------------------------------------------
# Modified Bessel function of order 1/6 (quadrature)
# ---------------------------------------------------------------------------

_EXP_CUTOFF = 746.0  # beyond this the integrand underflows in double precision


def _k16_fixed(x: np.ndarray, n: int) -> np.ndarray:
    """Gauss-Legendre evaluation of the K_{1/6} integral with n nodes."""
    nodes, weights = np.polynomial.legendre.leggauss(n)
    # integral over t in [0, T(x)] of exp(-x cosh t) cosh(t/6) dt
    upper = np.arccosh(np.maximum(_EXP_CUTOFF / x, 1.0 + 1e-12))
    half = upper / 2.0
    t = half[:, None] * (nodes[None, :] + 1.0)
    vals = np.exp(-x[:, None] * np.cosh(t)) * np.cosh(t / 6.0)
    return half * (vals @ weights)


def bessel_k_sixth(x, rel_tol: float = 1e-9, max_nodes: int = 4096):
    """Modified Bessel function K of order 1/6 by adaptive quadrature.

    Node count is doubled until two successive Gauss-Legendre evaluations
    agree to ``rel_tol`` relatively; accepts scalars or arrays of positive
    arguments.
    """
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(arr <= 0.0) or not np.all(np.isfinite(arr)):
        raise ValueError("argument must be positive and finite")
    n = 128
    prev = _k16_fixed(arr, n)
    while n < max_nodes:
        n *= 2
        cur = _k16_fixed(arr, n)
        scale = np.maximum(np.abs(cur), 1e-300)
        if np.all(np.abs(cur - prev) <= rel_tol * scale):
            prev = cur
            break
        prev = cur
    return prev if np.ndim(x) else float(prev[0])


# ---------------------------------------------------------------------------
# Typical-cell distributions
# ---------------------------------------------------------------------------


def delaunay_circumradius_cdf(v, d: int = 2, law: LawSet | None = None):
    """Distribution function of the typical Delaunay circumradius.

    The d-th power of the circumradius is Gamma distributed with integer
    shape d and rate ``circumradius_rate``; evaluated via the regularized
    lower incomplete gamma function.
    """
    law = law or constants(d)
    v = np.asarray(v, dtype=float)
    out = gammainc(d, law.circumradius_rate * np.maximum(v, 0.0) ** d)
    return out if out.ndim else float(out)


def _circumradius_cdf_series(v: float, d: int = 2, law: LawSet | None = None,
                             tol: float = 1e-16) -> float:
    """Direct series evaluation of the circumradius CDF (test oracle)."""
    law = law or constants(d)
    lam = law.circumradius_rate * max(v, 0.0) ** d
    if lam == 0.0:
        return 0.0
    # sum_{i >= d} lam^i e^{-lam} / i!
    term = math.exp(-lam + d * math.log(lam) - math.lgamma(d + 1))
    total = term
    i = d
    while term > tol * max(total, 1e-300):
        i += 1
        term *= lam / i
        total += term
    return min(total, 1.0)


class _AreaLawTable:
    """Tabulated planar Delaunay typical-cell area law.

    The survival function is the normalized right tail of x * K_{1/6}(x)^2.
    The integrand is tabulated on a cube-root grid (it behaves like x^(2/3)
    at the origin) and integrated once; queries interpolate the cumulative
    integral.  Beyond the table the exponential tail approximation is used.
    """

    X_CUT = 45.0
    N_NODES = 8001

    def __init__(self):
        law = constants(2)
        self.scale = law.max_area_rate * law.site_intensity  # argument scale
        smax = self.X_CUT ** (1.0 / 3.0)
        s = np.linspace(0.0, smax, self.N_NODES)
        x = s**3
        k = np.zeros_like(s)
        k[1:] = bessel_k_sixth(x[1:])
        g = 3.0 * s**5 * k**2  # integrand after x = s^3 substitution
        self.s = s
        cum = np.concatenate([[0.0], np.cumsum((g[1:] + g[:-1]) / 2.0 * np.diff(s))])
        self.cum = cum
        self.total = cum[-1]
        self.tail_rate = law.max_area_rate

    def survival(self, v):
        v = np.asarray(v, dtype=float)
        x0 = self.scale * np.maximum(v, 0.0)
        s0 = np.cbrt(x0)
        inside = s0 <= self.s[-1]
        c0 = np.interp(np.where(inside, s0, 0.0), self.s, self.cum)
        out = (6.0 / math.pi) * (self.total - c0)
        # exponential tail beyond the table
        tail = 1.5 * np.exp(-self.tail_rate * v)
        out = np.where(inside, out, tail)
        return np.clip(out, 0.0, 1.0)


_AREA_TABLE: _AreaLawTable | None = None


def _area_table() -> _AreaLawTable:
    global _AREA_TABLE
    if _AREA_TABLE is None:
        _AREA_TABLE = _AreaLawTable()
    return _AREA_TABLE


def delaunay_area_survival_2d(v):
    """P(typical planar Delaunay cell area > v), numeric Bessel integral."""
    out = _area_table().survival(v)
    return out if out.ndim else float(out)


def delaunay_area_cdf_2d(v):
    out = 1.0 - _area_table().survival(v)
    return out if np.ndim(out) else float(out)


def voronoi_inradius_survival(v, d: int = 2):
    """P(typical Poisson-Voronoi inradius > v): exp of minus the 2v-ball volume."""
    v = np.asarray(v, dtype=float)
    out = np.exp(-(2.0**d) * unit_ball_volume(d) * np.maximum(v, 0.0) ** d)
    return out if out.ndim else float(out)


def flower_cdf(v, neighbor_pmf: Mapping[int, float]):
    """Distribution of the typical Voronoi flower volume.

    Mixture of Gamma(k, 1) distribution functions weighted by the supplied
    neighbor-count probabilities; the unsupplied mass bounds the truncation
    error.
    """
    for k, p in neighbor_pmf.items():
        if p < 0.0:
            raise ValueError(f"negative pmf entry at k={k}")
    v = np.asarray(v, dtype=float)
    out = np.zeros_like(v, dtype=float)
    for k, p in neighbor_pmf.items():
        if p > 0.0:
            out = out + p * gammainc(int(k), np.maximum(v, 0.0))
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Gauss-Poisson laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussPoissonParams:
    """Parameters of the planar Gauss-Poisson cluster process.

    A parent Poisson process of intensity ``parent_intensity`` is marked
    independently: each parent is deleted (p0), kept as a single point (p1),
    or replaced by two points at unit separation centered on it (p2).
    """

    parent_intensity: float
    p0: float
    p1: float
    p2: float

    def __post_init__(self):
        if self.parent_intensity <= 0.0:
            raise ValueError("parent_intensity must be positive")
        for name in ("p0", "p1", "p2"):
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"{name} must be a probability")
        if abs(self.p0 + self.p1 + self.p2 - 1.0) > 1e-12:
            raise ValueError("p0 + p1 + p2 must sum to 1")
        if self.p0 >= 1.0 - 1e-12:
            raise ValueError("p0 = 1 yields an empty process")

    @property
    def intensity(self) -> float:
        return (self.p1 + 2.0 * self.p2) * self.parent_intensity


def gp_pair_overlap_area(v: float) -> float:
    """Intersection area of two disks of radius 2v with centers 1 apart."""
    if v < 0.0:
        raise ValueError("v must be nonnegative")
    return two_disk_intersection_area(
        Circle((0.0, 0.0), 2.0 * v), Circle((1.0, 0.0), 2.0 * v)
    )


def gp_palm_isolated(v: float, params: GaussPoissonParams) -> float:
    """Palm probability that a Gauss-Poisson point has no neighbor within 2v.

    Equals the probability that the typical Voronoi inradius exceeds v.
    Exact for all v; drops by the factor p1 / (p1 + 2 p2) at 2v = 1 where
    pair companions start violating isolation.
    """
    if v < 0.0:
        raise ValueError("v must be nonnegative")
    g, p1, p2 = params.parent_intensity, params.p1, params.p2
    expo = g * (4.0 * p1 * math.pi * v**2 + p2 * (8.0 * math.pi * v**2 - gp_pair_overlap_area(v)))
    prefactor = 1.0 if 2.0 * v < 1.0 else p1 / (p1 + 2.0 * p2)
    return prefactor * math.exp(-expo)


def _gp_quadratic_coefficients(params: GaussPoissonParams):
    """Coefficients (A, B, K) of the large-v expansion of -log isolation.

    -log P(isolated at v) = A v^2 + B v + K + O(1/v) for 2v >= 1, obtained
    from the exact formula via the expansion of the two-disk union area
    (union of the pair-companion disks is 4 pi v^2 + 4 v + O(1/v)).
    """
    g, p1, p2 = params.parent_intensity, params.p1, params.p2
    if p1 <= 0.0:
        raise ValueError("p1 must be positive for the inradius-maximum law")
    a = 4.0 * g * math.pi * (p1 + p2)
    b = 4.0 * g * p2
    k = math.log((p1 + 2.0 * p2) / p1)
    return a, b, k


def gp_threshold(rho: float, t: float, params: GaussPoissonParams) -> float:
    """Inradius threshold with mean exceedance count e^-t over volume rho.

    Explicit positive root of the quadratic A v^2 + B v + K = log(rho) + t.
    """
    a, b, k = _gp_quadratic_coefficients(params)
    rhs = math.log(rho) + t - k
    disc = b * b + 4.0 * a * rhs
    if disc < 0.0:
        raise ValueError("threshold undefined: volume too small for this t")
    return (-b + math.sqrt(disc)) / (2.0 * a)


# ---------------------------------------------------------------------------
# Threshold families
# ---------------------------------------------------------------------------

EXPERIMENTS = (
    "delaunay_min_circumradius",
    "delaunay_max_area",
    "delaunay_min_area",
    "voronoi_min_farthest",
    "voronoi_min_flower",
    "voronoi_min_inradius",
    "delaunay_max_circumradius",
    "gp_max_inradius",
)


@dataclass(frozen=True)
class ThresholdFamily:
    """Normalization and limit law for one extreme-value experiment.

    The raw per-cell functional is ``functional``; its ``power``-th power is
    affine in the normalized score t: value^power = scale(rho) * t +
    shift(rho).  ``tau(t)`` is the limit of the mean number of exceedances
    beyond ``threshold(rho, t)`` in a window of volume rho, and
    ``limit_cdf(t)`` the limit distribution of the normalized extreme
    (extremal index included).  The Gauss-Poisson family is not affine and
    stores its threshold map directly.
    """

    name: str
    d: int
    mode: str                      # "min" or "max"
    tessellation: str              # "pdt", "pvt" or "gp"
    functional: str                # raw per-cell value the harness computes
    power: float | None            # value**power is affine in t (None: non-affine)
    affine: bool
    scale: Callable[[float], float] | None
    shift: Callable[[float], float] | None
    threshold: Callable[[float, float], float]
    normalize: Callable[[np.ndarray, float], np.ndarray]
    tau: Callable[[float], float]
    t_at_tau: Callable[[float], float]
    limit_cdf: Callable[[np.ndarray], np.ndarray]
    theta: float
    typical_tail: Callable[[np.ndarray], np.ndarray] | None
    typical_tail_exact: bool
    intensity: float
    gp_params: GaussPoissonParams | None = None

    def mean_exceedances(self, rho: float, t: float) -> float:
        """rho * P(typical-cell exceedance beyond threshold(rho, t))."""
        if self.typical_tail is None:
            raise ValueError(f"no typical-cell law available for {self.name}")
        return rho * float(self.typical_tail(self.threshold(rho, t)))


def _affine_family(name, d, mode, tessellation, functional, power, scale, shift,
                   tau, t_at_tau, theta, typical_tail, typical_tail_exact,
                   intensity, gp_params=None):
    def threshold(rho, t):
        u = scale(rho) * t + shift(rho)
        if power == 1:
            return u
        return u ** (1.0 / power) if u > 0 else 0.0

    def normalize(values, rho):
        values = np.asarray(values, dtype=float)
        out = (values**power - shift(rho)) / scale(rho)
        return out if out.ndim else float(out)

    if mode == "min":
        def limit_cdf(t):
            t = np.asarray(t, dtype=float)
            out = np.where(t > 0, 1.0 - np.exp(-theta * _vec(tau)(np.maximum(t, 0.0))), 0.0)
            return out if out.ndim else float(out)
    else:
        def limit_cdf(t):
            t = np.asarray(t, dtype=float)
            out = np.exp(-theta * _vec(tau)(t))
            return out if out.ndim else float(out)

    return ThresholdFamily(
        name=name, d=d, mode=mode, tessellation=tessellation,
        functional=functional, power=power, affine=True,
        scale=scale, shift=shift, threshold=threshold, normalize=normalize,
        tau=tau, t_at_tau=t_at_tau, limit_cdf=limit_cdf, theta=theta,
        typical_tail=typical_tail, typical_tail_exact=typical_tail_exact,
        intensity=intensity, gp_params=gp_params,
    )


def _vec(f):
    def g(x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            return f(float(x))
        return np.array([f(v) for v in x.ravel()]).reshape(x.shape)
    return g


def _require_mc(value: MCValue | float | None, what: str) -> float:
    if value is None:
        raise ValueError(
            f"{what} is a Monte Carlo constant; estimate it first "
            f"(see alpha_d4_estimate / alpha_d5_estimate) and pass it in"
        )
    return value.value if isinstance(value, MCValue) else float(value)


def threshold_family(
    experiment: str,
    d: int = 2,
    *,
    gp_params: GaussPoissonParams | None = None,
    min_farthest_coeff: MCValue | float | None = None,
    min_flower_coeff: MCValue | float | None = None,
    neighbor_pmf: Mapping[int, float] | None = None,
) -> ThresholdFamily:
    """Build the threshold family for a named experiment.

    Experiments over Voronoi minima of the farthest-neighbor distance and
    the flower volume need their Monte Carlo coefficient supplied; the
    Gauss-Poisson experiment needs its process parameters.
    """
    if experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {experiment!r}")
    law = constants(d)
    delta = law.circumradius_rate
    kappa = law.unit_ball_volume

    if experiment == "delaunay_min_circumradius":
        coeff = law.min_circumradius_coeff
        return _affine_family(
            experiment, d, "min", "pdt", "circumradius", d,
            scale=lambda rho: (coeff * rho) ** (-1.0 / d),
            shift=lambda rho: 0.0,
            tau=lambda t: t**d, t_at_tau=lambda tau: tau ** (1.0 / d),
            theta=1.0,
            typical_tail=lambda v: delaunay_circumradius_cdf(v, d, law),
            typical_tail_exact=True, intensity=law.site_intensity,
        )

    if experiment == "delaunay_max_area":
        if d != 2:
            raise ValueError("the area laws are planar only")
        rate = law.max_area_rate
        return _affine_family(
            experiment, d, "max", "pdt", "area", 1,
            scale=lambda rho: 1.0 / rate,
            shift=lambda rho: math.log(1.5 * rho) / rate,
            tau=lambda t: math.exp(-t), t_at_tau=lambda tau: -math.log(tau),
            theta=1.0,
            typical_tail=delaunay_area_survival_2d,
            typical_tail_exact=True, intensity=law.site_intensity,
        )

    if experiment == "delaunay_min_area":
        if d != 2:
            raise ValueError("the area laws are planar only")
        coeff = law.min_area_coeff
        return _affine_family(
            experiment, d, "min", "pdt", "area", 1,
            scale=lambda rho: (coeff * rho) ** (-3.0 / 5.0),
            shift=lambda rho: 0.0,
            tau=lambda t: t ** (5.0 / 3.0), t_at_tau=lambda tau: tau ** (3.0 / 5.0),
            theta=1.0,
            typical_tail=delaunay_area_cdf_2d,
            typical_tail_exact=True, intensity=law.site_intensity,
        )

    if experiment == "voronoi_min_farthest":
        coeff = _require_mc(min_farthest_coeff, "the farthest-distance coefficient")
        return _affine_family(
            experiment, d, "min", "pvt", "farthest", d,
            scale=lambda rho: (coeff * rho) ** (-1.0 / (d + 1)),
            shift=lambda rho: 0.0,
            tau=lambda t: t ** (d + 1), t_at_tau=lambda tau: tau ** (1.0 / (d + 1)),
            theta=1.0,
            typical_tail=lambda v: coeff * np.asarray(v, dtype=float) ** (d * (d + 1)),
            typical_tail_exact=False, intensity=1.0,
        )

    if experiment == "voronoi_min_flower":
        coeff = _require_mc(min_flower_coeff, "the flower-volume coefficient")
        if neighbor_pmf is not None:
            tail = lambda v: flower_cdf(v, neighbor_pmf)
        else:
            tail = lambda v: coeff * np.asarray(v, dtype=float) ** (d + 1)
        return _affine_family(
            experiment, d, "min", "pvt", "flower", 1,
            scale=lambda rho: (coeff * rho) ** (-1.0 / (d + 1)),
            shift=lambda rho: 0.0,
            tau=lambda t: t ** (d + 1), t_at_tau=lambda tau: tau ** (1.0 / (d + 1)),
            theta=1.0,
            typical_tail=tail,
            typical_tail_exact=neighbor_pmf is not None, intensity=1.0,
        )

    if experiment == "voronoi_min_inradius":
        rate = 2.0**d * kappa
        return _affine_family(
            experiment, d, "min", "pvt", "inradius", d,
            scale=lambda rho: 1.0 / (rate * rho),
            shift=lambda rho: 0.0,
            tau=lambda t: t, t_at_tau=lambda tau: tau,
            theta=0.5,
            typical_tail=lambda v: 1.0 - voronoi_inradius_survival(v, d),
            typical_tail_exact=True, intensity=1.0,
        )

    if experiment == "delaunay_max_circumradius":
        beta = law.site_intensity
        theta = extremal_index_delaunay_max_R(d) if d <= 3 else 1.0

        def shift(rho):
            if beta * rho <= math.e:
                raise ValueError("volume too small for the circumradius maximum law")
            return math.log(rho * math.log(beta * rho) ** (d - 1) / math.factorial(d - 1)) / delta

        return _affine_family(
            experiment, d, "max", "pdt", "circumradius", d,
            scale=lambda rho: 1.0 / delta,
            shift=shift,
            tau=lambda t: math.exp(-t), t_at_tau=lambda tau: -math.log(tau),
            theta=theta,
            typical_tail=lambda v: gammaincc(d, delta * np.asarray(v, dtype=float) ** d),
            typical_tail_exact=True, intensity=law.site_intensity,
        )

    # gp_max_inradius: the threshold is an explicit quadratic root, not affine.
    if gp_params is None:
        raise ValueError("gp_max_inradius needs GaussPoissonParams")
    params = gp_params
    a, b, k = _gp_quadratic_coefficients(params)

    def threshold(rho, t):
        return gp_threshold(rho, t, params)

    def normalize(values, rho):
        values = np.asarray(values, dtype=float)
        out = a * values**2 + b * values + k - math.log(rho)
        return out if out.ndim else float(out)

    def limit_cdf(t):
        t = np.asarray(t, dtype=float)
        out = np.exp(-np.exp(-t))
        return out if out.ndim else float(out)

    return ThresholdFamily(
        name=experiment, d=2, mode="max", tessellation="gp",
        functional="inradius", power=None, affine=False,
        scale=None, shift=None, threshold=threshold, normalize=normalize,
        tau=lambda t: math.exp(-t), t_at_tau=lambda tau: -math.log(tau),
        limit_cdf=limit_cdf, theta=1.0,
        typical_tail=_vec(lambda v: gp_palm_isolated(v, params)),
        typical_tail_exact=True, intensity=params.intensity, gp_params=params,
    )


# ---------------------------------------------------------------------------
# Monte Carlo constants and their cache
# ---------------------------------------------------------------------------


def alpha_d4_estimate(d: int = 2, mc_samples: int = 400_000, seed: int = 0,
                      max_rel_error: float = 0.02) -> MCValue:
    """Monte Carlo coefficient of the small farthest-neighbor distance law.

    Integrates, over triples drawn uniformly from the unit disk, the
    indicator that the cell of the origin within the triple plus the origin
    is a bounded polygon with exactly three faces, normalized by 3!.
    In the plane this happens exactly when the three site directions
    positively span the plane; the equivalence with the explicit half-plane
    construction is checked in the test suite.
    """
    if d != 2:
        raise ValueError("only the planar coefficient is supported")
    if mc_samples < 1000:
        raise ValueError("too few samples")
    rng = np.random.default_rng(seed)
    hits = 0
    remaining = mc_samples
    block = 1_000_000
    while remaining > 0:
        m = min(block, remaining)
        theta = rng.uniform(0.0, 2.0 * math.pi, size=(m, 3))
        # radii are irrelevant to the span test but drawn to honor the
        # uniform-in-disk sampling contract
        _ = rng.random(size=(m, 3))
        theta.sort(axis=1)
        gaps = np.diff(theta, axis=1)
        wrap = 2.0 * math.pi - (theta[:, 2] - theta[:, 0])
        max_gap = np.maximum(gaps.max(axis=1), wrap)
        hits += int(np.count_nonzero(max_gap < math.pi))
        remaining -= m
    p = hits / mc_samples
    vol = math.pi**3  # volume of the product of three unit disks
    value = vol * p / math.factorial(3)
    stderr = vol * math.sqrt(p * (1.0 - p) / mc_samples) / math.factorial(3)
    if value > 0 and stderr / value > max_rel_error:
        raise ValueError(
            f"insufficient samples for requested precision: rel err {stderr / value:.3g}"
        )
    return MCValue(value=value, stderr=stderr, mc_samples=mc_samples, seed=seed)


def alpha_d5_estimate(neighbor_pmf: Mapping[int, float], n_cells: int, d: int = 2,
                      seed: int = 0) -> MCValue:
    """Flower-volume coefficient p(d+1)/(d+1)! from an empirical neighbor pmf."""
    p = float(neighbor_pmf.get(d + 1, 0.0))
    value = p / math.factorial(d + 1)
    stderr = math.sqrt(max(p * (1.0 - p), 0.0) / max(n_cells, 1)) / math.factorial(d + 1)
    return MCValue(value=value, stderr=stderr, mc_samples=n_cells, seed=seed)


class ConstantsStore:
    """JSON sidecar for Monte Carlo constants, with provenance.

    The path comes from the TESS_EXTREMES_CACHE environment variable unless
    given explicitly; with neither, the store is memory-only.
    """

    def __init__(self, path: str | None = None):
        self.path = path if path is not None else os.environ.get(CACHE_ENV_VAR)
        self._data: dict = {}
        if self.path and os.path.exists(self.path):
            with open(self.path) as fh:
                self._data = json.load(fh)

    def get(self, key: str):
        return self._data.get(key)

    def put(self, key: str, value) -> None:
        self._data[key] = value
        if self.path:
            directory = os.path.dirname(os.path.abspath(self.path))
            os.makedirs(directory, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
            with os.fdopen(fd, "w") as fh:
                json.dump(self._data, fh, indent=1, sort_keys=True)
            os.replace(tmp, self.path)

    def get_mc(self, key: str) -> MCValue | None:
        raw = self.get(key)
        if raw is None:
            return None
        return MCValue(**{k: raw[k] for k in ("value", "stderr", "mc_samples", "seed")})

    def put_mc(self, key: str, value: MCValue) -> None:
        self.put(key, value.as_dict())
