"""Replicated extreme-value experiments and their diagnostics.

A replication simulates one tessellation window, evaluates the experiment's
per-cell functional, normalizes it onto the limit scale and stores every
cell whose normalized score is extreme enough to matter (mean number of
stored cells per window is capped by ``score_cap_tau``).  All downstream
statistics (exceedance counts, sub-cube counts, order statistics, the
exceedance point process, Poisson-approximation gaps, the extremal index)
are computed from these compressed replication records.

Minima experiments are handled on their natural scale; every formula that
the theory states for maxima is applied through the mode-aware count
helpers, and the exceedance point process reports negated scores for minima
so that it is always an upper-tail process.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial

import numpy as np

from . import laws
from .delaunay import delaunay_cells_in_window, small_circumradius_cells, triangulate
from .laws import GaussPoissonParams, ThresholdFamily
from .pointprocess import Region, derive_seed, sample_gauss_poisson, sample_poisson
from .voronoi import (
    flower_volume,
    inradius_all,
    interior_site_mask,
    neighbor_functionals,
    site_vertex_radii,
)


class DivergenceError(RuntimeError):
    """Raised when an estimator degenerates (for example no survivors)."""


# ---------------------------------------------------------------------------
# Configuration and sub-cube grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """Plain-data description of one experiment run (picklable)."""

    experiment: str
    rho: float
    replications: int
    master_seed: int
    d: int = 2
    margin: float | None = None
    score_cap_tau: float = 32.0
    flower_mc_points: int = 20_000
    flower_screen_points: int = 2_000
    gp_params: GaussPoissonParams | None = None
    min_farthest_coeff: float | None = None
    min_flower_coeff: float | None = None
    threads: int = 1


def family_from_config(config: ExperimentConfig) -> ThresholdFamily:
    return laws.threshold_family(
        config.experiment,
        config.d,
        gp_params=config.gp_params,
        min_farthest_coeff=config.min_farthest_coeff,
        min_flower_coeff=config.min_flower_coeff,
    )


@dataclass(frozen=True)
class SubcubeGrid:
    """Equal sub-cubes tiling the window, with the dependency range.

    The target count is floor(rho / (2 log rho)) (scaled by the cluster
    factor for the Gauss-Poisson process); the per-side count is rounded
    down so the sub-cubes tile the window exactly.
    """

    rho: float
    d: int
    n_side: int
    dependency_range: int

    @property
    def n_cubes(self) -> int:
        return self.n_side**self.d

    @property
    def window_side(self) -> float:
        return self.rho ** (1.0 / self.d)

    @property
    def cube_side(self) -> float:
        return self.window_side / self.n_side

    @property
    def patch_side(self) -> float:
        """Side of the pair-diagnostic cube (dependency neighborhood)."""
        return (2 * self.dependency_range + 1) * self.cube_side

    @classmethod
    def build(cls, rho: float, d: int = 2, gp_params: GaussPoissonParams | None = None):
        factor = 1.0
        if gp_params is not None:
            factor = gp_params.parent_intensity * (gp_params.p1 + gp_params.p2)
        target = max(1, math.floor(factor * rho / (2.0 * math.log(rho))))
        n_side = max(1, math.floor(target ** (1.0 / d)))
        return cls(rho=rho, d=d, n_side=n_side,
                   dependency_range=2 * (math.isqrt(d) + 1))

    def flat_index(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        ids = np.clip((pts / self.cube_side).astype(np.int64), 0, self.n_side - 1)
        flat = ids[:, 0]
        for axis in range(1, self.d):
            flat = flat * self.n_side + ids[:, axis]
        return flat


# ---------------------------------------------------------------------------
# Replication records
# ---------------------------------------------------------------------------


@dataclass
class ReplicationResult:
    """Stored extremes of one replication.

    ``scores`` holds the normalized values of all cells beyond the storage
    floor, sorted extreme-first (ascending for minima, descending for
    maxima); ``nuclei`` are the matching cell nuclei scaled into the unit
    window; ``subcubes`` the matching flat sub-cube indices.  ``n_cells`` is
    the number of cells with nucleus in the window, or -1 when the
    replication used a local search that never builds the full tessellation.
    """

    rep_index: int
    seed: int
    n_cells: int
    scores: np.ndarray
    nuclei: np.ndarray
    subcubes: np.ndarray


@dataclass
class ExperimentRun:
    """All replications of one experiment plus the grid and storage floor."""

    config: ExperimentConfig
    grid: SubcubeGrid
    mode: str
    floor_t: float
    reps: list[ReplicationResult] = field(default_factory=list)

    @property
    def rho(self) -> float:
        return self.config.rho

    def family(self) -> ThresholdFamily:
        return family_from_config(self.config)

    def head(self, n: int) -> "ExperimentRun":
        """The run restricted to its first n replications."""
        return replace(self, reps=self.reps[:n])

    def _check_floor(self, t: float) -> None:
        if (self.mode == "min" and t > self.floor_t) or (
            self.mode == "max" and t < self.floor_t
        ):
            raise ValueError(
                f"t={t} is beyond the storage floor {self.floor_t}; "
                f"rerun with a larger score_cap_tau"
            )

    def exceedance_count(self, rep: ReplicationResult, t: float) -> int:
        """Number of stored cells more extreme than score t."""
        self._check_floor(t)
        if self.mode == "min":
            return int(np.searchsorted(rep.scores, t, side="left"))
        return int(np.searchsorted(-rep.scores, -t, side="left"))

    def counts(self, t: float) -> np.ndarray:
        return np.array([self.exceedance_count(r, t) for r in self.reps], dtype=int)

    def subcube_exceedance_count(self, rep: ReplicationResult, t: float) -> int:
        """Number of sub-cubes whose extreme score is beyond t."""
        u = self.exceedance_count(rep, t)
        return int(len(np.unique(rep.subcubes[:u])))

    def order_statistics(self, r_max: int = 3) -> np.ndarray:
        """(n_reps, r_max) normalized order statistics, NaN when censored."""
        out = np.full((len(self.reps), r_max), np.nan)
        for i, rep in enumerate(self.reps):
            k = min(r_max, len(rep.scores))
            out[i, :k] = rep.scores[:k]
        return out

    def extremes(self) -> np.ndarray:
        return self.order_statistics(1)[:, 0]

    def mean_cells(self) -> float:
        known = [r.n_cells for r in self.reps if r.n_cells >= 0]
        return float(np.mean(known)) if known else math.nan


# ---------------------------------------------------------------------------
# The per-replication workers
# ---------------------------------------------------------------------------


def default_margin(config: ExperimentConfig, family: ThresholdFamily, floor_t: float) -> float:
    """Padding policy: wide enough that window cells ignore the exterior."""
    if config.margin is not None:
        return config.margin
    rho = config.rho
    if config.experiment == "delaunay_min_circumradius":
        return max(1.0, 4.0 * family.threshold(rho, floor_t))
    if config.experiment == "voronoi_min_inradius":
        return max(1.0, 4.0 * family.threshold(rho, floor_t))
    if config.experiment == "gp_max_inradius":
        return 4.0 * family.threshold(rho, 8.0)
    delta = laws.constants(config.d).circumradius_rate
    return 4.0 * (math.log(rho) / delta) ** (1.0 / config.d)


def _finish(config, family, grid, floor_t, rep_index, seed, n_cells, values, positions):
    """Normalize, filter to the storage floor, sort extreme-first and pack."""
    values = np.asarray(values, dtype=float)
    scores = np.asarray(family.normalize(values, config.rho), dtype=float)
    if family.mode == "min":
        keep = scores < floor_t
    else:
        keep = scores > floor_t
    scores = scores[keep]
    positions = np.atleast_2d(positions)[keep]
    order = np.argsort(scores) if family.mode == "min" else np.argsort(-scores)
    scores = scores[order]
    positions = positions[order]
    return ReplicationResult(
        rep_index=rep_index,
        seed=seed,
        n_cells=n_cells,
        scores=scores,
        nuclei=positions / grid.window_side,
        subcubes=grid.flat_index(positions) if len(positions) else np.empty(0, dtype=np.int64),
    )


def _rep_delaunay_full(config, family, grid, floor_t, margin, rep_index, seed):
    region = Region.square(grid.window_side, padding=margin)
    sample = sample_poisson(region, family.intensity, seed)
    t = triangulate(sample)
    table = delaunay_cells_in_window(t, region)
    good = np.isfinite(table.circumradius) & (table.area > 0.0)
    values = table.circumradius if family.functional == "circumradius" else table.area
    return _finish(config, family, grid, floor_t, rep_index, seed,
                   int(good.sum()), values[good], table.nuclei[good])


def _rep_delaunay_min_circ(config, family, grid, floor_t, margin, rep_index, seed):
    v_hi = family.threshold(config.rho, floor_t)
    region = Region.square(grid.window_side, padding=margin)
    sample = sample_poisson(region, family.intensity, seed)
    centers, radii = small_circumradius_cells(sample.points, v_hi, region)
    return _finish(config, family, grid, floor_t, rep_index, seed, -1, radii, centers)


def _rep_voronoi(config, family, grid, floor_t, margin, rep_index, seed):
    region = Region.square(grid.window_side, padding=margin)
    sample = sample_poisson(region, 1.0, seed)
    t = triangulate(sample)
    mask = interior_site_mask(t, region, shrink=margin / 2.0)
    idx = np.nonzero(mask)[0]
    sites = t.points[idx]
    if family.functional == "farthest":
        _, far, _ = neighbor_functionals(t)
        return _finish(config, family, grid, floor_t, rep_index, seed,
                       len(idx), far[idx], sites)
    # flower: screen by the inscribed-disk lower bound, then two-stage MC
    v_hi = family.threshold(config.rho, floor_t)
    rcell = site_vertex_radii(t)[idx]
    lower = math.pi * rcell**2
    cand = np.nonzero(lower < v_hi)[0]
    values, keep_pos = [], []
    for local in cand:
        site = int(idx[local])
        # the vertex-ball union ignores ordering, so the raw incident
        # circumcenters are enough here
        verts = t.circumcenters[t.incident_triangles(site)]
        est, se = flower_volume(verts, t.points[site],
                                mc_points=config.flower_screen_points,
                                seed=derive_seed(seed, 2 * site))
        if est - 3.0 * se > v_hi:
            continue
        est, _ = flower_volume(verts, t.points[site],
                               mc_points=config.flower_mc_points,
                               seed=derive_seed(seed, 2 * site + 1))
        values.append(est)
        keep_pos.append(t.points[site])
    positions = np.asarray(keep_pos) if keep_pos else np.empty((0, 2))
    return _finish(config, family, grid, floor_t, rep_index, seed,
                   len(idx), values, positions)


def _rep_min_inradius(config, family, grid, floor_t, margin, rep_index, seed):
    region = Region.square(grid.window_side, padding=margin)
    sample = sample_poisson(region, 1.0, seed)
    widx = np.nonzero(region.contains(sample.points))[0]
    r = inradius_all(sample.points, query_idx=widx)
    return _finish(config, family, grid, floor_t, rep_index, seed,
                   len(widx), r, sample.points[widx])


def _rep_gp(config, family, grid, floor_t, margin, rep_index, seed):
    region = Region.square(grid.window_side, padding=margin)
    sample = sample_gauss_poisson(region, config.gp_params, seed)
    widx = np.nonzero(region.contains(sample.points))[0]
    r = inradius_all(sample.points, query_idx=widx)
    return _finish(config, family, grid, floor_t, rep_index, seed,
                   len(widx), r, sample.points[widx])


_WORKERS = {
    "delaunay_min_circumradius": _rep_delaunay_min_circ,
    "delaunay_max_area": _rep_delaunay_full,
    "delaunay_min_area": _rep_delaunay_full,
    "delaunay_max_circumradius": _rep_delaunay_full,
    "voronoi_min_farthest": _rep_voronoi,
    "voronoi_min_flower": _rep_voronoi,
    "voronoi_min_inradius": _rep_min_inradius,
    "gp_max_inradius": _rep_gp,
}


def _run_replication(config: ExperimentConfig, rep_index: int) -> ReplicationResult:
    family = family_from_config(config)
    grid = SubcubeGrid.build(config.rho, config.d, gp_params=config.gp_params)
    floor_t = family.t_at_tau(config.score_cap_tau)
    margin = default_margin(config, family, floor_t)
    seed = derive_seed(config.master_seed, rep_index)
    worker = _WORKERS[config.experiment]
    return worker(config, family, grid, floor_t, margin, rep_index, seed)


def run_experiment(config: ExperimentConfig) -> ExperimentRun:
    """Run all replications of an experiment, deterministically in the seed."""
    family = family_from_config(config)
    grid = SubcubeGrid.build(config.rho, config.d, gp_params=config.gp_params)
    floor_t = family.t_at_tau(config.score_cap_tau)
    run = ExperimentRun(config=config, grid=grid, mode=family.mode, floor_t=floor_t)
    if config.replications <= 0:
        return run
    indices = range(config.replications)
    if config.threads > 1 and config.replications > 1:
        chunk = max(1, config.replications // (8 * config.threads))
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            run.reps = list(pool.map(partial(_run_replication, config), indices,
                                     chunksize=chunk))
    else:
        run.reps = [_run_replication(config, i) for i in indices]
    return run


def resolve_threads(requested: int | None) -> int:
    if requested and requested > 0:
        return requested
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# Exceedance counts, point process, diagnostics
# ---------------------------------------------------------------------------


def exceedance_counts(run: ExperimentRun, rep: ReplicationResult, t: float):
    """(cell exceedances, sub-cube exceedances) at normalized threshold t."""
    u = run.exceedance_count(rep, t)
    uprime = run.subcube_exceedance_count(rep, t)
    return u, uprime


def exceedance_point_process(run: ExperimentRun, rep: ReplicationResult):
    """Scaled nuclei and upper-tail scores of one replication.

    Only defined for affine families.  For minima the scores are negated so
    the process is an upper-tail exceedance process in both modes; the
    process is truncated at the storage floor (tail mass score_cap_tau).
    """
    family = run.family()
    if not family.affine:
        raise ValueError(f"{family.name} has no affine normalization")
    scores = rep.scores if run.mode == "max" else -rep.scores
    return rep.nuclei.copy(), scores


def tail_intensity_maxform(family: ThresholdFamily, u: float) -> float:
    """Limit mean of upper-tail exceedances beyond u (minima negated)."""
    return family.tau(u) if family.mode == "max" else family.tau(-u)


@dataclass(frozen=True)
class ScoreBox:
    """A spatial box times a half-open score interval (s, t]."""

    x0: float
    x1: float
    y0: float
    y1: float
    s: float
    t: float = math.inf

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)


@dataclass
class BoxDiagnostics:
    box: ScoreBox
    nu: float
    mean: float
    stderr: float
    dispersion: float
    counts: np.ndarray


def poisson_pp_diagnostics(run: ExperimentRun, boxes: list[ScoreBox]):
    """Per-box mean against the limit intensity, dispersion, pair correlation.

    Boxes live on the upper-tail score scale of exceedance_point_process.
    Returns (list of BoxDiagnostics, pairwise correlation matrix).
    """
    if len(run.reps) < 100:
        raise ValueError("need at least 100 replications")
    family = run.family()
    all_counts = np.zeros((len(run.reps), len(boxes)), dtype=int)
    for i, rep in enumerate(run.reps):
        nuclei, scores = exceedance_point_process(run, rep)
        for j, b in enumerate(boxes):
            inside = (
                (nuclei[:, 0] >= b.x0) & (nuclei[:, 0] < b.x1)
                & (nuclei[:, 1] >= b.y0) & (nuclei[:, 1] < b.y1)
                & (scores > b.s) & (scores <= b.t)
            )
            all_counts[i, j] = int(np.count_nonzero(inside))
    out = []
    for j, b in enumerate(boxes):
        nu_hi = 0.0 if math.isinf(b.t) else tail_intensity_maxform(family, b.t)
        nu = b.area * (tail_intensity_maxform(family, b.s) - nu_hi)
        c = all_counts[:, j]
        mean = float(c.mean())
        out.append(BoxDiagnostics(
            box=b, nu=nu, mean=mean,
            stderr=float(c.std(ddof=1) / math.sqrt(len(c))),
            dispersion=float(c.var(ddof=1) / mean) if mean > 0 else math.nan,
            counts=c,
        ))
    if len(boxes) > 1:
        # boxes with constant counts (for example empty ones) have no
        # defined correlation; numpy yields nan there, which callers see
        with np.errstate(invalid="ignore", divide="ignore"):
            corr = np.corrcoef(all_counts.T)
    else:
        corr = np.ones((1, 1))
    return out, corr


# ---------------------------------------------------------------------------
# Poisson-approximation gap and extremal index
# ---------------------------------------------------------------------------


@dataclass
class GapResult:
    gap: float
    p_hat: float
    target: float
    stderr: float
    r: int
    t: float


def poisson_cdf(k: int, mu: float) -> float:
    """P(Poisson(mu) <= k) by direct summation."""
    term = math.exp(-mu)
    total = term
    for i in range(1, k + 1):
        term *= mu / i
        total += term
    return min(total, 1.0)


def chen_stein_gap(run: ExperimentRun, r: int, t: float,
                   control_variate: bool = False) -> GapResult:
    """Gap between the empirical order-statistic law and its Poisson limit.

    Measures |P_hat(r-th extreme not beyond threshold t) - poisson_cdf(r-1,
    tau(t))|.  With ``control_variate`` the estimate of the probability is
    variance-reduced using the exceedance count, whose exact mean is known
    from the typical-cell law; this requires an exact typical-cell law.
    """
    if len(run.reps) < 1:
        raise ValueError("empty run")
    family = run.family()
    counts = run.counts(t)
    y = (counts <= r - 1).astype(float)
    p_hat = float(y.mean())
    n = len(y)
    if control_variate:
        if not family.typical_tail_exact:
            raise ValueError("control variate needs an exact typical-cell law")
        mu_known = family.mean_exceedances(run.rho, t)
        u = counts.astype(float)
        var_u = float(u.var(ddof=1))
        if var_u > 0:
            beta = float(np.cov(y, u, ddof=1)[0, 1]) / var_u
            p_hat = p_hat - beta * (float(u.mean()) - mu_known)
            resid = y - beta * u
            stderr = float(resid.std(ddof=1) / math.sqrt(n))
        else:
            stderr = float(y.std(ddof=1) / math.sqrt(n))
    else:
        stderr = math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / n)
    target = poisson_cdf(r - 1, family.tau(t))
    return GapResult(gap=abs(p_hat - target), p_hat=p_hat, target=target,
                     stderr=stderr, r=r, t=t)


@dataclass
class ThetaEstimate:
    theta: float
    ci_low: float
    ci_high: float
    p_hat: float
    tau: float
    n: int


def extremal_index_from_zero_fraction(p_hat: float, n: int, tau: float) -> ThetaEstimate:
    if p_hat <= 0.0:
        raise DivergenceError("no replication without exceedance; increase "
                              "replications or tau")
    theta = -math.log(p_hat) / tau
    se_p = math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / n)
    se_theta = se_p / (tau * p_hat)
    return ThetaEstimate(theta=theta, ci_low=theta - 1.96 * se_theta,
                         ci_high=theta + 1.96 * se_theta, p_hat=p_hat,
                         tau=tau, n=n)


def estimate_extremal_index(run: ExperimentRun, tau: float = 1.0) -> ThetaEstimate:
    """Plug-in extremal index: -log P_hat(no exceedance at v(tau)) / tau."""
    if len(run.reps) < 2:
        raise ValueError("need replications")
    family = run.family()
    t0 = family.t_at_tau(tau)
    counts = run.counts(t0)
    return extremal_index_from_zero_fraction(float(np.mean(counts == 0)),
                                             len(counts), tau)


def blocks_extremal_index(run: ExperimentRun, tau: float = 1.0) -> float:
    """Blocks cross-check: exceedance sub-cubes over exceedance cells."""
    family = run.family()
    t0 = family.t_at_tau(tau)
    u_total = 0
    uprime_total = 0
    for rep in run.reps:
        u, uprime = exceedance_counts(run, rep, t0)
        u_total += u
        uprime_total += uprime
    if u_total == 0:
        raise DivergenceError("no exceedances at this tau")
    return uprime_total / u_total


# ---------------------------------------------------------------------------
# Pair-clustering diagnostic (patch simulation)
# ---------------------------------------------------------------------------


@dataclass
class G2Estimate:
    value: float
    stderr: float
    n_patches: int
    mean_pairs: float
    t: float


def _patch_pair_count(config: ExperimentConfig, patch_side: float, v_raw: float,
                      patch_index: int) -> int:
    """Ordered exceedance pairs with both nuclei in one simulated patch."""
    family = family_from_config(config)
    seed = derive_seed(derive_seed(config.master_seed, 104729), patch_index)
    mode = family.mode

    def count_from(values):
        values = np.asarray(values)
        k = int(np.count_nonzero(values < v_raw)) if mode == "min" else int(
            np.count_nonzero(values > v_raw))
        return k * (k - 1)

    if config.experiment == "delaunay_min_circumradius":
        margin = max(1.0, 4.0 * v_raw)
        region = Region.square(patch_side, padding=margin)
        sample = sample_poisson(region, family.intensity, seed)
        _, radii = small_circumradius_cells(sample.points, v_raw, region)
        k = len(radii)
        return k * (k - 1)
    if config.experiment in ("voronoi_min_inradius", "gp_max_inradius"):
        if config.experiment == "gp_max_inradius":
            margin = 4.0 * family.threshold(config.rho, 8.0)
            region = Region.square(patch_side, padding=margin)
            sample = sample_gauss_poisson(region, config.gp_params, seed)
        else:
            margin = max(1.0, 4.0 * v_raw)
            region = Region.square(patch_side, padding=margin)
            sample = sample_poisson(region, 1.0, seed)
        widx = np.nonzero(region.contains(sample.points))[0]
        if len(sample.points) < 2 or len(widx) == 0:
            return 0
        r = inradius_all(sample.points, query_idx=widx)
        return count_from(r)
    # generic tessellation patch
    floor_t = family.t_at_tau(config.score_cap_tau)
    margin = default_margin(config, family, floor_t)
    region = Region.square(patch_side, padding=margin)
    if family.tessellation == "pdt":
        sample = sample_poisson(region, family.intensity, seed)
        t = triangulate(sample)
        table = delaunay_cells_in_window(t, region)
        values = table.circumradius if family.functional == "circumradius" else table.area
        return count_from(values)
    if family.functional == "farthest":
        sample = sample_poisson(region, 1.0, seed)
        t = triangulate(sample)
        mask = interior_site_mask(t, region, shrink=margin / 2.0)
        _, far, _ = neighbor_functionals(t)
        return count_from(far[mask])
    raise ValueError(f"no patch counter for {config.experiment}")


def estimate_g2(config: ExperimentConfig, t: float, n_patches: int,
                threads: int = 1) -> G2Estimate:
    """Pair-clustering functional: grid count times the mean ordered-pair
    count of exceedances with both nuclei in the dependency patch."""
    family = family_from_config(config)
    grid = SubcubeGrid.build(config.rho, config.d, gp_params=config.gp_params)
    v_raw = family.threshold(config.rho, t)
    worker = partial(_patch_pair_count, config, grid.patch_side, v_raw)
    if threads > 1:
        chunk = max(1, n_patches // (8 * threads))
        with ProcessPoolExecutor(max_workers=threads) as pool:
            pairs = np.fromiter(pool.map(worker, range(n_patches), chunksize=chunk),
                                dtype=float, count=n_patches)
    else:
        pairs = np.fromiter((worker(i) for i in range(n_patches)), dtype=float,
                            count=n_patches)
    mean = float(pairs.mean())
    se = float(pairs.std(ddof=1) / math.sqrt(n_patches)) if n_patches > 1 else math.inf
    return G2Estimate(value=grid.n_cubes * mean, stderr=grid.n_cubes * se,
                      n_patches=n_patches, mean_pairs=mean, t=t)


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov distance
# ---------------------------------------------------------------------------


def ks_distance(samples, cdf) -> float:
    """Sup distance between the empirical CDF of the samples and ``cdf``.

    The target is also evaluated just below each sample point so that
    discontinuous (step) targets are compared by the true sup norm.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    if n < 2:
        raise ValueError("need at least two samples")
    f = np.asarray(cdf(x), dtype=float)
    f_left = np.asarray(cdf(np.nextafter(x, -np.inf)), dtype=float)
    grid_hi = np.arange(1, n + 1) / n
    grid_lo = np.arange(0, n) / n
    return float(np.max(np.maximum(np.abs(grid_hi - f), np.abs(f_left - grid_lo))))
