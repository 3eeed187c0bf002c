import math

import numpy as np
import pytest

from tess_extremes.harness import (
    DivergenceError,
    ExperimentConfig,
    ScoreBox,
    SubcubeGrid,
    blocks_extremal_index,
    chen_stein_gap,
    estimate_extremal_index,
    estimate_g2,
    exceedance_counts,
    exceedance_point_process,
    extremal_index_from_zero_fraction,
    family_from_config,
    ks_distance,
    poisson_cdf,
    poisson_pp_diagnostics,
    run_experiment,
)
from tess_extremes.laws import GaussPoissonParams

GP = GaussPoissonParams(parent_intensity=2 / 3, p0=0.0, p1=0.5, p2=0.5)


def small_run(experiment="delaunay_min_circumradius", rho=2500.0, reps=200,
              seed=42, **kw):
    cfg = ExperimentConfig(experiment=experiment, rho=rho, replications=reps,
                           master_seed=seed, **kw)
    return run_experiment(cfg)


class TestSubcubeGrid:
    def test_target_count(self):
        g = SubcubeGrid.build(1e4, 2)
        target = math.floor(1e4 / (2 * math.log(1e4)))
        assert g.n_cubes <= target
        assert (g.n_side + 1) ** 2 > target

    def test_tiles_window(self):
        g = SubcubeGrid.build(1e4, 2)
        assert g.n_side * g.cube_side == pytest.approx(g.window_side)

    def test_gp_variant(self):
        g = SubcubeGrid.build(1e4, 2, gp_params=GP)
        factor = GP.parent_intensity * (GP.p1 + GP.p2)
        target = math.floor(factor * 1e4 / (2 * math.log(1e4)))
        assert g.n_cubes <= target < (g.n_side + 1) ** 2

    def test_flat_index_corners(self):
        g = SubcubeGrid.build(400.0, 2)
        side = g.window_side
        ids = g.flat_index(np.array([[0.0, 0.0], [side - 1e-9, side - 1e-9]]))
        assert ids[0] == 0
        assert ids[1] == g.n_cubes - 1

    def test_dependency_range(self):
        assert SubcubeGrid.build(1e4, 2).dependency_range == 4
        assert SubcubeGrid.build(1e4, 1).dependency_range == 4
        assert SubcubeGrid.build(1e4, 3).dependency_range == 4


class TestRunExperiment:
    def test_zero_replications(self):
        cfg = ExperimentConfig(experiment="voronoi_min_inradius", rho=1e3,
                               replications=0, master_seed=1)
        assert run_experiment(cfg).reps == []

    def test_deterministic(self):
        a = small_run(reps=20, seed=7)
        b = small_run(reps=20, seed=7)
        for ra, rb in zip(a.reps, b.reps):
            assert np.array_equal(ra.scores, rb.scores)
            assert np.array_equal(ra.subcubes, rb.subcubes)

    def test_threads_equivalent(self):
        a = small_run(reps=12, seed=9, threads=1)
        b = small_run(reps=12, seed=9, threads=2)
        for ra, rb in zip(a.reps, b.reps):
            assert np.array_equal(ra.scores, rb.scores)

    def test_prefix_equals_shorter_run(self):
        long = small_run(reps=30, seed=11)
        short = small_run(reps=10, seed=11)
        for ra, rb in zip(long.head(10).reps, short.reps):
            assert np.array_equal(ra.scores, rb.scores)

    def test_scores_sorted_extreme_first(self):
        run = small_run(reps=30, seed=13)
        assert run.mode == "min"
        for rep in run.reps:
            assert np.all(np.diff(rep.scores) >= 0)
        gp_run = small_run("gp_max_inradius", rho=2500.0, reps=10, seed=13,
                           gp_params=GP)
        for rep in gp_run.reps:
            assert np.all(np.diff(rep.scores) <= 0)

    def test_cell_count_contract(self):
        run = small_run("delaunay_max_area", rho=2500.0, reps=30, seed=15)
        assert run.mean_cells() == pytest.approx(2500.0, rel=0.02)
        vor = small_run("voronoi_min_inradius", rho=2500.0, reps=30, seed=15)
        assert vor.mean_cells() == pytest.approx(2500.0, rel=0.02)


class TestCounts:
    def test_uprime_le_u(self):
        run = small_run(reps=100, seed=17)
        grid = np.linspace(0.2, run.floor_t, 7)
        for rep in run.reps:
            for t in grid:
                u, up = exceedance_counts(run, rep, float(t))
                assert up <= u

    def test_floor_guard(self):
        run = small_run(reps=5, seed=19)
        with pytest.raises(ValueError):
            run.counts(run.floor_t + 1.0)

    def test_brute_force_recount(self):
        run = small_run(reps=100, seed=21)
        for rep in run.reps:
            for t in (0.7, 1.3, 2.2):
                u = run.exceedance_count(rep, t)
                assert u == int(np.sum(rep.scores < t))
                up = run.subcube_exceedance_count(rep, t)
                assert up == len({int(s) for s, sc in zip(rep.subcubes, rep.scores)
                                  if sc < t})

    def test_extreme_equals_subcube_extreme(self):
        # the window extreme is the extreme over sub-cube extremes
        run = small_run(reps=50, seed=23)
        for rep in run.reps:
            if len(rep.scores) == 0:
                continue
            best_by_cube = {}
            for s, cube in zip(rep.scores, rep.subcubes):
                best_by_cube[int(cube)] = min(best_by_cube.get(int(cube), math.inf), s)
            assert min(best_by_cube.values()) == rep.scores[0]

    def test_mean_exceedance_tracks_tau(self):
        run = small_run("voronoi_min_inradius", rho=5000.0, reps=400, seed=25)
        for tau in (0.5, 1.0, 2.0):
            t = run.family().t_at_tau(tau)
            assert run.counts(t).mean() == pytest.approx(tau, rel=0.25)

    def test_subcube_mean_within_pair_slack(self):
        # mean cell exceedances exceed mean sub-cube exceedances by at most
        # the pair-clustering functional (within Monte Carlo slack); the
        # clustered inradius minimum makes the gap visible
        run = small_run("voronoi_min_inradius", rho=1e4, reps=400, seed=61)
        fam = run.family()
        t = fam.t_at_tau(2.0)
        us, ups = [], []
        for rep in run.reps:
            u, up = exceedance_counts(run, rep, t)
            us.append(u)
            ups.append(up)
        us, ups = np.array(us), np.array(ups)
        gap = us.mean() - ups.mean()
        assert gap > 0.1  # pairs really do land in one sub-cube
        cfg = ExperimentConfig(experiment="voronoi_min_inradius", rho=1e4,
                               replications=1, master_seed=61)
        g2 = estimate_g2(cfg, t=t, n_patches=300, threads=2)
        se = math.sqrt(us.var(ddof=1) / len(us)) + g2.stderr
        assert gap <= g2.value + 3 * se

    def test_order_statistics_sorted(self):
        run = small_run(reps=40, seed=27, score_cap_tau=40.0)
        stats = run.order_statistics(3)
        ok = ~np.isnan(stats).any(axis=1)
        assert np.all(np.diff(stats[ok], axis=1) >= 0)


class TestChenStein:
    def test_gap_formulas(self):
        assert poisson_cdf(0, 1.0) == pytest.approx(math.exp(-1))
        assert poisson_cdf(2, 0.5) == pytest.approx(
            math.exp(-0.5) * (1 + 0.5 + 0.125))

    def test_r1_matches_zero_count(self):
        run = small_run(reps=150, seed=29)
        fam = run.family()
        t = fam.t_at_tau(1.0)
        gap = chen_stein_gap(run, r=1, t=t)
        assert gap.p_hat == pytest.approx(float(np.mean(run.counts(t) == 0)))
        assert gap.target == pytest.approx(math.exp(-1.0))

    def test_gap_small_for_min_circumradius(self):
        run = small_run(rho=5000.0, reps=400, seed=31)
        fam = run.family()
        for r, tau in ((1, 1.0), (2, 1.0), (3, 2.0)):
            gap = chen_stein_gap(run, r=r, t=fam.t_at_tau(tau))
            assert gap.gap < 0.08

    def test_control_variate_reduces_noise(self):
        run = small_run(rho=5000.0, reps=400, seed=33)
        t = run.family().t_at_tau(4.0)
        plain = chen_stein_gap(run, r=4, t=t)
        cv = chen_stein_gap(run, r=4, t=t, control_variate=True)
        assert cv.stderr < plain.stderr

    def test_control_variate_needs_exact_law(self):
        run = small_run("voronoi_min_farthest", rho=2500.0, reps=20, seed=35,
                        min_farthest_coeff=math.pi**3 / 24)
        with pytest.raises(ValueError):
            chen_stein_gap(run, r=1, t=1.0, control_variate=True)


class TestExtremalIndex:
    def test_synthetic_iid(self):
        rng = np.random.default_rng(0)
        counts = rng.poisson(1.0, size=4000)
        est = extremal_index_from_zero_fraction(float(np.mean(counts == 0)),
                                                len(counts), tau=1.0)
        assert 0.9 < est.theta < 1.1

    def test_divergence(self):
        with pytest.raises(DivergenceError):
            extremal_index_from_zero_fraction(0.0, 100, tau=1.0)

    def test_min_inradius_half(self):
        run = small_run("voronoi_min_inradius", rho=5000.0, reps=600, seed=37)
        est = estimate_extremal_index(run, tau=1.0)
        assert 0.38 < est.theta < 0.62
        assert est.ci_low < est.theta < est.ci_high

    def test_blocks_estimator_clusters(self):
        # exceedances of the inradius minimum come in pairs, so the blocks
        # ratio sits near one half too
        run = small_run("voronoi_min_inradius", rho=5000.0, reps=600, seed=39)
        ratio = blocks_extremal_index(run, tau=2.0)
        assert 0.35 < ratio < 0.75


class TestPointProcess:
    def test_counts_match_exceedances(self):
        run = small_run("delaunay_max_area", rho=2500.0, reps=120, seed=41)
        for rep in run.reps[:20]:
            nuclei, scores = exceedance_point_process(run, rep)
            assert np.all((nuclei >= 0) & (nuclei <= 1))
            for t in (-1.0, 0.0, 1.0):
                assert int(np.sum(scores > t)) == run.exceedance_count(rep, t)

    def test_min_mode_scores_negated(self):
        run = small_run(reps=30, seed=43)
        rep = next(r for r in run.reps if len(r.scores))
        nuclei, scores = exceedance_point_process(run, rep)
        assert np.allclose(np.sort(-scores), np.sort(rep.scores))

    def test_non_affine_rejected(self):
        run = small_run("gp_max_inradius", rho=2500.0, reps=5, seed=45, gp_params=GP)
        with pytest.raises(ValueError):
            exceedance_point_process(run, run.reps[0])

    def test_diagnostics_against_limit_and_exact_law(self):
        # small volume, so compare the means against both the limit measure
        # and the finite-volume expectation from the exact typical-cell law;
        # dispersion stays near one (bands widened for the small volume)
        run = small_run("delaunay_max_area", rho=2500.0, reps=500, seed=47)
        fam = run.family()
        boxes = [
            ScoreBox(0.0, 0.5, 0.0, 1.0, 0.0, 1.0),
            ScoreBox(0.5, 1.0, 0.0, 1.0, 0.0, 1.0),
            ScoreBox(0.0, 1.0, 0.0, 1.0, 1.0, math.inf),
        ]
        diags, corr = poisson_pp_diagnostics(run, boxes)
        for d in diags:
            assert abs(d.mean - d.nu) < 3.5 * d.stderr
            mu_t = 0.0 if math.isinf(d.box.t) else fam.mean_exceedances(run.rho, d.box.t)
            nu_rho = d.box.area * (fam.mean_exceedances(run.rho, d.box.s) - mu_t)
            assert abs(d.mean - nu_rho) < 3.5 * d.stderr
            assert 0.75 < d.dispersion < 1.3
        off = corr - np.diag(np.diag(corr))
        assert np.max(np.abs(off)) < 0.2

    def test_dispersion_calibration_synthetic(self):
        # plain Poisson counts give dispersion inside [0.8, 1.2] at 500 draws
        rng = np.random.default_rng(99)
        for lam in (0.3, 1.0, 3.0):
            c = rng.poisson(lam, size=500)
            assert 0.8 < c.var(ddof=1) / c.mean() < 1.2

    def test_empty_boxes(self):
        run = small_run("delaunay_max_area", rho=2500.0, reps=120, seed=49)
        diags, _ = poisson_pp_diagnostics(
            run, [ScoreBox(0.0, 1.0, 0.0, 1.0, run.floor_t + 30.0, math.inf),
                  ScoreBox(0.0, 1.0, 0.0, 1.0, 0.0, math.inf)])
        assert diags[0].mean == 0.0

    def test_needs_replications(self):
        run = small_run("delaunay_max_area", rho=2500.0, reps=20, seed=51)
        with pytest.raises(ValueError):
            poisson_pp_diagnostics(run, [ScoreBox(0, 1, 0, 1, 0.0)])


class TestG2:
    def test_infinite_threshold_zero(self):
        cfg = ExperimentConfig(experiment="delaunay_min_circumradius", rho=1e4,
                               replications=1, master_seed=53)
        est = estimate_g2(cfg, t=1e-9, n_patches=50)
        assert est.value == 0.0

    def test_matches_direct_pair_count(self):
        # independent recount through the neighbor-pair operation
        from tess_extremes.delaunay import empirical_neighbor_pairs, triangulate
        from tess_extremes.harness import SubcubeGrid, _patch_pair_count
        from tess_extremes.pointprocess import Region, derive_seed, sample_poisson

        cfg = ExperimentConfig(experiment="delaunay_min_circumradius", rho=1e3,
                               replications=1, master_seed=55)
        fam = family_from_config(cfg)
        grid = SubcubeGrid.build(cfg.rho, 2)
        v = fam.threshold(cfg.rho, fam.t_at_tau(4.0))
        total = 0
        direct = 0
        for i in range(200):
            got = _patch_pair_count(cfg, grid.patch_side, v, i)
            total += got
            seed = derive_seed(derive_seed(cfg.master_seed, 104729), i)
            region = Region.square(grid.patch_side, padding=max(1.0, 4.0 * v))
            t = triangulate(sample_poisson(region, fam.intensity, seed))
            direct += empirical_neighbor_pairs(t, region, -v, "neg_circumradius")
        assert total == direct

    def test_voronoi_exceeds_delaunay(self):
        # clustered inradius minima keep the pair functional large
        cfg_v = ExperimentConfig(experiment="voronoi_min_inradius", rho=1e4,
                                 replications=1, master_seed=57)
        cfg_d = ExperimentConfig(experiment="delaunay_min_circumradius", rho=1e4,
                                 replications=1, master_seed=57)
        fam_v = family_from_config(cfg_v)
        fam_d = family_from_config(cfg_d)
        g2_v = estimate_g2(cfg_v, t=fam_v.t_at_tau(1.0), n_patches=400, threads=2)
        g2_d = estimate_g2(cfg_d, t=fam_d.t_at_tau(1.0), n_patches=400, threads=2)
        assert g2_v.value > 5 * max(g2_d.value, 1e-9)


class TestKS:
    def test_exact_fit(self):
        rng = np.random.default_rng(1)
        x = rng.random(10_000)
        assert ks_distance(x, lambda v: np.clip(v, 0, 1)) < 0.02

    def test_point_mass_at_median(self):
        x = np.full(100, 0.5)
        assert ks_distance(x, lambda v: np.clip(v, 0, 1)) == pytest.approx(0.5)

    def test_empirical_vs_itself(self):
        x = np.arange(1.0, 11.0)
        # step target equal to the empirical law gives zero distance
        def cdf(v):
            return np.clip(np.floor(np.asarray(v)) / 10.0, 0.0, 1.0)
        assert ks_distance(x, cdf) == pytest.approx(0.0, abs=1e-9)

    def test_needs_two(self):
        with pytest.raises(ValueError):
            ks_distance([1.0], lambda v: v)
