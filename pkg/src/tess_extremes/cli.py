"""Command-line entry point: experiment configs, result persistence, CSV emission.

Subcommands
-----------
laws            print analytic constants (and one experiment's law grid)
run             run a configured experiment, write results JSON (+ CSV dumps)
trend           run an experiment across a list of volumes, report rate trends
g2              estimate the pair-clustering diagnostic for one experiment
extremal-index  estimate the extremal index for one experiment

A config is a single JSON document (one experiment per file); a list of
volumes switches to trend mode.  All outputs carry the master seed and the
package version.  Exit codes: 0 success, 1 config error, 2 acceptance-check
violation (with --check), 3 resource limit.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__, laws
from .harness import (
    ExperimentConfig,
    ExperimentRun,
    chen_stein_gap,
    estimate_extremal_index,
    estimate_g2,
    exceedance_counts,
    exceedance_point_process,
    ks_distance,
    resolve_threads,
    run_experiment,
)
from .laws import ConstantsStore, GaussPoissonParams
from .pointprocess import ResourceLimitError

FLOAT_FMT = "%.17g"


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if "experiment" not in raw:
        raise ConfigError("config must name an experiment")
    if raw["experiment"] not in laws.EXPERIMENTS:
        raise ConfigError(f"unknown experiment {raw['experiment']!r}")
    if "rho" not in raw or "replications" not in raw or "master_seed" not in raw:
        raise ConfigError("config needs rho, replications and master_seed")
    gp = raw.get("gauss_poisson")
    if (raw["experiment"] == "gp_max_inradius") != (gp is not None):
        raise ConfigError("gauss_poisson parameters are required exactly for gp_max_inradius")
    return raw


def _resolve_constants(raw: dict, store: ConstantsStore):
    """Monte Carlo coefficients: explicit config value, then cache, then estimate."""
    exp = raw["experiment"]
    given = raw.get("constants", {})
    farthest = flower = None
    if exp == "voronoi_min_farthest":
        if "min_farthest_coeff" in given:
            farthest = float(given["min_farthest_coeff"])
        else:
            cached = store.get_mc("min_farthest_coeff_d2")
            if cached is None:
                cached = laws.alpha_d4_estimate(
                    mc_samples=int(raw.get("alpha_mc_samples", 2_000_000)),
                    seed=int(raw.get("alpha_mc_seed", 101)),
                )
                store.put_mc("min_farthest_coeff_d2", cached)
            farthest = cached.value
    if exp == "voronoi_min_flower":
        if "min_flower_coeff" in given:
            flower = float(given["min_flower_coeff"])
        else:
            cached = store.get_mc("min_flower_coeff_d2")
            if cached is None:
                from .voronoi import estimate_neighbor_pmf

                pmf, n_cells = estimate_neighbor_pmf(
                    n_cells_target=int(raw.get("pmf_cells", 1_000_000)),
                    seed=int(raw.get("pmf_seed", 202)),
                )
                cached = laws.alpha_d5_estimate(pmf, n_cells)
                store.put_mc("min_flower_coeff_d2", cached)
                store.put("voronoi_neighbor_pmf_d2",
                          {"pmf": {str(k): v for k, v in pmf.items()}, "n_cells": n_cells})
            flower = cached.value
    return farthest, flower


def build_experiment_config(raw: dict, rho: float, seed_override=None,
                            threads=None) -> ExperimentConfig:
    gp = raw.get("gauss_poisson")
    gp_params = (
        GaussPoissonParams(
            parent_intensity=float(gp["parent_intensity"]),
            p0=float(gp["p0"]), p1=float(gp["p1"]), p2=float(gp["p2"]),
        )
        if gp
        else None
    )
    store = ConstantsStore()
    farthest, flower = _resolve_constants(raw, store)
    return ExperimentConfig(
        experiment=raw["experiment"],
        rho=float(rho),
        replications=int(raw["replications"]),
        master_seed=int(seed_override if seed_override is not None else raw["master_seed"]),
        d=int(raw.get("d", 2)),
        margin=raw.get("margin"),
        score_cap_tau=float(raw.get("score_cap_tau", 32.0)),
        flower_mc_points=int(raw.get("flower_mc_points", 20_000)),
        flower_screen_points=int(raw.get("flower_screen_points", 2_000)),
        gp_params=gp_params,
        min_farthest_coeff=farthest,
        min_flower_coeff=flower,
        threads=resolve_threads(threads if threads is not None else raw.get("threads")),
    )


# ---------------------------------------------------------------------------
# Result assembly and writers
# ---------------------------------------------------------------------------


def summarize_run(run: ExperimentRun, raw: dict) -> dict:
    family = run.family()
    order = run.order_statistics(int(raw.get("order_max", 3)))
    extremes = order[:, 0]
    finite = extremes[~np.isnan(extremes)]
    out = {
        "experiment": run.config.experiment,
        "d": run.config.d,
        "rho": run.config.rho,
        "replications": run.config.replications,
        "master_seed": run.config.master_seed,
        "version": __version__,
        "grid": {
            "n_side": run.grid.n_side,
            "n_cubes": run.grid.n_cubes,
            "cube_side": run.grid.cube_side,
            "dependency_range": run.grid.dependency_range,
        },
        "mode": run.mode,
        "storage_floor_t": run.floor_t,
        "n_cells_mean": run.mean_cells(),
        "order_statistics": [[None if math.isnan(v) else v for v in row] for row in order],
        "extreme_mean": float(np.mean(finite)) if len(finite) else None,
        "extreme_std": float(np.std(finite, ddof=1)) if len(finite) > 1 else None,
        "ks_limit": ks_distance(finite, family.limit_cdf) if len(finite) > 1 else None,
    }
    t_grid = raw.get("t_grid")
    if t_grid and run.reps:
        counts = {"t": list(map(float, t_grid)), "U_mean": [], "Uprime_mean": [],
                  "chen_stein_gap_r1": []}
        for t in t_grid:
            us, ups = [], []
            for rep in run.reps:
                u, up = exceedance_counts(run, rep, float(t))
                us.append(u)
                ups.append(up)
            counts["U_mean"].append(float(np.mean(us)))
            counts["Uprime_mean"].append(float(np.mean(ups)))
            counts["chen_stein_gap_r1"].append(
                chen_stein_gap(run, r=1, t=float(t)).gap)
        out["exceedances"] = counts
    taus = raw.get("taus")
    if taus and len(run.reps) >= 2:
        from .harness import DivergenceError

        thetas = {}
        for tau in taus:
            try:
                est = estimate_extremal_index(run, float(tau))
            except DivergenceError:
                thetas[str(tau)] = None
                continue
            thetas[str(tau)] = {
                "theta": est.theta, "ci_low": est.ci_low, "ci_high": est.ci_high,
                "p_hat": est.p_hat, "n": est.n,
            }
        out["extremal_index"] = thetas
    return out


def write_json_atomic(payload: dict, path: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


def write_csv(path: str, header: list[str], rows) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(
                FLOAT_FMT % v if isinstance(v, float) else str(v) for v in row
            ) + "\n")


def write_phi_csv(run: ExperimentRun, path: str) -> None:
    """Exceedance point process of every replication as (rep, x, y, score)."""
    rows = []
    for rep in run.reps:
        nuclei, scores = exceedance_point_process(run, rep)
        for (x, y), s in zip(nuclei, scores):
            rows.append((rep.rep_index, float(x), float(y), float(s)))
    write_csv(path, ["rep", "x", "y", "score"], rows)


def write_cell_csvs(raw: dict, config: ExperimentConfig, out_dir: str) -> list[str]:
    """Per-cell dumps of the first replication (tessellation-level detail)."""
    from .delaunay import delaunay_cells_in_window, triangulate
    from .pointprocess import Region, derive_seed, sample_poisson
    from .voronoi import interior_site_mask, neighbor_functionals

    family = laws.threshold_family(
        config.experiment, config.d, gp_params=config.gp_params,
        min_farthest_coeff=config.min_farthest_coeff or 1.0,
        min_flower_coeff=config.min_flower_coeff or 1.0,
    )
    side = config.rho ** 0.5
    delta = laws.constants(config.d).circumradius_rate
    margin = config.margin or 4.0 * math.sqrt(math.log(config.rho) / delta)
    region = Region.square(side, padding=margin)
    seed = derive_seed(config.master_seed, 0)
    paths = []
    if family.tessellation == "pdt":
        sample = sample_poisson(region, family.intensity, seed)
        t = triangulate(sample)
        table = delaunay_cells_in_window(t, region)
        path = os.path.join(out_dir, "triangulation.csv")
        write_csv(path, ["triangle", "v0", "v1", "v2", "cx", "cy", "circumradius", "area"],
                  ((int(i), int(t.simplices[i, 0]), int(t.simplices[i, 1]),
                    int(t.simplices[i, 2]), float(t.circumcenters[i, 0]),
                    float(t.circumcenters[i, 1]), float(t.circumradii[i]),
                    float(t.areas[i])) for i in table.triangle_ids))
        paths.append(path)
    elif family.tessellation == "pvt":
        sample = sample_poisson(region, 1.0, seed)
        t = triangulate(sample)
        mask = interior_site_mask(t, region, shrink=margin / 2.0)
        counts, far, halfnn = neighbor_functionals(t)
        path = os.path.join(out_dir, "voronoi_cells.csv")
        write_csv(path, ["x", "y", "inradius", "farthest", "neighbors", "bounded"],
                  ((float(p[0]), float(p[1]), float(r), float(d), int(n), 1)
                   for p, r, d, n in zip(t.points[mask], halfnn[mask], far[mask],
                                         counts[mask])))
        paths.append(path)
    return paths


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_laws(args) -> int:
    d = args.d
    law = laws.constants(d)
    rows = [
        ("dimension", float(law.d)),
        ("unit_ball_volume", law.unit_ball_volume),
        ("site_intensity", law.site_intensity),
        ("circumradius_rate", law.circumradius_rate),
        ("typical_cell_norm", law.typical_cell_norm),
        ("min_circumradius_coeff", law.min_circumradius_coeff),
        ("max_circumradius_coeff", law.max_circumradius_coeff),
    ]
    if law.max_area_rate is not None:
        rows.append(("max_area_rate", law.max_area_rate))
        rows.append(("min_area_coeff", law.min_area_coeff))
    if d <= 3:
        rows.append(("max_circumradius_extremal_index",
                     laws.extremal_index_delaunay_max_R(d)))
    for name, value in rows:
        print(f"{name:32s} {value:.12g}")
    if args.out:
        write_csv(os.path.join(args.out, f"constants_d{d}.csv"),
                  ["constant", "value"], rows)
    if args.experiment:
        if args.experiment in ("voronoi_min_farthest", "voronoi_min_flower"):
            print("(Monte Carlo coefficient experiments: run the estimator first)")
            return 0
        gp = (GaussPoissonParams(2.0 / 3.0, 0.0, 0.5, 0.5)
              if args.experiment == "gp_max_inradius" else None)
        family = laws.threshold_family(args.experiment, d, gp_params=gp)
        grid = np.linspace(*((0.0, 3.0) if family.mode == "min" else (-2.0, 4.0)), 13)
        print(f"\n{args.experiment}: mode={family.mode} theta={family.theta:.6g}")
        print(f"{'t':>8s} {'tau(t)':>12s} {'limit_cdf':>12s}")
        cdf_rows = []
        for t in grid:
            tau = family.tau(float(t))
            cdf = float(family.limit_cdf(float(t)))
            print(f"{t:8.3f} {tau:12.6g} {cdf:12.6g}")
            cdf_rows.append((float(t), tau, cdf))
        if args.out:
            write_csv(os.path.join(args.out, f"{args.experiment}_limit_d{d}.csv"),
                      ["t", "tau", "limit_cdf"], cdf_rows)
    return 0


def cmd_run(args) -> int:
    raw = load_config(args.config)
    rhos = raw["rho"] if isinstance(raw["rho"], list) else [raw["rho"]]
    if len(rhos) != 1:
        print("config lists several volumes; use the trend subcommand", file=sys.stderr)
        return 1
    config = build_experiment_config(raw, rhos[0], args.seed, args.threads)
    run = run_experiment(config)
    payload = summarize_run(run, raw)
    payload["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime())
    out_dir = args.out or raw.get("out_dir", ".")
    result_path = os.path.join(out_dir, f"{config.experiment}_results.json")
    write_json_atomic(payload, result_path)
    print(f"wrote {result_path}")
    if raw.get("phi_csv") and run.family().affine:
        phi_path = os.path.join(out_dir, f"{config.experiment}_phi.csv")
        write_phi_csv(run, phi_path)
        print(f"wrote {phi_path}")
    if raw.get("dump_cells"):
        for p in write_cell_csvs(raw, config, out_dir):
            print(f"wrote {p}")
    if args.check:
        check = raw.get("check", {})
        max_ks = check.get("max_ks")
        if max_ks is not None and payload["ks_limit"] is not None:
            if payload["ks_limit"] > float(max_ks):
                print(f"CHECK FAILED: ks {payload['ks_limit']:.4f} > {max_ks}")
                return 2
            print(f"CHECK OK: ks {payload['ks_limit']:.4f} <= {max_ks}")
    return 0


def _trend_verdict(values: list[float], stderrs: list[float] | None = None) -> str:
    """Classify a sequence as decreasing, flat or non-vanishing.

    Decreasing means strictly monotone down; flat means total relative
    variation below 20 percent; non-vanishing means the last value stays
    above half the first.
    """
    v = list(values)
    if all(b < a for a, b in zip(v, v[1:])):
        return "decreasing"
    vmax = max(abs(x) for x in v) or 1.0
    if (max(v) - min(v)) / vmax < 0.2:
        return "flat"
    if v[-1] > 0.5 * v[0]:
        return "non-vanishing"
    return "mixed"


def cmd_trend(args) -> int:
    raw = load_config(args.config)
    rhos = raw["rho"] if isinstance(raw["rho"], list) else [raw["rho"]]
    if len(rhos) < 3:
        print("trend mode needs at least 3 volumes", file=sys.stderr)
        return 1
    g2_conf = raw.get("g2", {})
    gap_conf = raw.get("chen_stein", {})
    r = int(gap_conf.get("r", 1))
    tau = float(gap_conf.get("tau", 1.0))
    rows = []
    for rho in rhos:
        config = build_experiment_config(raw, rho, args.seed, args.threads)
        run = run_experiment(config)
        family = run.family()
        t = family.t_at_tau(tau)
        gap = chen_stein_gap(run, r=r, t=t,
                             control_variate=bool(gap_conf.get("control_variate", False)))
        extremes = run.extremes()
        finite = extremes[~np.isnan(extremes)]
        ks = ks_distance(finite, family.limit_cdf)
        g2 = estimate_g2(config, t=family.t_at_tau(float(g2_conf.get("tau", 1.0))),
                         n_patches=int(g2_conf.get("n_patches", 400)),
                         threads=config.threads)
        rows.append({"rho": rho, "chen_stein_gap": gap.gap, "gap_stderr": gap.stderr,
                     "g2": g2.value, "g2_stderr": g2.stderr, "ks": ks})
        print(f"rho={rho:.3g}: gap={gap.gap:.5f} (+-{gap.stderr:.5f}) "
              f"G2={g2.value:.4f} (+-{g2.stderr:.4f}) KS={ks:.4f}")
    verdict_gap = _trend_verdict([r_["chen_stein_gap"] for r_ in rows])
    verdict_g2 = _trend_verdict([r_["g2"] for r_ in rows])
    print(f"chen-stein gap trend: {verdict_gap}")
    print(f"pair diagnostic trend: {verdict_g2}")
    out_dir = args.out or raw.get("out_dir", ".")
    payload = {"experiment": raw["experiment"], "master_seed": raw["master_seed"],
               "version": __version__, "rows": rows,
               "verdicts": {"chen_stein_gap": verdict_gap, "g2": verdict_g2}}
    write_json_atomic(payload, os.path.join(out_dir, f"{raw['experiment']}_trend.json"))
    return 0


def cmd_g2(args) -> int:
    raw = load_config(args.config)
    rho = raw["rho"] if not isinstance(raw["rho"], list) else raw["rho"][0]
    config = build_experiment_config(raw, rho, args.seed, args.threads)
    g2_conf = raw.get("g2", {})
    family = laws.threshold_family(
        config.experiment, config.d, gp_params=config.gp_params,
        min_farthest_coeff=config.min_farthest_coeff,
        min_flower_coeff=config.min_flower_coeff)
    t = family.t_at_tau(float(g2_conf.get("tau", 1.0)))
    est = estimate_g2(config, t=t, n_patches=int(g2_conf.get("n_patches", 400)),
                      threads=config.threads)
    print(f"G2({config.experiment}, rho={rho:.3g}, tau={g2_conf.get('tau', 1.0)}) = "
          f"{est.value:.5f} +- {est.stderr:.5f}  ({est.n_patches} patches)")
    return 0


def cmd_extremal_index(args) -> int:
    raw = load_config(args.config)
    rho = raw["rho"] if not isinstance(raw["rho"], list) else raw["rho"][0]
    config = build_experiment_config(raw, rho, args.seed, args.threads)
    run = run_experiment(config)
    for tau in raw.get("taus", [1.0]):
        est = estimate_extremal_index(run, float(tau))
        print(f"theta(tau={tau}) = {est.theta:.4f}  ci95 [{est.ci_low:.4f}, {est.ci_high:.4f}]"
              f"  p_hat={est.p_hat:.4f} n={est.n}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="tess-extremes",
        description="Monte Carlo verification of tessellation extreme-value laws",
    )
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    pl = sub.add_parser("laws", help="print analytic constants and law grids")
    pl.add_argument("--d", type=int, default=2)
    pl.add_argument("--experiment", choices=laws.EXPERIMENTS)
    pl.add_argument("--out", help="directory for CSV output")
    pl.set_defaults(func=cmd_laws)

    for name, fn, extra in (
        ("run", cmd_run, True),
        ("trend", cmd_trend, False),
        ("g2", cmd_g2, False),
        ("extremal-index", cmd_extremal_index, False),
    ):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--seed", type=int, help="override the config master seed")
        sp.add_argument("--threads", type=int)
        sp.add_argument("--out", help="output directory")
        if extra:
            sp.add_argument("--check", action="store_true",
                            help="exit 2 when the config's check block fails")
        sp.set_defaults(func=fn)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
