"""Simulation library for extreme-value laws of stationary random tessellations.

Samples Poisson-Delaunay, Poisson-Voronoi and Gauss-Poisson Voronoi
tessellations, evaluates geometric functionals per cell, and checks the
analytic typical-cell laws, normalizing thresholds, limit distributions,
exceedance point processes and extremal indices at desk scale.
"""

__version__ = "0.1.0"

from .geom import (
    Circle,
    ConvexPolygon,
    circumcircle,
    convex_polygon_area,
    incircle,
    orient2d,
    triangle_area,
    two_disk_intersection_area,
    two_disk_union_area,
    two_triangle_union_bound_check,
)
from .harness import (
    ExperimentConfig,
    ExperimentRun,
    ScoreBox,
    SubcubeGrid,
    chen_stein_gap,
    estimate_extremal_index,
    estimate_g2,
    exceedance_counts,
    exceedance_point_process,
    ks_distance,
    poisson_pp_diagnostics,
    run_experiment,
)
from .laws import (
    EXPERIMENTS,
    GaussPoissonParams,
    LawSet,
    MCValue,
    ThresholdFamily,
    alpha_d4_estimate,
    alpha_d5_estimate,
    bessel_k_sixth,
    constants,
    delaunay_area_survival_2d,
    delaunay_circumradius_cdf,
    extremal_index_delaunay_max_R,
    flower_cdf,
    gp_palm_isolated,
    threshold_family,
    voronoi_inradius_survival,
)
from .pointprocess import (
    PointSample,
    Region,
    derive_seed,
    sample_gauss_poisson,
    sample_poisson,
)
from .delaunay import (
    Triangulation,
    delaunay_cells_in_window,
    empirical_neighbor_pairs,
    small_circumradius_cells,
    triangulate,
)
from .voronoi import (
    VoronoiCellRecord,
    farthest_neighbor_distance,
    flower_volume,
    inradius,
    neighbor_count,
    voronoi_cell,
)
