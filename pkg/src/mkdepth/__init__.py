"""Transport-based statistical depth for multivariate data.

Center-outward ordering via exact optimal transport to a
spherical-uniform reference: fit once, then query depth values,
vector ranks and signs, quantile contours and depth regions.
"""

__version__ = "0.1.0"

from .depth import (
    DepthReport,
    FittedTransport,
    depth_region,
    eval_quantile,
    eval_rank,
    fit_transport,
    load_model,
    quantile_contour,
    rank_reports,
    save_model,
    tukey_depth_spherical,
)
from .measures import (
    DiscreteMeasure,
    ReferenceGrid,
    SyntheticFamily,
    load_csv,
    make_family,
    make_reference_grid,
    sample_spherical_uniform,
    save_csv,
)
from .metrics import ConvergenceRun, hausdorff, run_convergence, sup_error_on_band
from .otcore import Coupling, brute_force_ot, solve_assignment, solve_discrete_ot
from .potentials import PotentialPair, conjugate, recover_potentials
from .semidiscrete import SemiDiscreteSolution, assign_cells, solve_semidiscrete

__all__ = [
    "__version__",
    "Coupling",
    "ConvergenceRun",
    "DepthReport",
    "DiscreteMeasure",
    "FittedTransport",
    "PotentialPair",
    "ReferenceGrid",
    "SemiDiscreteSolution",
    "SyntheticFamily",
    "assign_cells",
    "brute_force_ot",
    "conjugate",
    "depth_region",
    "eval_quantile",
    "eval_rank",
    "fit_transport",
    "hausdorff",
    "load_csv",
    "load_model",
    "make_family",
    "make_reference_grid",
    "quantile_contour",
    "rank_reports",
    "recover_potentials",
    "run_convergence",
    "sample_spherical_uniform",
    "save_csv",
    "save_model",
    "solve_assignment",
    "solve_discrete_ot",
    "solve_semidiscrete",
    "sup_error_on_band",
    "tukey_depth_spherical",
]
