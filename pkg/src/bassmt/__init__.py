"""Bass martingales for discrete marginals in convex order.

The solver finds the convex potential v and seed law alpha with
grad(v * gamma)(alpha) = mu and grad v(alpha * gamma) = nu; the Bass
martingale is then M_t = grad(v * gamma^(1-t))(B_t) for Brownian B
started at alpha. Duality certificates, path simulation, and the
stretched Brownian transport value come with it.
"""

from .convexfn import (
    AnalyticConvex,
    MaxAffine,
    QuadratureRule,
    default_rule,
    parse_quad_spec,
    smooth_eval,
    smoothed_grad_inverse,
)
from .dualeval import DualCertificate, dual_value, relaxed_dual, rho_psi
from .errors import (
    BassmtError,
    DimensionError,
    InfeasibleError,
    MaxIterationsError,
    NotConvexOrderError,
    NotIrreducibleError,
    OutOfRangeError,
    QuadratureError,
    RankError,
)
from .martingale import (
    FunctionalEstimates,
    PathEnsemble,
    check_boundary,
    check_martingale,
    estimate_functionals,
    forward_construct,
    kernel,
    sample_paths,
    write_paths_csv,
)
from .measures import (
    DiscreteMeasure,
    MartingaleCoupling,
    QuantileFunction,
    check_convex_order,
    check_irreducible,
    find_mt_coupling,
    read_measure_csv,
    wasserstein2_1d,
    write_measure_csv,
)
from .solver import (
    BassSolution,
    MonotoneTable,
    SolverOptions,
    duality_gap_report,
    solve_bass_1d,
    solve_bass_nd,
)
from .transport import gaussian_cell_masses, mcov_bass_kernel, mcov_discrete

__version__ = "0.1.0"

__all__ = [
    "AnalyticConvex",
    "BassSolution",
    "BassmtError",
    "DimensionError",
    "DiscreteMeasure",
    "DualCertificate",
    "FunctionalEstimates",
    "InfeasibleError",
    "MartingaleCoupling",
    "MaxAffine",
    "MaxIterationsError",
    "MonotoneTable",
    "NotConvexOrderError",
    "NotIrreducibleError",
    "OutOfRangeError",
    "PathEnsemble",
    "QuadratureError",
    "QuadratureRule",
    "QuantileFunction",
    "RankError",
    "SolverOptions",
    "check_boundary",
    "check_convex_order",
    "check_irreducible",
    "check_martingale",
    "default_rule",
    "dual_value",
    "duality_gap_report",
    "estimate_functionals",
    "find_mt_coupling",
    "forward_construct",
    "gaussian_cell_masses",
    "kernel",
    "mcov_bass_kernel",
    "mcov_discrete",
    "parse_quad_spec",
    "read_measure_csv",
    "relaxed_dual",
    "rho_psi",
    "sample_paths",
    "smooth_eval",
    "smoothed_grad_inverse",
    "solve_bass_1d",
    "solve_bass_nd",
    "wasserstein2_1d",
    "write_measure_csv",
    "write_paths_csv",
]
