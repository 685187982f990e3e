"""Transverse Kahler toolkit on the round S^3 -> CP^1 fibration.

Everything runs on the axisymmetric moment-coordinate reduction of the
regular Sasakian structure on S^3: basic potentials become functions of
x in [-1, 1], the reference transverse metric is the constant-curvature
one (Gauss curvature 4 on the quotient), and all measures are normalized
to probability measures.
"""

from .errors import (
    ConfigurationError,
    GridMismatchError,
    InadmissibleError,
    InvariantViolation,
    PreconditionError,
    ReebflowError,
    ResolutionError,
    SolverError,
)
from .transverse import (
    BasicPotential,
    Grid,
    MetricState,
    Model,
    admissibility,
    basic_laplacian,
    integrate,
    make_grid,
    metric_state,
    reference_state,
    spectrum,
    tanno_deform,
)
from .functionals import (
    FunctionalLedger,
    eval_F,
    eval_I,
    eval_J,
    eval_K_energy,
    random_potential,
    relative_state,
    verify_cocycle,
    verify_ij_sandwich,
    verify_mabuchi_f_relation,
)
from .continuity import (
    ContinuityPath,
    PathPolicy,
    ma_defect,
    ma_jacobian,
    mobius_potential,
    mt_scan,
    path_diagnostics,
    run_continuity_path,
    solve_ma_at_t,
)
from .flow import (
    FlowPolicy,
    epsilon_pinching,
    flow_rhs,
    holder_seminorm,
    run_flow,
    smoothing_monitors,
)
from .curvature import (
    calabi_bound,
    calabi_functional,
    pinch_estimates,
    q_norm_field,
    round_tensor_contractions,
    verify_round_characteristic_integrand,
)
from .verification import CheckResult, DEFAULT_SEED, verify_all

__version__ = "0.1.0"

__all__ = [
    "BasicPotential",
    "CheckResult",
    "ConfigurationError",
    "ContinuityPath",
    "DEFAULT_SEED",
    "FlowPolicy",
    "FunctionalLedger",
    "Grid",
    "GridMismatchError",
    "InadmissibleError",
    "InvariantViolation",
    "MetricState",
    "Model",
    "PathPolicy",
    "PreconditionError",
    "ReebflowError",
    "ResolutionError",
    "SolverError",
    "admissibility",
    "basic_laplacian",
    "calabi_bound",
    "calabi_functional",
    "epsilon_pinching",
    "eval_F",
    "eval_I",
    "eval_J",
    "eval_K_energy",
    "flow_rhs",
    "holder_seminorm",
    "integrate",
    "ma_defect",
    "ma_jacobian",
    "make_grid",
    "metric_state",
    "mobius_potential",
    "mt_scan",
    "path_diagnostics",
    "pinch_estimates",
    "q_norm_field",
    "random_potential",
    "reference_state",
    "relative_state",
    "round_tensor_contractions",
    "run_continuity_path",
    "run_flow",
    "smoothing_monitors",
    "solve_ma_at_t",
    "spectrum",
    "tanno_deform",
    "verify_all",
    "verify_cocycle",
    "verify_ij_sandwich",
    "verify_mabuchi_f_relation",
    "verify_round_characteristic_integrand",
    "__version__",
]
