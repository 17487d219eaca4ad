"""Minimal realizations and certified L2-gain brackets for graph-constrained
linear switching systems."""
from .dissipation import verify_dissipation
from .examples import PendulumParameters, build_delayed_control_example, build_pendulum_example
from .gain import (
    GainBracket,
    HorizonCertificate,
    converse_scaled_check,
    gain_bracket,
    horizon_upper_bound_feasible,
    lower_bound,
    upper_bound_bisect,
)
from .io import load_system, save_system
from .realization import is_minimal, minimize, reachable_subspaces, unobservable_subspaces
from .stability import Verdict, check_internal_stability, quadratic_cjsr_bound
from .storage import (
    QuadraticStorage,
    storage_matrix_direct,
    storage_matrix_dp,
    truncated_storage,
    worst_case_disturbance,
)
from .system import (
    EdgeSpec,
    NodeSpec,
    Path,
    SwitchingSystem,
    dual_system,
    enumerate_paths,
    lift_to_rectangular,
    path_matrices,
    subpath,
    validate_system,
)

__version__ = "0.1.0"
