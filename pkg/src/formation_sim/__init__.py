"""Distributed finite-time formation tracking of two-link planar manipulators.

A deterministic simulator for networks of torque-controlled two-link arms
that track a moving leader in a time-varying formation, plus the error
metrics, settle-time reports, and stability diagnostics used to verify the
closed loop's finite-time behavior.
"""
from .control import (
    Gains,
    NeighborInfo,
    NeighborView,
    ShapingFunction,
    derive_alpha2,
    estimator_rhs,
    estimator_settle_bound,
    inverse_dynamics_torque,
    reference_accel,
    sig_pow,
    views_from_state,
)
from .dynamics import (
    DEFAULT_PARAMS,
    LeaderSpec,
    ManipulatorParams,
    ManipulatorState,
    coriolis_matrix,
    forward_dynamics,
    gravity_vector,
    leader_state,
    mass_matrix,
)
from .errors import DivergenceError, ValidationError
from .formation import (
    Formation,
    FormationSchedule,
    center_formation,
    formation_at,
    validate_formation,
)
from .graph import (
    Topology,
    TopologySchedule,
    build_topology,
    leader_reachable,
    spectral_bounds,
    topology_at,
)
from .metrics import (
    ErrorSeries,
    HomogeneityReport,
    IntervalSettle,
    SettleReport,
    error_series,
    estimator_settle_time,
    homogeneity_residual,
    linearization_residual,
    lyapunov_series,
    necessity_check,
    settle_report,
)
from .sim import InitSpec, Scenario, SimState, TrajectoryLog, initial_state, run, step

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_PARAMS",
    "DivergenceError",
    "ErrorSeries",
    "Formation",
    "FormationSchedule",
    "Gains",
    "HomogeneityReport",
    "InitSpec",
    "IntervalSettle",
    "LeaderSpec",
    "ManipulatorParams",
    "ManipulatorState",
    "NeighborInfo",
    "NeighborView",
    "Scenario",
    "SettleReport",
    "ShapingFunction",
    "SimState",
    "Topology",
    "TopologySchedule",
    "TrajectoryLog",
    "ValidationError",
    "build_topology",
    "center_formation",
    "coriolis_matrix",
    "derive_alpha2",
    "error_series",
    "estimator_rhs",
    "estimator_settle_bound",
    "estimator_settle_time",
    "formation_at",
    "forward_dynamics",
    "gravity_vector",
    "homogeneity_residual",
    "initial_state",
    "inverse_dynamics_torque",
    "leader_reachable",
    "leader_state",
    "linearization_residual",
    "lyapunov_series",
    "mass_matrix",
    "necessity_check",
    "reference_accel",
    "run",
    "settle_report",
    "sig_pow",
    "spectral_bounds",
    "step",
    "topology_at",
    "validate_formation",
    "__version__",
]
