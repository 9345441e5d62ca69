"""Distributed worst-case barrier-function collision avoidance for surface
vessels: kinematic fleet simulation, a reusable safety filter, COLREGS-style
nominal behaviors, and a Monte Carlo scoring harness.
"""
from .behaviors import (
    CandidateGrid,
    ColregsParams,
    ContactEstimate,
    Role,
    WaypointGoal,
    blend,
    classify_role,
    cpa,
    waypoint_control,
)
from .cbf import (
    BarrierParams,
    ContactView,
    PairwiseConstraint,
    assemble_constraints,
    build_constraint,
    h_pair,
    lie_derivative_contact,
    lie_derivative_ego,
    zeta_min,
)
from .config import ConfigError, ScenarioConfig, default_scenario, load, with_overrides
from .dynamics import (
    ControlBounds,
    ControlInput,
    VehicleSpec,
    VehicleState,
    clamp,
    effective_rudder_limit,
    g_matrix,
    step,
    wrap_angle,
)
from .gateway import Gateway, serve_scenario
from .metrics import (
    EncounterGrid,
    MetricsSummary,
    bin_encounters,
    coverage_variance,
    score_efficiency,
    score_safety,
    summarize,
)
from .qp_filter import FilterResult, QpInternalError, QpWeights, solve_qp
from .qp_filter import filter as filter_control
from .sim import (
    MODES,
    POLICIES,
    CampaignResult,
    EncounterRecord,
    FleetContext,
    JoustConfig,
    LegEngine,
    LegResult,
    LegVehicleStats,
    run_campaign,
    run_leg,
    spawn_leg,
)

__all__ = [
    "BarrierParams",
    "CampaignResult",
    "CandidateGrid",
    "ColregsParams",
    "ConfigError",
    "ContactEstimate",
    "ContactView",
    "ControlBounds",
    "ControlInput",
    "EncounterGrid",
    "EncounterRecord",
    "FilterResult",
    "FleetContext",
    "Gateway",
    "JoustConfig",
    "LegEngine",
    "LegResult",
    "LegVehicleStats",
    "MODES",
    "MetricsSummary",
    "POLICIES",
    "PairwiseConstraint",
    "QpInternalError",
    "QpWeights",
    "Role",
    "ScenarioConfig",
    "VehicleSpec",
    "VehicleState",
    "WaypointGoal",
    "assemble_constraints",
    "bin_encounters",
    "blend",
    "build_constraint",
    "clamp",
    "classify_role",
    "coverage_variance",
    "cpa",
    "default_scenario",
    "effective_rudder_limit",
    "filter_control",
    "g_matrix",
    "h_pair",
    "lie_derivative_contact",
    "lie_derivative_ego",
    "load",
    "run_campaign",
    "run_leg",
    "score_efficiency",
    "score_safety",
    "serve_scenario",
    "solve_qp",
    "spawn_leg",
    "step",
    "summarize",
    "waypoint_control",
    "with_overrides",
    "wrap_angle",
    "zeta_min",
]

__version__ = "0.1.0"
