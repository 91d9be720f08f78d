"""Negative gradient flow of Morse functions on implicit manifolds.

The package finds and classifies critical points of a function
restricted to M = F^{-1}(0), integrates the flow and its linearization,
assembles the orbit connection graph, measures exponential shrinkage
rates against the limiting Hessian spectrum, and probes curvature
flow-invariance through parallel transport.
"""

from .catalog import ExpectedData, Scenario, list_scenarios, load_scenario, load_scenario_file
from .connectivity import (
    BasinReport,
    ConnectionGraph,
    ConstancyVerdict,
    OrbitEdge,
    basin_sample,
    build_connection_graph,
    check_connected,
    propagate_constancy,
)
from .flow import (
    FlowConfig,
    LengthBoundReport,
    Terminal,
    Trajectory,
    UnstableSeed,
    check_length_bound,
    integrate_flow,
    limit_point,
    unstable_seeds,
)
from .geometry import ImplicitManifold, TangentVector
from .linearization import (
    DecayReport,
    VariationalSeries,
    check_energy_ode,
    fit_decay_rate,
    integrate_variational,
    run_decay,
)
from .morse import (
    CriticalPoint,
    CriticalPointSet,
    GeometricConstants,
    find_critical_points,
    geometric_constants,
    intrinsic_hessian,
)
from .symbolics import SecondOrderJet, evaluate, evaluate_jet, parse, to_string
from .transport import (
    CurvatureSample,
    FlatnessReport,
    TransportedFrame,
    flatness_test,
    flow_invariance_defect,
    holonomy_curvature,
    lie_derivative_estimate,
    parallel_transport,
)

__version__ = "0.1.0"

__all__ = [
    "BasinReport",
    "ConnectionGraph",
    "ConstancyVerdict",
    "CriticalPoint",
    "CriticalPointSet",
    "CurvatureSample",
    "DecayReport",
    "ExpectedData",
    "FlatnessReport",
    "FlowConfig",
    "GeometricConstants",
    "ImplicitManifold",
    "LengthBoundReport",
    "OrbitEdge",
    "Scenario",
    "SecondOrderJet",
    "TangentVector",
    "Terminal",
    "Trajectory",
    "TransportedFrame",
    "UnstableSeed",
    "VariationalSeries",
    "basin_sample",
    "build_connection_graph",
    "check_connected",
    "check_energy_ode",
    "check_length_bound",
    "evaluate",
    "evaluate_jet",
    "find_critical_points",
    "fit_decay_rate",
    "flatness_test",
    "flow_invariance_defect",
    "geometric_constants",
    "holonomy_curvature",
    "integrate_flow",
    "integrate_variational",
    "intrinsic_hessian",
    "lie_derivative_estimate",
    "limit_point",
    "list_scenarios",
    "load_scenario",
    "load_scenario_file",
    "parallel_transport",
    "parse",
    "propagate_constancy",
    "run_decay",
    "to_string",
    "unstable_seeds",
]
