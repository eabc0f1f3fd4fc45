"""rtakit: multi-agent safety scenarios with pluggable runtime-assurance
switching logics and performance evaluation."""

from .agents import (
    AccAgent,
    AccParams,
    AgentModel,
    DubinsCarAgent,
    DubinsCarParams,
    DubinsPlaneAgent,
    DubinsPlaneParams,
    Mode,
)
from .config import ConfigError, config_from_dict, parse_scenario_config
from .evaluation import (
    Collector,
    EvalReport,
    ScenarioMetadata,
    build_report,
    computation_time_stats,
    controller_usage,
    distance_series,
    summary,
    ttc,
)
from .geometry import (
    Ball,
    DimensionMismatch,
    GeometryError,
    Hyperrectangle,
    PointSet,
    Polytope,
    ProjectionError,
    RelativeSetSpec,
    SetDef,
    box_distance,
    box_intersects,
    contains,
    distance,
    set_from_payload,
    update_relative,
)
from .rta import (
    ReachRta,
    RtaBinding,
    RtaError,
    RtaLogic,
    SimRta,
    compute_reach_boxes,
    forward_simulate,
    rta_switch,
)
from .scenario import (
    AgentSpec,
    Scenario,
    ScenarioConfig,
    ScenarioError,
    ScenarioRuntimeError,
    SimState,
    StaticSetSpec,
    build_scenario,
    execute,
    predict,
    snapshot,
)
from .trace import ExecutionTrace, TraceSchemaError, validate_trace_dict

__version__ = "0.1.0"
