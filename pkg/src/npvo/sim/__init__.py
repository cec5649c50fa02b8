"""Discrete-time multi-entity world with NPVO-controlled agents."""

from .policies import (
    BehaviorSwitch,
    Circular,
    ConstantVelocity,
    GridRandomWalk,
    Oscillating,
    Replay,
    triangle_wave,
)
from .scenario import AgentSpec, ObstacleSpec, ScenarioConfig
from .trace import (
    RunMetrics,
    TraceRecord,
    load_trace_csv,
    metrics_from_trace,
    write_metrics_json,
    write_trace_csv,
)
from .world import (
    CollisionEvent,
    collision_check,
    conditional_safety_violations,
    one_step_prediction_errors,
    run_scenario,
)

__all__ = [
    "AgentSpec",
    "BehaviorSwitch",
    "Circular",
    "CollisionEvent",
    "ConstantVelocity",
    "GridRandomWalk",
    "ObstacleSpec",
    "Oscillating",
    "Replay",
    "RunMetrics",
    "ScenarioConfig",
    "TraceRecord",
    "collision_check",
    "conditional_safety_violations",
    "load_trace_csv",
    "metrics_from_trace",
    "one_step_prediction_errors",
    "run_scenario",
    "triangle_wave",
    "write_metrics_json",
    "write_trace_csv",
]
