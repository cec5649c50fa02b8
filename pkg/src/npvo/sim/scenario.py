"""Scenario configuration: entities, control loop constants, seeds."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..predictor import PredictorConfig
from ..velocity_obstacles import SolverParams

PREDICTOR_KINDS = ("lstm", "rnn", "const")


def _vec(value, name: str) -> np.ndarray:
    v = np.asarray(value, dtype=np.float64)
    if v.shape != (2,) or not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be a finite 2-vector")
    return v


@dataclass
class AgentSpec:
    """A controlled agent: goal-seeking desired velocity through the solver."""

    name: str
    start: np.ndarray
    goal: np.ndarray
    v_max: float = 1.0

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("agent name must be nonempty")
        self.start = _vec(self.start, "start")
        self.goal = _vec(self.goal, "goal")
        if self.v_max <= 0.0:
            raise ValueError("v_max must be positive")


@dataclass
class ObstacleSpec:
    """A scripted entity following a closed-form policy."""

    name: str
    policy: object

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("obstacle name must be nonempty")
        if not hasattr(self.policy, "position"):
            raise ValueError("policy must expose position(k)")


@dataclass
class ScenarioConfig:
    """Full description of one deterministic run.

    The scenario-level gamma and horizon are injected into the per-pair
    predictor configs so one knob controls every prediction in the run.
    """

    n_steps: int
    safety_radius: float
    agents: list = field(default_factory=list)
    obstacles: list = field(default_factory=list)
    dt: float = 0.5
    gamma: float = 0.95
    horizon: int = 10
    predictor_kind: str = "lstm"
    predictor_config: PredictorConfig = field(default_factory=PredictorConfig)
    solver_params: SolverParams = field(default_factory=SolverParams)
    master_seed: int = 0
    goal_tolerance: float = 0.2

    def __post_init__(self) -> None:
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.safety_radius <= 0.0:
            raise ValueError("safety_radius must be positive")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.predictor_kind not in PREDICTOR_KINDS:
            raise ValueError(f"predictor_kind must be one of {PREDICTOR_KINDS}")
        if self.goal_tolerance < 0.0:
            raise ValueError("goal_tolerance must be >= 0")
        if not self.agents and not self.obstacles:
            raise ValueError("scenario needs at least one entity")
        names = [a.name for a in self.agents] + [o.name for o in self.obstacles]
        if len(set(names)) != len(names):
            raise ValueError("entity names must be unique")
