"""Synchronous control loop: predict, build the NPVO, pick a velocity, step.

One tick covers: every agent observes every other entity's history, trains
and predicts through its own per-pair pipeline, assembles the multi-entity
velocity obstacle, and selects the feasible velocity nearest its desired
one; scripted obstacles advance along their closed-form trajectories.  All
entities then move together under p_{k+1} = p_k + v_k * dt.

Nothing aborts on INFEASIBLE: the min-penetration velocity is applied and
the flag is recorded in the trace.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from ..predictor import (
    ConstantVelocityBaseline,
    LearnedPredictor,
    ObservationHistory,
)
from ..velocity_obstacles import build_multi_agent_npvo, find_safe_velocity
from .scenario import ScenarioConfig
from .trace import StepData, TraceRecord, metrics_from_trace


@dataclass(frozen=True)
class CollisionEvent:
    step: int
    name_a: str
    name_b: str
    distance: float


def collision_check(trace: TraceRecord, safety_radius: float) -> list:
    """Every (step, pair) with strictly sub-threshold separation."""
    events = []
    for k in range(trace.n_steps + 1):
        for a, b in trace.monitored_pairs():
            d = trace.pair_distance(a, b, k)
            if d < safety_radius:
                events.append(
                    CollisionEvent(step=k, name_a=a, name_b=b, distance=d)
                )
    return events


def _desired_velocity(position, goal, v_max, goal_tolerance, dt):
    direction = goal - position
    dist = float(np.hypot(direction[0], direction[1]))
    if dist <= goal_tolerance:
        return np.zeros(2)
    speed = min(v_max, dist / dt)
    return direction * (speed / dist)


def _build_pipeline(cfg: ScenarioConfig, rng: np.random.Generator):
    if cfg.predictor_kind == "const":
        return ConstantVelocityBaseline(horizon=cfg.horizon, gamma=cfg.gamma)
    pred_cfg = dataclasses.replace(
        cfg.predictor_config,
        variant=cfg.predictor_kind,
        horizon=cfg.horizon,
        gamma=cfg.gamma,
    )
    return LearnedPredictor(pred_cfg, rng)


def run_scenario(cfg: ScenarioConfig) -> tuple:
    """Run the full loop for cfg.n_steps ticks; returns (trace, metrics)."""
    names = [a.name for a in cfg.agents] + [o.name for o in cfg.obstacles]
    kinds = {a.name: "agent" for a in cfg.agents}
    kinds.update({o.name: "obstacle" for o in cfg.obstacles})
    agents = {a.name: a for a in cfg.agents}
    policies = {o.name: o.policy for o in cfg.obstacles}

    n = cfg.n_steps
    positions = {}
    for a in cfg.agents:
        positions[a.name] = np.zeros((n + 1, 2))
        positions[a.name][0] = a.start
    for o in cfg.obstacles:
        positions[o.name] = np.zeros((n + 1, 2))
        positions[o.name][0] = o.policy.position(0)
    velocities = {name: np.zeros((n + 1, 2)) for name in names}

    # Independent pipeline + rng per (observer, observed) pair, all derived
    # from the master seed and the stable entity ordering.
    pipelines = {}
    pair_rngs = {}
    for i, agent_name in enumerate(names):
        if kinds[agent_name] != "agent":
            continue
        for j, other in enumerate(names):
            if other == agent_name:
                continue
            rng = np.random.default_rng([int(cfg.master_seed), i, j])
            pipelines[(agent_name, other)] = _build_pipeline(cfg, rng)
            pair_rngs[(agent_name, other)] = rng

    steps = []
    for k in range(n):
        data = StepData()
        applied = {}
        for agent_name, spec in agents.items():
            p_agent = positions[agent_name][k]
            predictions = []
            for other in names:
                if other == agent_name:
                    continue
                history = ObservationHistory(
                    positions=positions[other][: k + 1].copy(), dt=cfg.dt
                )
                dist = pipelines[(agent_name, other)].observe_and_predict(
                    history, pair_rngs[(agent_name, other)]
                )
                if dist is not None:
                    predictions.append(dist)
                    data.predictions[(agent_name, other)] = dist
            v_des = _desired_velocity(
                p_agent, spec.goal, spec.v_max, cfg.goal_tolerance, cfg.dt
            )
            data.desired[agent_name] = v_des
            if predictions:
                npvo = build_multi_agent_npvo(
                    p_agent, predictions, cfg.safety_radius, cfg.dt
                )
                result = find_safe_velocity(
                    npvo, v_des, spec.v_max, cfg.solver_params
                )
                applied[agent_name] = result.velocity
                data.feasible[agent_name] = result.feasible
            else:
                applied[agent_name] = v_des
                data.feasible[agent_name] = True

        for name, policy in policies.items():
            # Velocity that lands exactly on the scripted next position.
            applied[name] = (policy.position(k + 1) - positions[name][k]) / cfg.dt

        for name in names:
            velocities[name][k] = applied[name]
            positions[name][k + 1] = positions[name][k] + applied[name] * cfg.dt
        steps.append(data)

    trace = TraceRecord(
        dt=cfg.dt,
        safety_radius=cfg.safety_radius,
        names=names,
        kinds=kinds,
        goals={a.name: a.goal.copy() for a in cfg.agents},
        goal_tolerance=cfg.goal_tolerance,
        positions=positions,
        velocities=velocities,
        steps=steps,
    )
    return trace, metrics_from_trace(trace)


def conditional_safety_violations(trace: TraceRecord) -> list:
    """Collision events that contradict the feasibility + containment premise.

    A collision between A and B at step s is excusable only when, for every
    agent side of the pair, the tick before either reported INFEASIBLE or
    had a prediction of the other that missed the realized motion somewhere
    over the full horizon.  Events returned here falsify the conservative
    construction; an empty list is the expected outcome.
    """
    events = collision_check(trace, trace.safety_radius)
    violations = []
    for event in events:
        if event.step < 1:
            continue
        tick = event.step - 1
        for observer, observed in (
            (event.name_a, event.name_b),
            (event.name_b, event.name_a),
        ):
            if trace.kinds[observer] != "agent":
                continue
            data = trace.steps[tick]
            if not data.feasible.get(observer, False):
                continue
            prediction = data.predictions.get((observer, observed))
            if prediction is None:
                continue
            m = len(prediction.ellipsoids)
            if tick + m > trace.n_steps:
                continue
            contained = all(
                prediction.ellipsoids[j].contains(
                    trace.positions[observed][tick + 1 + j]
                )
                for j in range(m)
            )
            if contained:
                violations.append((event, observer))
    return violations


def one_step_prediction_errors(trace: TraceRecord) -> dict:
    """Mean |predicted next position - realized| per (observer, observed)."""
    sums: dict = {}
    counts: dict = {}
    for k, data in enumerate(trace.steps):
        for (observer, observed), dist in data.predictions.items():
            predicted = dist.positions[0]
            realized = trace.positions[observed][k + 1]
            err = float(np.hypot(*(predicted - realized)))
            key = (observer, observed)
            sums[key] = sums.get(key, 0.0) + err
            counts[key] = counts.get(key, 0) + 1
    return {key: sums[key] / counts[key] for key in sums}
