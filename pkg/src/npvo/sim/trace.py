"""Run traces, aggregate metrics, and their versioned serializations.

Trace CSV: one row per (step, entity), float cells printed with %.17g so
identical runs serialize byte-for-byte.  Metrics JSON: one object with a
format tag.  Neither file records wall-clock time.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

TRACE_HEADER = "# npvo-trace v1"
TRACE_COLUMNS = (
    "step", "entity_id", "kind", "x", "y", "vx", "vy",
    "feasible", "min_dist_so_far",
)
METRICS_FORMAT = "npvo-metrics v1"


@dataclass
class StepData:
    """Per-tick control context kept in memory for post-hoc checks."""

    desired: dict = field(default_factory=dict)      # agent -> v_des (2,)
    feasible: dict = field(default_factory=dict)     # agent -> bool
    predictions: dict = field(default_factory=dict)  # (agent, other) -> dist


@dataclass
class TraceRecord:
    """Everything one run produced, in entity-major arrays."""

    dt: float
    safety_radius: float
    names: list            # entity order used everywhere
    kinds: dict            # name -> "agent" | "obstacle"
    goals: dict            # agent -> goal (2,)
    goal_tolerance: float
    positions: dict        # name -> (n_steps + 1, 2)
    velocities: dict       # name -> (n_steps + 1, 2); final row zeros
    steps: list            # list[StepData], length n_steps

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    def agent_names(self) -> list:
        return [n for n in self.names if self.kinds[n] == "agent"]

    def monitored_pairs(self) -> list:
        """Unordered entity pairs with at least one controlled agent."""
        pairs = []
        for i, a in enumerate(self.names):
            for b in self.names[i + 1:]:
                if self.kinds[a] == "agent" or self.kinds[b] == "agent":
                    pairs.append((a, b))
        return pairs

    def pair_distance(self, a: str, b: str, k: int) -> float:
        d = self.positions[a][k] - self.positions[b][k]
        return float(np.hypot(d[0], d[1]))


@dataclass
class RunMetrics:
    min_distance: float          # inf when no monitored pair exists
    collision_count: int         # steps at which some monitored pair < r_s
    goal_times: dict             # agent -> seconds or None
    path_deviation: dict         # agent -> sum |v - v_des| dt
    total_path_deviation: float

    def to_dict(self) -> dict:
        return {
            "format": METRICS_FORMAT,
            "min_distance": (
                None if math.isinf(self.min_distance) else self.min_distance
            ),
            "collision_count": self.collision_count,
            "goal_times": dict(self.goal_times),
            "path_deviation": dict(self.path_deviation),
            "total_path_deviation": self.total_path_deviation,
        }


def metrics_from_trace(trace: TraceRecord) -> RunMetrics:
    """Recompute every aggregate from the recorded run."""
    pairs = trace.monitored_pairs()
    n = trace.n_steps
    min_distance = math.inf
    collision_steps = set()
    for k in range(n + 1):
        for a, b in pairs:
            d = trace.pair_distance(a, b, k)
            min_distance = min(min_distance, d)
            if d < trace.safety_radius:
                collision_steps.add(k)

    goal_times = {}
    for name in trace.agent_names():
        goal_times[name] = None
        goal = trace.goals[name]
        for k in range(n + 1):
            delta = trace.positions[name][k] - goal
            if float(np.hypot(delta[0], delta[1])) <= trace.goal_tolerance:
                goal_times[name] = k * trace.dt
                break

    deviation = {}
    for name in trace.agent_names():
        total = 0.0
        for k in range(n):
            diff = trace.velocities[name][k] - trace.steps[k].desired[name]
            total += float(np.hypot(diff[0], diff[1])) * trace.dt
        deviation[name] = total

    return RunMetrics(
        min_distance=min_distance,
        collision_count=len(collision_steps),
        goal_times=goal_times,
        path_deviation=deviation,
        total_path_deviation=float(sum(deviation.values())),
    )


def _fmt(x: float) -> str:
    return "%.17g" % float(x)


def write_trace_csv(trace: TraceRecord, path) -> None:
    pairs = trace.monitored_pairs()
    min_so_far = math.inf
    with open(path, "w", newline="") as fh:
        fh.write(TRACE_HEADER + "\n")
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for k in range(trace.n_steps + 1):
            for a, b in pairs:
                min_so_far = min(min_so_far, trace.pair_distance(a, b, k))
            for name in trace.names:
                kind = trace.kinds[name]
                pos = trace.positions[name][k]
                vel = trace.velocities[name][k]
                if kind == "agent" and k < trace.n_steps:
                    feasible = "1" if trace.steps[k].feasible[name] else "0"
                else:
                    feasible = ""
                writer.writerow(
                    [
                        k, name, kind,
                        _fmt(pos[0]), _fmt(pos[1]),
                        _fmt(vel[0]), _fmt(vel[1]),
                        feasible, _fmt(min_so_far),
                    ]
                )


def load_trace_csv(path) -> dict:
    """Parse a trace file back into arrays keyed by entity name."""
    with open(path, newline="") as fh:
        header = fh.readline().rstrip("\n")
        if header != TRACE_HEADER:
            raise ValueError(
                f"unsupported trace version: {header!r} (this reader "
                f"understands {TRACE_HEADER!r})"
            )
        reader = csv.DictReader(fh)
        rows = list(reader)
    names: list = []
    kinds: dict = {}
    for row in rows:
        if row["entity_id"] not in kinds:
            names.append(row["entity_id"])
            kinds[row["entity_id"]] = row["kind"]
    n_steps = max(int(r["step"]) for r in rows)
    positions = {n: np.zeros((n_steps + 1, 2)) for n in names}
    velocities = {n: np.zeros((n_steps + 1, 2)) for n in names}
    feasible = {n: [None] * (n_steps + 1) for n in names}
    for row in rows:
        k = int(row["step"])
        name = row["entity_id"]
        positions[name][k] = (float(row["x"]), float(row["y"]))
        velocities[name][k] = (float(row["vx"]), float(row["vy"]))
        if row["feasible"] != "":
            feasible[name][k] = row["feasible"] == "1"
    return {
        "names": names,
        "kinds": kinds,
        "n_steps": n_steps,
        "positions": positions,
        "velocities": velocities,
        "feasible": feasible,
    }


def write_metrics_json(metrics: RunMetrics, path) -> None:
    with open(path, "w") as fh:
        json.dump(metrics.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
