"""YAML configuration loading with a strict, path-naming schema.

Unknown keys are hard errors that name the offending field (for example
``scenario.predictor_config.learning_rte``) so hyperparameter typos cannot
silently skew a run.  Bundled scenario files resolve by bare name.
"""

from __future__ import annotations

import importlib.resources
import os

import yaml

from .model_check import GridMotionModel, SprtConfig
from .predictor import PredictorConfig
from .sim.policies import (
    BehaviorSwitch,
    Circular,
    ConstantVelocity,
    GridRandomWalk,
    Oscillating,
    Replay,
)
from .sim.scenario import AgentSpec, ObstacleSpec, ScenarioConfig
from .velocity_obstacles import SolverParams


class ConfigError(Exception):
    """Invalid configuration; message names the offending field path."""


def _mapping(node, path: str) -> dict:
    if not isinstance(node, dict):
        raise ConfigError(f"{path}: expected a mapping")
    return node


def _check_keys(node: dict, allowed, path: str) -> None:
    unknown = sorted(set(node) - set(allowed))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}: unknown key")


def _number(node, path: str) -> float:
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ConfigError(f"{path}: expected a number")
    return float(node)


def _integer(node, path: str) -> int:
    if isinstance(node, bool) or not isinstance(node, int):
        raise ConfigError(f"{path}: expected an integer")
    return int(node)


def _string(node, path: str) -> str:
    if not isinstance(node, str):
        raise ConfigError(f"{path}: expected a string")
    return node


def _vec2(node, path: str):
    if not isinstance(node, (list, tuple)) or len(node) != 2:
        raise ConfigError(f"{path}: expected a 2-element list")
    return (_number(node[0], f"{path}[0]"), _number(node[1], f"{path}[1]"))


def _get(node: dict, key: str, path: str, required: bool = True, default=None):
    if key not in node:
        if required:
            raise ConfigError(f"{path}.{key}: required key missing")
        return default
    return node[key]


PREDICTOR_CONFIG_KEYS = (
    "hidden_dim", "keep_prob", "noise_variance", "huber_delta",
    "learning_rate", "n_iterations", "n_samples", "train_window",
    "cov_floor",
)


def _parse_predictor_config(node, path: str) -> dict:
    """Overrides for PredictorConfig; variant/gamma/horizon live elsewhere."""
    if node is None:
        return {}
    node = _mapping(node, path)
    _check_keys(node, PREDICTOR_CONFIG_KEYS, path)
    out = {}
    for key in ("hidden_dim", "n_iterations", "n_samples", "train_window"):
        if key in node:
            out[key] = _integer(node[key], f"{path}.{key}")
    for key in (
        "keep_prob", "noise_variance", "huber_delta", "learning_rate",
        "cov_floor",
    ):
        if key in node:
            out[key] = _number(node[key], f"{path}.{key}")
    return out


def _parse_solver(node, path: str) -> SolverParams:
    if node is None:
        return SolverParams()
    node = _mapping(node, path)
    _check_keys(node, ("n_angles", "n_speeds", "n_refinements"), path)
    kwargs = {
        key: _integer(node[key], f"{path}.{key}") for key in node
    }
    try:
        return SolverParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _segment_builder(spec: dict, path: str, dt: float):
    """Builder (start, start_step) -> policy for one behavior segment."""
    spec = _mapping(spec, path)
    kind = _string(_get(spec, "type", path), f"{path}.type")
    if kind == "constant_velocity":
        _check_keys(spec, ("type", "velocity"), path)
        velocity = _vec2(_get(spec, "velocity", path), f"{path}.velocity")
        return lambda start, k0: ConstantVelocity(start, velocity, dt=dt)
    if kind == "oscillating":
        _check_keys(
            spec,
            ("type", "axis", "amplitude", "period", "drift", "waveform"),
            path,
        )
        kwargs = dict(
            axis=_vec2(_get(spec, "axis", path), f"{path}.axis"),
            amplitude=_number(_get(spec, "amplitude", path), f"{path}.amplitude"),
            period=_number(_get(spec, "period", path), f"{path}.period"),
            drift=_vec2(
                _get(spec, "drift", path, required=False, default=[0.0, 0.0]),
                f"{path}.drift",
            ),
            waveform=_string(
                _get(spec, "waveform", path, required=False, default="triangle"),
                f"{path}.waveform",
            ),
            dt=dt,
        )
        return lambda start, k0: Oscillating(start, **kwargs)
    if kind == "circular":
        _check_keys(spec, ("type", "radius", "angular_rate", "phase0"), path)
        radius = _number(_get(spec, "radius", path), f"{path}.radius")
        rate = _number(_get(spec, "angular_rate", path), f"{path}.angular_rate")
        phase0 = _number(
            _get(spec, "phase0", path, required=False, default=0.0),
            f"{path}.phase0",
        )
        import numpy as np

        def build(start, k0, radius=radius, rate=rate, phase0=phase0):
            center = np.asarray(start, dtype=float) - radius * np.array(
                [np.cos(phase0), np.sin(phase0)]
            )
            return Circular(center, radius, rate, phase0=phase0, dt=dt)

        return build
    raise ConfigError(f"{path}.type: unknown segment type {kind!r}")


def _parse_policy(node, path: str, dt: float, master_seed: int, index: int):
    node = _mapping(node, path)
    kind = _string(_get(node, "type", path), f"{path}.type")
    try:
        if kind == "constant_velocity":
            _check_keys(node, ("type", "start", "velocity"), path)
            return ConstantVelocity(
                _vec2(_get(node, "start", path), f"{path}.start"),
                _vec2(_get(node, "velocity", path), f"{path}.velocity"),
                dt=dt,
            )
        if kind == "oscillating":
            _check_keys(
                node,
                ("type", "start", "axis", "amplitude", "period", "drift",
                 "waveform"),
                path,
            )
            return Oscillating(
                _vec2(_get(node, "start", path), f"{path}.start"),
                _vec2(_get(node, "axis", path), f"{path}.axis"),
                _number(_get(node, "amplitude", path), f"{path}.amplitude"),
                _number(_get(node, "period", path), f"{path}.period"),
                drift=_vec2(
                    _get(node, "drift", path, required=False, default=[0.0, 0.0]),
                    f"{path}.drift",
                ),
                waveform=_string(
                    _get(node, "waveform", path, required=False,
                         default="triangle"),
                    f"{path}.waveform",
                ),
                dt=dt,
            )
        if kind == "circular":
            _check_keys(
                node,
                ("type", "center", "radius", "angular_rate", "phase0"),
                path,
            )
            return Circular(
                _vec2(_get(node, "center", path), f"{path}.center"),
                _number(_get(node, "radius", path), f"{path}.radius"),
                _number(_get(node, "angular_rate", path), f"{path}.angular_rate"),
                phase0=_number(
                    _get(node, "phase0", path, required=False, default=0.0),
                    f"{path}.phase0",
                ),
                dt=dt,
            )
        if kind == "grid_random_walk":
            _check_keys(node, ("type", "start", "cell_size", "seed"), path)
            seed = _get(node, "seed", path, required=False)
            if seed is None:
                # Derived stream: stable under reordering of other entities.
                seed = (int(master_seed) * 1_000_003 + index) % (2**63)
            else:
                seed = _integer(seed, f"{path}.seed")
            return GridRandomWalk(
                _vec2(_get(node, "start", path), f"{path}.start"),
                _number(_get(node, "cell_size", path), f"{path}.cell_size"),
                seed=seed,
            )
        if kind == "replay":
            _check_keys(node, ("type", "positions"), path)
            positions = _get(node, "positions", path)
            if not isinstance(positions, list) or not positions:
                raise ConfigError(f"{path}.positions: expected a nonempty list")
            return Replay(
                [
                    _vec2(p, f"{path}.positions[{i}]")
                    for i, p in enumerate(positions)
                ]
            )
        if kind == "behavior_switch":
            _check_keys(node, ("type", "start", "switch_steps", "segments"), path)
            switch_steps = _get(node, "switch_steps", path)
            segments = _get(node, "segments", path)
            if not isinstance(switch_steps, list):
                raise ConfigError(f"{path}.switch_steps: expected a list")
            if not isinstance(segments, list) or not segments:
                raise ConfigError(f"{path}.segments: expected a nonempty list")
            builders = [
                _segment_builder(seg, f"{path}.segments[{i}]", dt)
                for i, seg in enumerate(segments)
            ]
            return BehaviorSwitch(
                _vec2(_get(node, "start", path), f"{path}.start"),
                builders,
                [
                    _integer(s, f"{path}.switch_steps[{i}]")
                    for i, s in enumerate(switch_steps)
                ],
            )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    raise ConfigError(f"{path}.type: unknown policy type {kind!r}")


SCENARIO_KEYS = (
    "n_steps", "dt", "safety_radius", "gamma", "horizon",
    "goal_tolerance", "master_seed", "predictor", "predictor_config",
    "solver", "agents", "obstacles",
)


def parse_scenario(doc: dict, source: str = "config") -> ScenarioConfig:
    root = _mapping(doc, source)
    _check_keys(root, ("scenario",), source)
    node = _mapping(_get(root, "scenario", source), f"{source}.scenario")
    path = f"{source}.scenario"
    _check_keys(node, SCENARIO_KEYS, path)

    dt = _number(_get(node, "dt", path, required=False, default=0.5), f"{path}.dt")
    master_seed = _integer(
        _get(node, "master_seed", path, required=False, default=0),
        f"{path}.master_seed",
    )

    agents = []
    agent_nodes = _get(node, "agents", path, required=False, default=[])
    if not isinstance(agent_nodes, list):
        raise ConfigError(f"{path}.agents: expected a list")
    for i, a in enumerate(agent_nodes):
        apath = f"{path}.agents[{i}]"
        a = _mapping(a, apath)
        _check_keys(a, ("name", "start", "goal", "v_max"), apath)
        try:
            agents.append(
                AgentSpec(
                    name=_string(_get(a, "name", apath), f"{apath}.name"),
                    start=_vec2(_get(a, "start", apath), f"{apath}.start"),
                    goal=_vec2(_get(a, "goal", apath), f"{apath}.goal"),
                    v_max=_number(
                        _get(a, "v_max", apath, required=False, default=1.0),
                        f"{apath}.v_max",
                    ),
                )
            )
        except ValueError as exc:
            raise ConfigError(f"{apath}: {exc}") from exc

    obstacles = []
    obstacle_nodes = _get(node, "obstacles", path, required=False, default=[])
    if not isinstance(obstacle_nodes, list):
        raise ConfigError(f"{path}.obstacles: expected a list")
    for i, o in enumerate(obstacle_nodes):
        opath = f"{path}.obstacles[{i}]"
        o = _mapping(o, opath)
        _check_keys(o, ("name", "policy"), opath)
        policy = _parse_policy(
            _get(o, "policy", opath), f"{opath}.policy", dt, master_seed, i
        )
        obstacles.append(
            ObstacleSpec(
                name=_string(_get(o, "name", opath), f"{opath}.name"),
                policy=policy,
            )
        )

    overrides = _parse_predictor_config(
        _get(node, "predictor_config", path, required=False),
        f"{path}.predictor_config",
    )
    try:
        predictor_config = PredictorConfig(**overrides)
        return ScenarioConfig(
            n_steps=_integer(_get(node, "n_steps", path), f"{path}.n_steps"),
            safety_radius=_number(
                _get(node, "safety_radius", path), f"{path}.safety_radius"
            ),
            agents=agents,
            obstacles=obstacles,
            dt=dt,
            gamma=_number(
                _get(node, "gamma", path, required=False, default=0.95),
                f"{path}.gamma",
            ),
            horizon=_integer(
                _get(node, "horizon", path, required=False, default=10),
                f"{path}.horizon",
            ),
            predictor_kind=_string(
                _get(node, "predictor", path, required=False, default="lstm"),
                f"{path}.predictor",
            ),
            predictor_config=predictor_config,
            solver_params=_parse_solver(
                _get(node, "solver", path, required=False), f"{path}.solver"
            ),
            master_seed=master_seed,
            goal_tolerance=_number(
                _get(node, "goal_tolerance", path, required=False, default=0.2),
                f"{path}.goal_tolerance",
            ),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


VERIFICATION_KEYS = (
    "name", "n_steps", "cell_size", "dt", "master_seed", "noise_variances",
    "thresholds", "gamma", "horizon", "predictor", "predictor_config", "sprt",
)


def parse_verification(doc: dict, source: str = "config") -> dict:
    """Returns the keyword arguments for verify_prediction_system."""
    root = _mapping(doc, source)
    _check_keys(root, ("verification",), source)
    node = _mapping(_get(root, "verification", source), f"{source}.verification")
    path = f"{source}.verification"
    _check_keys(node, VERIFICATION_KEYS, path)

    try:
        model = GridMotionModel(
            n_steps=_integer(
                _get(node, "n_steps", path, required=False, default=20),
                f"{path}.n_steps",
            ),
            cell_size=_number(
                _get(node, "cell_size", path, required=False, default=1.0),
                f"{path}.cell_size",
            ),
            dt=_number(
                _get(node, "dt", path, required=False, default=1.0),
                f"{path}.dt",
            ),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    nv_node = _get(
        node, "noise_variances", path, required=False,
        default=[0.0, 0.001, 0.01, 0.05],
    )
    th_node = _get(
        node, "thresholds", path, required=False,
        default=[0.75, 0.8, 0.85, 0.9],
    )
    if not isinstance(nv_node, list) or not nv_node:
        raise ConfigError(f"{path}.noise_variances: expected a nonempty list")
    if not isinstance(th_node, list) or not th_node:
        raise ConfigError(f"{path}.thresholds: expected a nonempty list")
    noise_variances = [
        _number(v, f"{path}.noise_variances[{i}]") for i, v in enumerate(nv_node)
    ]
    thresholds = [
        _number(v, f"{path}.thresholds[{i}]") for i, v in enumerate(th_node)
    ]

    sprt_node = _get(node, "sprt", path, required=False)
    sprt_kwargs = {}
    if sprt_node is not None:
        sprt_node = _mapping(sprt_node, f"{path}.sprt")
        _check_keys(
            sprt_node,
            ("indifference", "alpha", "beta", "max_samples"),
            f"{path}.sprt",
        )
        for key in ("indifference", "alpha", "beta"):
            if key in sprt_node:
                sprt_kwargs[key] = _number(sprt_node[key], f"{path}.sprt.{key}")
        if "max_samples" in sprt_node:
            sprt_kwargs["max_samples"] = _integer(
                sprt_node["max_samples"], f"{path}.sprt.max_samples"
            )

    kind = _string(
        _get(node, "predictor", path, required=False, default="lstm"),
        f"{path}.predictor",
    )
    if kind not in ("lstm", "rnn"):
        raise ConfigError(f"{path}.predictor: must be 'lstm' or 'rnn'")
    overrides = _parse_predictor_config(
        _get(node, "predictor_config", path, required=False),
        f"{path}.predictor_config",
    )
    try:
        predictor_config = PredictorConfig(
            variant=kind,
            gamma=_number(
                _get(node, "gamma", path, required=False, default=0.95),
                f"{path}.gamma",
            ),
            horizon=_integer(
                _get(node, "horizon", path, required=False, default=10),
                f"{path}.horizon",
            ),
            **overrides,
        )
        # Validate each threshold against the SPRT invariants eagerly.
        for theta in thresholds:
            SprtConfig(threshold=theta, **sprt_kwargs)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    return {
        "name": _string(
            _get(node, "name", path, required=False, default="verification"),
            f"{path}.name",
        ),
        "model": model,
        "predictor_config": predictor_config,
        "noise_variances": noise_variances,
        "thresholds": thresholds,
        "sprt_kwargs": sprt_kwargs,
        "master_seed": _integer(
            _get(node, "master_seed", path, required=False, default=0),
            f"{path}.master_seed",
        ),
    }


def bundled_scenario_names() -> list:
    base = importlib.resources.files("npvo") / "scenarios"
    return sorted(
        p.name[: -len(".yaml")] for p in base.iterdir() if p.name.endswith(".yaml")
    )


def resolve_config_path(spec: str) -> tuple:
    """Returns (text, display name) for a path or bundled scenario name."""
    if os.path.exists(spec):
        with open(spec) as fh:
            return fh.read(), os.path.splitext(os.path.basename(spec))[0]
    if os.sep not in spec:
        name = spec[: -len(".yaml")] if spec.endswith(".yaml") else spec
        resource = importlib.resources.files("npvo") / "scenarios" / f"{name}.yaml"
        if resource.is_file():
            return resource.read_text(), name
        known = ", ".join(bundled_scenario_names())
        raise ConfigError(
            f"no config file or bundled scenario named {spec!r}; "
            f"bundled scenarios: {known}"
        )
    raise ConfigError(f"config file not found: {spec}")


def load_yaml(text: str, source: str = "config") -> dict:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: invalid YAML ({exc})") from exc
    if doc is None:
        raise ConfigError(f"{source}: empty config")
    return doc
