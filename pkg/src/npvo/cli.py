"""Command-line entry point.

Subcommands: simulate (scenario run -> trace CSV + metrics JSON), verify
(SPRT decision table), bounds (closed-form table, optional Monte-Carlo
validation), predict (one-shot train + predict on a delta CSV).  Every run
writes a manifest recording the resolved seed so it can be reproduced.

Exit codes: 0 clean, 2 invalid config or arguments, 3 collision detected
(simulate), 4 INFEASIBLE tick under --strict (simulate; collision wins when
both occur).
"""

from __future__ import annotations

import csv
import json
import os
import sys

import click
import numpy as np

from . import config as cfgmod
from .bounds import (
    BoundKind,
    BoundQuery,
    collision_bound,
    empirical_collision_rate,
    valid_queries,
)
from .model_check import SprtConfig, verify_prediction_system
from .predictor import (
    ConstantVelocityBaseline,
    LearnedPredictor,
    ObservationHistory,
    PredictorConfig,
)
from .sim import (
    collision_check,
    metrics_from_trace,
    run_scenario,
    write_metrics_json,
    write_trace_csv,
)

MANIFEST_FORMAT = "npvo-manifest v1"
REPORT_FORMAT = "npvo-verify v1"
BOUNDS_HEADER = "# npvo-bounds v1"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_COLLISION = 3
EXIT_INFEASIBLE = 4

_KIND_ALIASES = {
    "single": BoundKind.SINGLE_AGENT,
    "dual": BoundKind.DUAL_RECIPROCAL,
    "multi": BoundKind.MULTI_OBSTACLE,
    "reciprocal": BoundKind.N_RECIPROCAL,
}


def _fail(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_CONFIG)


def _output_dir(out, default_name: str, force: bool) -> str:
    if out is None:
        root = os.environ.get("NPVO_OUTPUT_ROOT", "npvo-out")
        out = os.path.join(root, default_name)
    if os.path.exists(out):
        if not force and os.listdir(out):
            _fail(
                f"output directory {out!r} already has contents; "
                "pass --force to overwrite"
            )
    else:
        os.makedirs(out)
    return out


def _write_manifest(out_dir, subcommand, config_spec, seed, outputs) -> None:
    manifest = {
        "format": MANIFEST_FORMAT,
        "subcommand": subcommand,
        "config": config_spec,
        "master_seed": seed,
        "outputs": sorted(outputs),
    }
    with open(os.path.join(out_dir, "run_manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


@click.group()
def main() -> None:
    """Obstacle-motion prediction, velocity-obstacle avoidance, checking."""


@main.command()
@click.option("--config", "config_spec", required=True,
              help="Scenario YAML path or bundled scenario name.")
@click.option("--out", default=None, help="Output directory.")
@click.option("--seed", default=None, type=int,
              help="Override the scenario master seed.")
@click.option("--predictor", default=None,
              type=click.Choice(["lstm", "rnn", "const"]),
              help="Override the scenario predictor.")
@click.option("--strict", is_flag=True,
              help="Exit 4 when any tick is INFEASIBLE.")
@click.option("--force", is_flag=True, help="Overwrite existing outputs.")
@click.option("--no-plot", is_flag=True, help="Skip figure rendering.")
def simulate(config_spec, out, seed, predictor, strict, force, no_plot):
    """Run one scenario; write trace, metrics, figures."""
    try:
        text, name = cfgmod.resolve_config_path(config_spec)
        scenario = cfgmod.parse_scenario(cfgmod.load_yaml(text, name), name)
        if seed is not None:
            scenario.master_seed = seed
        if predictor is not None:
            scenario.predictor_kind = predictor
    except cfgmod.ConfigError as exc:
        _fail(str(exc))

    out_dir = _output_dir(out, name, force)
    trace, metrics = run_scenario(scenario)
    events = collision_check(trace, scenario.safety_radius)
    infeasible_ticks = sum(
        1 for step in trace.steps for ok in step.feasible.values() if not ok
    )

    trace_path = os.path.join(out_dir, "trace.csv")
    metrics_path = os.path.join(out_dir, "metrics.json")
    write_trace_csv(trace, trace_path)
    write_metrics_json(metrics, metrics_path)
    outputs = ["trace.csv", "metrics.json"]
    if not no_plot:
        from . import plotting

        plotting.plot_trajectories(
            trace, events, os.path.join(out_dir, "trajectories.png")
        )
        plotting.plot_timeline(trace, os.path.join(out_dir, "timeline.png"))
        outputs += ["trajectories.png", "timeline.png"]
    _write_manifest(
        out_dir, "simulate", config_spec, scenario.master_seed, outputs
    )

    click.echo(
        f"steps={trace.n_steps} collisions={metrics.collision_count} "
        f"min_dist={metrics.min_distance:.3f} infeasible_ticks={infeasible_ticks}"
    )
    click.echo(f"outputs in {out_dir}")
    if events:
        sys.exit(EXIT_COLLISION)
    if strict and infeasible_ticks > 0:
        sys.exit(EXIT_INFEASIBLE)
    sys.exit(EXIT_OK)


@main.command()
@click.option("--config", "config_spec", required=True,
              help="Verification YAML path or bundled config name.")
@click.option("--out", default=None, help="Output directory.")
@click.option("--seed", default=None, type=int,
              help="Override the master seed.")
@click.option("--force", is_flag=True, help="Overwrite existing outputs.")
@click.option("--no-plot", is_flag=True, help="Skip figure rendering.")
def verify(config_spec, out, seed, force, no_plot):
    """SPRT decision table over (noise variance, threshold)."""
    try:
        text, name = cfgmod.resolve_config_path(config_spec)
        spec = cfgmod.parse_verification(cfgmod.load_yaml(text, name), name)
    except cfgmod.ConfigError as exc:
        _fail(str(exc))
    if seed is not None:
        spec["master_seed"] = seed

    out_dir = _output_dir(out, spec["name"], force)
    report = verify_prediction_system(
        model=spec["model"],
        predictor_config=spec["predictor_config"],
        noise_variances=spec["noise_variances"],
        thresholds=spec["thresholds"],
        sprt=SprtConfig(
            threshold=spec["thresholds"][0], **spec["sprt_kwargs"]
        ),
        master_seed=spec["master_seed"],
    )

    # Wall times go to stdout only; report files stay byte-reproducible.
    report_rows = [
        {
            "noise_variance": cell.noise_variance,
            "threshold": cell.threshold,
            "decision": cell.outcome.decision.value,
            "samples": cell.outcome.samples,
            "llr": cell.outcome.llr,
        }
        for cell in report.cells
    ]
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(
            {"format": REPORT_FORMAT, "cells": report_rows},
            fh, indent=2, sort_keys=True,
        )
        fh.write("\n")
    with open(os.path.join(out_dir, "report.csv"), "w", newline="") as fh:
        fh.write("# npvo-verify v1\n")
        writer = csv.DictWriter(
            fh,
            fieldnames=[
                "noise_variance", "threshold", "decision", "samples", "llr",
            ],
        )
        writer.writeheader()
        writer.writerows(report_rows)
    outputs = ["report.json", "report.csv"]
    if not no_plot:
        from . import plotting

        plotting.plot_verification(
            report, os.path.join(out_dir, "decisions.png")
        )
        outputs.append("decisions.png")
    _write_manifest(out_dir, "verify", config_spec, spec["master_seed"], outputs)

    for cell in report.cells:
        click.echo(
            f"sigma2={cell.noise_variance:g} theta={cell.threshold:g} "
            f"-> {cell.outcome.decision.value} "
            f"({cell.outcome.samples} samples, {cell.wall_time:.2f}s)"
        )
    click.echo(f"outputs in {out_dir}")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--kind", default=None,
              type=click.Choice(sorted(_KIND_ALIASES)),
              help="Bound family for a single query.")
@click.option("--theta", default=None, type=float,
              help="Containment probability.")
@click.option("--n", "n_entities", default=None, type=int,
              help="Agent/obstacle count.")
@click.option("--validate", is_flag=True,
              help="Monte-Carlo the event models over the full grid.")
@click.option("--trials", default=100_000, type=int,
              help="Trials per cell when validating.")
@click.option("--seed", default=0, type=int, help="Monte-Carlo seed.")
@click.option("--out", default=None, help="Output directory.")
@click.option("--force", is_flag=True, help="Overwrite existing outputs.")
@click.option("--no-plot", is_flag=True, help="Skip figure rendering.")
def bounds(kind, theta, n_entities, validate, trials, seed, out, force,
           no_plot):
    """Evaluate collision-probability ceilings; optionally validate them."""
    single_query = kind is not None or theta is not None
    if single_query:
        if kind is None or theta is None:
            _fail("--kind and --theta go together")
        bound_kind = _KIND_ALIASES[kind]
        if n_entities is None:
            n_entities = {"single": 1, "dual": 2}.get(kind, 2)
        try:
            query = BoundQuery(bound_kind, theta, n_entities)
        except ValueError as exc:
            _fail(str(exc))
        value = collision_bound(query)
        click.echo(f"{query.kind.value}(theta={theta:g}, n={n_entities}) = {value:.12g}")
        if not validate:
            sys.exit(EXIT_OK)
        queries = [query]
    else:
        queries = valid_queries()

    rng = np.random.default_rng(seed)
    rows = []
    for q in queries:
        row = {
            "kind": q.kind.value,
            "theta": q.theta,
            "n": q.n,
            "bound": collision_bound(q),
            "empirical": None,
            "ci_halfwidth": None,
        }
        if validate:
            if trials < 1:
                _fail("--trials must be >= 1")
            est = empirical_collision_rate(q.kind, q.theta, q.n, trials, rng)
            row["empirical"] = est.rate
            row["ci_halfwidth"] = 3.0 * est.std_error
        rows.append(row)

    out_dir = _output_dir(out, "bounds", force)
    with open(os.path.join(out_dir, "bounds.csv"), "w", newline="") as fh:
        fh.write(BOUNDS_HEADER + "\n")
        writer = csv.DictWriter(
            fh,
            fieldnames=["kind", "theta", "n", "bound", "empirical",
                        "ci_halfwidth"],
        )
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {
                    k: ("" if v is None else ("%.17g" % v if isinstance(v, float) else v))
                    for k, v in row.items()
                }
            )
    outputs = ["bounds.csv"]
    if not no_plot:
        from . import plotting

        plotting.plot_bounds(rows, os.path.join(out_dir, "bounds.png"))
        outputs.append("bounds.png")
    _write_manifest(out_dir, "bounds", kind or "grid", seed, outputs)

    if validate:
        worst = max(
            (r["empirical"] - r["bound"] for r in rows), default=float("-inf")
        )
        click.echo(
            f"validated {len(rows)} cells at {trials} trials; "
            f"worst empirical-minus-bound = {worst:.5f}"
        )
    click.echo(f"outputs in {out_dir}")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--deltas", "deltas_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="CSV of per-step displacements (columns dx,dy).")
@click.option("--predictor", default="lstm",
              type=click.Choice(["lstm", "rnn", "const"]))
@click.option("--horizon", default=10, type=int)
@click.option("--gamma", default=0.95, type=float)
@click.option("--iterations", default=100, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--out", default=None, help="Output directory.")
@click.option("--force", is_flag=True, help="Overwrite existing outputs.")
@click.option("--no-plot", is_flag=True, help="Skip figure rendering.")
def predict(deltas_path, predictor, horizon, gamma, iterations, seed, out,
            force, no_plot):
    """One-shot online training + prediction from a recorded delta file.

    Positions are reconstructed relative to the origin, so predicted
    centers are offsets from the final observed position.
    """
    try:
        deltas = _read_deltas(deltas_path)
    except ValueError as exc:
        _fail(str(exc))
    try:
        pred_config = PredictorConfig(
            variant=predictor if predictor != "const" else "lstm",
            horizon=horizon, gamma=gamma, n_iterations=iterations,
        )
    except ValueError as exc:
        _fail(str(exc))

    positions = np.vstack([np.zeros((1, 2)), np.cumsum(deltas, axis=0)])
    history = ObservationHistory(positions=positions, dt=0.5)
    rng = np.random.default_rng(seed)
    if predictor == "const":
        pipeline = ConstantVelocityBaseline(horizon=horizon, gamma=gamma)
    else:
        pipeline = LearnedPredictor(pred_config, rng)
    distribution = pipeline.observe_and_predict(history, rng)
    if distribution is None:
        _fail("need at least one delta to predict")

    out_dir = _output_dir(out, "predict", force)
    pred_path = os.path.join(out_dir, "prediction.csv")
    with open(pred_path, "w", newline="") as fh:
        fh.write("# npvo-prediction v1\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["k", "mu_x", "mu_y", "sigma_xx", "sigma_xy", "sigma_yx",
             "sigma_yy", "p_x", "p_y", "c_gamma"]
        )
        for k in range(distribution.horizon):
            mu = distribution.mu[k]
            sig = distribution.sigma[k]
            pos = distribution.positions[k]
            writer.writerow(
                ["%d" % (k + 1)]
                + ["%.17g" % v for v in (
                    mu[0], mu[1], sig[0, 0], sig[0, 1], sig[1, 0], sig[1, 1],
                    pos[0], pos[1], distribution.ellipsoids[k].threshold,
                )]
            )
    outputs = ["prediction.csv"]
    if not no_plot:
        from . import plotting

        plotting.plot_prediction(
            positions, distribution, os.path.join(out_dir, "prediction.png")
        )
        outputs.append("prediction.png")
    _write_manifest(out_dir, "predict", deltas_path, seed, outputs)
    click.echo(f"outputs in {out_dir}")
    sys.exit(EXIT_OK)


def _read_deltas(path: str) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for i, row in enumerate(reader):
            if not row or row[0].startswith("#"):
                continue
            if i == 0 and any(not _is_float(c) for c in row[:2]):
                continue
            if len(row) < 2:
                raise ValueError(f"{path}: row {i + 1} needs two columns")
            rows.append((float(row[0]), float(row[1])))
    if not rows:
        raise ValueError(f"{path}: no delta rows found")
    deltas = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(deltas)):
        raise ValueError(f"{path}: deltas must be finite")
    return deltas


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


if __name__ == "__main__":
    main()
