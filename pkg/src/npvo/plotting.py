"""Figure rendering for CLI reports (headless Agg backend)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Circle, Ellipse

from .model_check import SprtDecision


def _ellipse_patch(ellipsoid, **kwargs) -> Ellipse:
    vals, vecs = np.linalg.eigh(ellipsoid.sigma)
    vals = np.maximum(vals, 0.0)
    axes = 2.0 * np.sqrt(ellipsoid.threshold * vals)
    angle = math.degrees(math.atan2(vecs[1, 1], vecs[0, 1]))
    return Ellipse(
        xy=ellipsoid.center, width=axes[1], height=axes[0], angle=angle,
        **kwargs,
    )


def plot_trajectories(trace, events, path) -> None:
    fig, ax = plt.subplots(figsize=(8, 6))
    colors = plt.cm.tab10.colors
    for i, name in enumerate(trace.names):
        pts = trace.positions[name]
        kind = trace.kinds[name]
        style = "-" if kind == "agent" else "--"
        ax.plot(
            pts[:, 0], pts[:, 1], style, color=colors[i % 10],
            label=f"{name} ({kind})",
        )
        ax.plot(pts[0, 0], pts[0, 1], "o", color=colors[i % 10], ms=6)
        ax.plot(pts[-1, 0], pts[-1, 1], "s", color=colors[i % 10], ms=6)
        if kind == "agent":
            goal = trace.goals[name]
            ax.plot(goal[0], goal[1], "*", color=colors[i % 10], ms=12)
    for event in events:
        mid = 0.5 * (
            trace.positions[event.name_a][event.step]
            + trace.positions[event.name_b][event.step]
        )
        ax.add_patch(
            Circle(mid, trace.safety_radius, fill=False, color="red", lw=1.2)
        )
        ax.plot(mid[0], mid[1], "x", color="red", ms=8)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("trajectories (o start, s end, * goal, x collision)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_timeline(trace, path) -> None:
    n = trace.n_steps
    t = np.arange(n + 1) * trace.dt
    pairs = trace.monitored_pairs()
    fig, (ax1, ax2) = plt.subplots(
        2, 1, figsize=(8, 6), sharex=True,
        gridspec_kw={"height_ratios": [3, 1]},
    )
    if pairs:
        dist = np.array(
            [
                min(trace.pair_distance(a, b, k) for a, b in pairs)
                for k in range(n + 1)
            ]
        )
        ax1.plot(t, dist, "-", color="tab:blue", label="min pair distance")
    ax1.axhline(
        trace.safety_radius, color="red", ls="--", label="safety radius"
    )
    ax1.set_ylabel("distance [m]")
    ax1.legend(loc="best", fontsize=8)
    for name in trace.agent_names():
        flags = np.array(
            [1.0 if trace.steps[k].feasible[name] else 0.0 for k in range(n)]
        )
        ax2.step(t[:n], flags, where="post", label=name)
    ax2.set_ylim(-0.1, 1.1)
    ax2.set_yticks([0, 1], ["INFEAS", "FEAS"])
    ax2.set_xlabel("time [s]")
    ax2.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


_DECISION_COLOR = {
    SprtDecision.SAT: (0.55, 0.8, 0.55),
    SprtDecision.UNSAT: (0.85, 0.55, 0.55),
    SprtDecision.INCONCLUSIVE: (0.8, 0.8, 0.6),
}


def plot_verification(report, path) -> None:
    rows = list(report.noise_variances)
    cols = sorted(report.thresholds)
    fig, ax = plt.subplots(
        figsize=(1.6 * len(cols) + 2.0, 0.8 * len(rows) + 1.5)
    )
    for r, nv in enumerate(rows):
        for c, theta in enumerate(cols):
            decision = report.decision(nv, theta)
            ax.add_patch(
                plt.Rectangle(
                    (c, len(rows) - 1 - r), 1, 1,
                    facecolor=_DECISION_COLOR[decision], edgecolor="black",
                )
            )
            ax.text(
                c + 0.5, len(rows) - 1 - r + 0.5, decision.value,
                ha="center", va="center", fontsize=9,
            )
    ax.set_xlim(0, len(cols))
    ax.set_ylim(0, len(rows))
    ax.set_xticks([c + 0.5 for c in range(len(cols))], [f"{t:g}" for t in cols])
    ax.set_yticks(
        [len(rows) - 1 - r + 0.5 for r in range(len(rows))],
        [f"{nv:g}" for nv in rows],
    )
    ax.set_xlabel("threshold")
    ax.set_ylabel("noise variance")
    ax.set_title("SPRT decisions")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_bounds(rows, path) -> None:
    """rows: list of dicts with kind, theta, n, bound, empirical (or None)."""
    fig, ax = plt.subplots(figsize=(8, 6))
    series: dict = {}
    for row in rows:
        series.setdefault((row["kind"], row["n"]), []).append(row)
    for (kind, n), pts in sorted(series.items()):
        pts = sorted(pts, key=lambda r: r["theta"])
        thetas = [p["theta"] for p in pts]
        ax.plot(
            thetas, [p["bound"] for p in pts], "-o", ms=3,
            label=f"{kind} n={n}",
        )
        measured = [p for p in pts if p.get("empirical") is not None]
        if measured:
            ax.plot(
                [p["theta"] for p in measured],
                [p["empirical"] for p in measured],
                "x", color="black", ms=5,
            )
    ax.set_xlabel("containment probability")
    ax.set_ylabel("collision probability ceiling")
    ax.set_title("closed-form bounds (x = event-model empirical)")
    ax.legend(fontsize=7, ncols=2)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_prediction(history_positions, distribution, path) -> None:
    fig, ax = plt.subplots(figsize=(8, 6))
    pts = np.asarray(history_positions, dtype=np.float64)
    ax.plot(pts[:, 0], pts[:, 1], "-o", color="tab:blue", ms=3,
            label="observed")
    pred = distribution.positions
    ax.plot(pred[:, 0], pred[:, 1], "-s", color="tab:orange", ms=3,
            label="predicted mean")
    for e in distribution.ellipsoids:
        ax.add_patch(
            _ellipse_patch(
                e, fill=False, color="tab:orange", alpha=0.6, lw=0.8
            )
        )
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(fontsize=8)
    ax.set_title(f"prediction fan (gamma={distribution.gamma:g})")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
