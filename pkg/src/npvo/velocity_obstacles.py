"""Probabilistic velocity obstacles over predicted ellipsoid horizons.

A candidate velocity v is a member of the velocity obstacle iff holding v
for k ticks, for any k in [1, m], lands the agent inside some obstacle's
step-k confidence ellipsoid inflated by the safety radius:

    exists j, k:  p_A + v * k * dt  in  inflate(e_k^j, r_s)

Inflation is a conservative outer bound of the Minkowski sum with the
safety disk (see Ellipsoid.inflated), so a velocity outside the obstacle
keeps the true clearance whenever the obstacle stays inside its ellipsoids.
Membership is closed: grazing the inflated boundary counts as inside.

The safe-velocity solver searches a deterministic polar grid over the
reachable disk and refines around the best cell; with no feasible sample it
returns the velocity of least penetration instead, flagged INFEASIBLE.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Ellipsoid
from .predictor import PredictionDistribution


@dataclass(frozen=True)
class Npvo:
    """Velocity obstacle for one agent against one or more obstacles."""

    agent_position: np.ndarray          # (2,)
    ellipsoids: list[list[Ellipsoid]]   # [obstacle][step], raw (uninflated)
    safety_radius: float
    dt: float
    # Flattened inflated constraint arrays, one row per (obstacle, step):
    _centers: np.ndarray = field(init=False, repr=False)
    _invs: np.ndarray = field(init=False, repr=False)
    _thresholds: np.ndarray = field(init=False, repr=False)
    _times: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.safety_radius < 0.0:
            raise ValueError("safety_radius must be >= 0")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if not self.ellipsoids or any(len(s) == 0 for s in self.ellipsoids):
            raise ValueError("need at least one ellipsoid per obstacle")
        position = np.asarray(self.agent_position, dtype=np.float64)
        if position.shape != (2,) or not np.all(np.isfinite(position)):
            raise ValueError("agent_position must be a finite 2-vector")
        object.__setattr__(self, "agent_position", position)
        centers, invs, thresholds, times = [], [], [], []
        for per_step in self.ellipsoids:
            for k, e in enumerate(per_step, start=1):
                inflated = e.inflated(self.safety_radius)
                centers.append(inflated.center)
                invs.append(inflated._inv)
                thresholds.append(inflated.threshold)
                times.append(k * self.dt)
        object.__setattr__(self, "_centers", np.array(centers))
        object.__setattr__(self, "_invs", np.array(invs))
        object.__setattr__(self, "_thresholds", np.array(thresholds))
        object.__setattr__(self, "_times", np.array(times))

    @property
    def horizon(self) -> int:
        return max(len(s) for s in self.ellipsoids)

    def membership(self, velocities: np.ndarray) -> np.ndarray | bool:
        """Closed-set membership for one velocity or an (N, 2) array."""
        v = np.asarray(velocities, dtype=np.float64)
        single = v.ndim == 1
        v = np.atleast_2d(v)
        # points[n, c] = p_A + v_n * t_c for constraint row c
        pts = self.agent_position + v[:, None, :] * self._times[None, :, None]
        diff = pts - self._centers[None, :, :]
        q = np.einsum("ncd,cde,nce->nc", diff, self._invs, diff)
        member = np.any(q <= self._thresholds[None, :], axis=1)
        return bool(member[0]) if single else member

    def penetration(self, velocities: np.ndarray) -> np.ndarray:
        """Deepest containment margin in [0, 1]; 0 iff outside every constraint."""
        v = np.atleast_2d(np.asarray(velocities, dtype=np.float64))
        pts = self.agent_position + v[:, None, :] * self._times[None, :, None]
        diff = pts - self._centers[None, :, :]
        q = np.einsum("ncd,cde,nce->nc", diff, self._invs, diff)
        depth = np.maximum(0.0, 1.0 - q / self._thresholds[None, :])
        return depth.max(axis=1)


def npvo_membership(velocity: np.ndarray, npvo: Npvo) -> bool:
    """True iff ``velocity`` is inside the (inflated, closed) obstacle set."""
    return bool(npvo.membership(np.asarray(velocity, dtype=np.float64)))


def build_npvo(
    agent_position: np.ndarray,
    prediction: PredictionDistribution,
    safety_radius: float,
    dt: float,
) -> Npvo:
    """Velocity obstacle from one obstacle's prediction."""
    return Npvo(
        agent_position=agent_position,
        ellipsoids=[list(prediction.ellipsoids)],
        safety_radius=safety_radius,
        dt=dt,
    )


def build_multi_agent_npvo(
    agent_position: np.ndarray,
    predictions: list[PredictionDistribution],
    safety_radius: float,
    dt: float,
) -> Npvo:
    """Union over obstacles: member iff member of any single-obstacle set."""
    if not predictions:
        raise ValueError("need at least one prediction")
    return Npvo(
        agent_position=agent_position,
        ellipsoids=[list(p.ellipsoids) for p in predictions],
        safety_radius=safety_radius,
        dt=dt,
    )


@dataclass
class SolverParams:
    """Resolution of the deterministic polar search."""

    n_angles: int = 64
    n_speeds: int = 16
    n_refinements: int = 3

    def __post_init__(self) -> None:
        if self.n_angles < 4 or self.n_speeds < 1 or self.n_refinements < 0:
            raise ValueError("invalid solver resolution")


@dataclass(frozen=True)
class SafeVelocityResult:
    velocity: np.ndarray
    feasible: bool
    distance_to_desired: float
    penetration_depth: float    # 0 when feasible


def _polar_candidates(v_max: float, params: SolverParams) -> np.ndarray:
    angles = np.linspace(0.0, 2.0 * np.pi, params.n_angles, endpoint=False)
    speeds = v_max * np.arange(1, params.n_speeds + 1) / params.n_speeds
    grid = np.stack(
        [
            np.outer(speeds, np.cos(angles)).ravel(),
            np.outer(speeds, np.sin(angles)).ravel(),
        ],
        axis=1,
    )
    return np.vstack([np.zeros((1, 2)), grid])


def _neighborhood(
    best: np.ndarray, d_angle: float, d_speed: float, v_max: float
) -> np.ndarray:
    speed = float(np.hypot(best[0], best[1]))
    angle = float(np.arctan2(best[1], best[0]))
    offs = np.arange(-2, 3)
    aa, ss = np.meshgrid(angle + offs * d_angle, np.clip(speed + offs * d_speed, 0.0, v_max))
    return np.stack([(ss * np.cos(aa)).ravel(), (ss * np.sin(aa)).ravel()], axis=1)


def find_safe_velocity(
    npvo: Npvo,
    desired: np.ndarray,
    v_max: float,
    params: SolverParams | None = None,
) -> SafeVelocityResult:
    """Feasible velocity closest to ``desired``, or least-penetration fallback.

    Deterministic: a fixed polar grid over the reachable disk (plus the zero
    velocity and ``desired`` itself) followed by ``n_refinements`` local
    5x5 searches with halved spacing.  Ties break toward the desired
    velocity, then toward the lower candidate index.
    """
    if params is None:
        params = SolverParams()
    desired = np.asarray(desired, dtype=np.float64)
    if desired.shape != (2,) or not np.all(np.isfinite(desired)):
        raise ValueError("desired velocity must be a finite 2-vector")
    if v_max <= 0.0:
        raise ValueError("v_max must be positive")
    if np.hypot(desired[0], desired[1]) > v_max * (1.0 + 1e-12):
        raise ValueError("desired velocity exceeds v_max")

    if not npvo.membership(desired):
        return SafeVelocityResult(
            velocity=desired, feasible=True, distance_to_desired=0.0,
            penetration_depth=0.0,
        )

    candidates = _polar_candidates(v_max, params)
    d_angle = 2.0 * np.pi / params.n_angles
    d_speed = v_max / params.n_speeds

    member = npvo.membership(candidates)
    free = candidates[~member]
    if free.shape[0] > 0:
        dist2 = np.sum((free - desired) ** 2, axis=1)
        best = free[int(np.argmin(dist2))]
        best_d2 = float(np.min(dist2))
        for _ in range(params.n_refinements):
            d_angle *= 0.5
            d_speed *= 0.5
            local = _neighborhood(best, d_angle, d_speed, v_max)
            ok = ~npvo.membership(local)
            if not np.any(ok):
                continue
            loc_free = local[ok]
            d2 = np.sum((loc_free - desired) ** 2, axis=1)
            idx = int(np.argmin(d2))
            if d2[idx] < best_d2:
                best, best_d2 = loc_free[idx], float(d2[idx])
        return SafeVelocityResult(
            velocity=best, feasible=True,
            distance_to_desired=float(np.sqrt(best_d2)), penetration_depth=0.0,
        )

    # Nothing feasible on the grid: minimize penetration depth instead.
    depth = npvo.penetration(candidates)
    dist2 = np.sum((candidates - desired) ** 2, axis=1)
    order = np.lexsort((dist2, depth))
    best = candidates[order[0]]
    best_key = (float(depth[order[0]]), float(dist2[order[0]]))
    for _ in range(params.n_refinements):
        d_angle *= 0.5
        d_speed *= 0.5
        local = _neighborhood(best, d_angle, d_speed, v_max)
        ldepth = npvo.penetration(local)
        ld2 = np.sum((local - desired) ** 2, axis=1)
        lorder = np.lexsort((ld2, ldepth))
        key = (float(ldepth[lorder[0]]), float(ld2[lorder[0]]))
        if key < best_key:
            best, best_key = local[lorder[0]], key
    return SafeVelocityResult(
        velocity=best, feasible=False,
        distance_to_desired=float(np.sqrt(best_key[1])),
        penetration_depth=best_key[0],
    )


def dump_velocity_grid(
    npvo: Npvo, v_max: float, resolution: int = 81
) -> np.ndarray:
    """(N, 3) rows of (vx, vy, member) over the reachable disk, for plotting."""
    axis = np.linspace(-v_max, v_max, resolution)
    vx, vy = np.meshgrid(axis, axis)
    pts = np.stack([vx.ravel(), vy.ravel()], axis=1)
    inside_disk = np.sum(pts**2, axis=1) <= v_max**2 * (1 + 1e-12)
    pts = pts[inside_disk]
    member = npvo.membership(pts).astype(np.float64)
    return np.column_stack([pts, member])
