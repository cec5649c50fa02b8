"""Scripted obstacle policies as closed-form trajectories.

Every policy answers position(k), the exact position after k steps of dt
seconds.  The world advances an obstacle by commanding the velocity that
lands it on position(k+1), so scripted trajectories never accumulate
integration drift.  Policies are deterministic functions of (step, own
seed); the random walk derives its stream from the scenario master seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _vec(value, name: str) -> np.ndarray:
    v = np.asarray(value, dtype=np.float64)
    if v.shape != (2,) or not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be a finite 2-vector")
    return v


def triangle_wave(phase: float) -> float:
    """Piecewise-linear sine analogue: 0 -> 1 -> 0 -> -1 -> 0 over one period."""
    p = phase - np.floor(phase)
    if p < 0.25:
        return 4.0 * p
    if p < 0.75:
        return 2.0 - 4.0 * p
    return 4.0 * p - 4.0


class ConstantVelocity:
    """Straight line: start + v * k * dt."""

    def __init__(self, start, velocity, dt: float):
        self.start = _vec(start, "start")
        self.v = _vec(velocity, "velocity")
        self.dt = float(dt)

    def position(self, k: int) -> np.ndarray:
        return self.start + self.v * (k * self.dt)


class Oscillating:
    """Oscillation along a fixed axis superimposed on a constant drift.

    waveform "triangle" has sharp velocity reversals at the extremes;
    "sine" is smooth.  Amplitude in meters, period in seconds.
    """

    def __init__(
        self,
        start,
        axis,
        amplitude: float,
        period: float,
        drift=(0.0, 0.0),
        waveform: str = "triangle",
        dt: float = 0.5,
    ):
        self.start = _vec(start, "start")
        axis = _vec(axis, "axis")
        norm = float(np.hypot(axis[0], axis[1]))
        if norm == 0.0:
            raise ValueError("axis must be nonzero")
        self.axis = axis / norm
        if amplitude < 0.0 or period <= 0.0:
            raise ValueError("need amplitude >= 0 and period > 0")
        self.amplitude = float(amplitude)
        self.period = float(period)
        self.drift = _vec(drift, "drift")
        if waveform not in ("triangle", "sine"):
            raise ValueError("waveform must be 'triangle' or 'sine'")
        self.waveform = waveform
        self.dt = float(dt)

    def position(self, k: int) -> np.ndarray:
        t = k * self.dt
        phase = t / self.period
        if self.waveform == "triangle":
            s = triangle_wave(phase)
        else:
            s = float(np.sin(2.0 * np.pi * phase))
        return self.start + self.drift * t + self.axis * (self.amplitude * s)


class Circular:
    """Uniform circular motion starting at angle phase0."""

    def __init__(self, center, radius: float, angular_rate: float,
                 phase0: float = 0.0, dt: float = 0.5):
        self.center = _vec(center, "center")
        if radius < 0.0:
            raise ValueError("radius must be >= 0")
        self.radius = float(radius)
        self.omega = float(angular_rate)
        self.phase0 = float(phase0)
        self.dt = float(dt)

    def position(self, k: int) -> np.ndarray:
        a = self.phase0 + self.omega * (k * self.dt)
        return self.center + self.radius * np.array([np.cos(a), np.sin(a)])


class GridRandomWalk:
    """One uniform {-1,0,1}^2 grid hop (scaled) per step, own seeded stream."""

    def __init__(self, start, cell_size: float, seed: int):
        self.start = _vec(start, "start")
        if cell_size <= 0.0:
            raise ValueError("cell_size must be positive")
        self.cell_size = float(cell_size)
        self.seed = int(seed)
        self._rng = np.random.default_rng(self.seed)
        self._walk = [self.start.copy()]

    def position(self, k: int) -> np.ndarray:
        while len(self._walk) <= k:
            delta = (self._rng.integers(-1, 2, size=2)).astype(np.float64)
            self._walk.append(self._walk[-1] + delta * self.cell_size)
        return self._walk[k].copy()


class Replay:
    """Playback of a recorded position sequence; holds the final position."""

    def __init__(self, positions):
        pts = np.asarray(positions, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
            raise ValueError("positions must be (n, 2) with n >= 1")
        if not np.all(np.isfinite(pts)):
            raise ValueError("positions must be finite")
        self.points = pts.copy()

    def position(self, k: int) -> np.ndarray:
        idx = min(k, self.points.shape[0] - 1)
        return self.points[idx].copy()


@dataclass
class _Segment:
    start_step: int
    policy: object


class BehaviorSwitch:
    """Concatenation of sub-policies, re-based for positional continuity.

    ``builders`` are callables (start, start_step) -> policy; segment i+1
    starts exactly where segment i ends.
    """

    def __init__(self, start, builders, switch_steps):
        if len(builders) != len(switch_steps) + 1:
            raise ValueError("need one more builder than switch step")
        steps = list(int(s) for s in switch_steps)
        if any(b <= a for a, b in zip([0] + steps, steps)):
            raise ValueError("switch steps must be strictly increasing and > 0")
        origin = _vec(start, "start")
        self.segments: list[_Segment] = []
        step0 = 0
        for i, build in enumerate(builders):
            policy = build(origin, step0)
            self.segments.append(_Segment(start_step=step0, policy=policy))
            if i < len(steps):
                origin = policy.position(steps[i] - step0)
                step0 = steps[i]

    def position(self, k: int) -> np.ndarray:
        seg = self.segments[0]
        for cand in self.segments:
            if cand.start_step <= k:
                seg = cand
            else:
                break
        return seg.policy.position(k - seg.start_step)
