"""Closed-form collision-probability ceilings and their event-model checks.

Each bound assumes every directed prediction independently contains its
obstacle's realized motion with probability theta and that the avoidance
step stays feasible.  Under those premises:

    single agent, one obstacle      P(collision) <= 1 - theta
    two mutually avoiding agents    P(collision) <= (1 - theta)^2
    one agent, N obstacles          P(collision) <= 1 - theta^N
    N mutually avoiding agents      P(collision) <= 1 - (2 theta - theta^2)^(N(N-1)/2)

The Monte-Carlo harness samples the proofs' own independence model: one
Bernoulli(1 - theta) atom per directed prediction, collision scored exactly
when the triggering event occurs (the atom fails; both atoms of a pair
fail; any atom fails; any pair fails both ways).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class BoundKind(enum.Enum):
    SINGLE_AGENT = "SingleAgent"
    DUAL_RECIPROCAL = "DualReciprocal"
    MULTI_OBSTACLE = "MultiObstacle"
    N_RECIPROCAL = "NReciprocal"


@dataclass(frozen=True)
class BoundQuery:
    kind: BoundKind
    theta: float
    n: int = 1

    def __post_init__(self) -> None:
        if not (0.0 < self.theta < 1.0):
            raise ValueError("theta must lie in (0, 1)")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.kind is BoundKind.SINGLE_AGENT and self.n != 1:
            raise ValueError("SingleAgent is defined for n = 1")
        if self.kind is BoundKind.DUAL_RECIPROCAL and self.n != 2:
            raise ValueError("DualReciprocal is defined for n = 2")
        if self.kind is BoundKind.N_RECIPROCAL and self.n < 2:
            raise ValueError("NReciprocal needs n >= 2")


def collision_bound(query: BoundQuery) -> float:
    """Exact evaluation of the closed-form ceiling for one query."""
    theta, n = query.theta, query.n
    if query.kind is BoundKind.SINGLE_AGENT:
        return 1.0 - theta
    if query.kind is BoundKind.DUAL_RECIPROCAL:
        return (1.0 - theta) ** 2
    if query.kind is BoundKind.MULTI_OBSTACLE:
        return 1.0 - theta**n
    # NReciprocal; the pair count is n(n-1)/2.  n = 2 reduces to the dual
    # bound and is returned through the same expression so the two kinds
    # agree bit-for-bit.
    if n == 2:
        return (1.0 - theta) ** 2
    pairs = n * (n - 1) // 2
    return 1.0 - (2.0 * theta - theta * theta) ** pairs


@dataclass(frozen=True)
class RateEstimate:
    rate: float
    std_error: float
    trials: int

    def upper(self, sigmas: float = 3.0) -> float:
        return self.rate + sigmas * self.std_error


def empirical_collision_rate(
    kind: BoundKind,
    theta_true: float,
    n: int,
    trials: int,
    rng: np.random.Generator,
) -> RateEstimate:
    """Sampled collision frequency of the proof's independence event model."""
    BoundQuery(kind=kind, theta=theta_true, n=n)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    p_fail = 1.0 - theta_true

    if kind is BoundKind.SINGLE_AGENT:
        collide = rng.random(trials) < p_fail
    elif kind is BoundKind.DUAL_RECIPROCAL:
        fails = rng.random((trials, 2)) < p_fail
        collide = np.all(fails, axis=1)
    elif kind is BoundKind.MULTI_OBSTACLE:
        fails = rng.random((trials, n)) < p_fail
        collide = np.any(fails, axis=1)
    else:
        # One atom per directed edge; pair (i, j) collides when both
        # directions fail.
        fails = rng.random((trials, n, n)) < p_fail
        iu, ju = np.triu_indices(n, k=1)
        both = fails[:, iu, ju] & fails[:, ju, iu]
        collide = np.any(both, axis=1)

    rate = float(np.mean(collide))
    se = math.sqrt(rate * (1.0 - rate) / trials)
    return RateEstimate(rate=rate, std_error=se, trials=trials)


def valid_queries(
    thetas: tuple = (0.5, 0.7, 0.8, 0.9, 0.95, 0.99),
    max_n: int = 6,
) -> list[BoundQuery]:
    """The dominance grid: every kind at every admissible (theta, n)."""
    queries = []
    for theta in thetas:
        queries.append(BoundQuery(BoundKind.SINGLE_AGENT, theta, 1))
        queries.append(BoundQuery(BoundKind.DUAL_RECIPROCAL, theta, 2))
        for n in range(1, max_n + 1):
            queries.append(BoundQuery(BoundKind.MULTI_OBSTACLE, theta, n))
        for n in range(2, max_n + 1):
            queries.append(BoundQuery(BoundKind.N_RECIPROCAL, theta, n))
    return queries
