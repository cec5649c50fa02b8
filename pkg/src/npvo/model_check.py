"""Statistical model checking of prediction quality over random grid motion.

An obstacle walks a uniform Markov chain on the integer grid: each step adds
a delta drawn uniformly from {-1, 0, 1}^2 (scaled to meters).  A length-N
execution is "good throughout" when every labeled state passes the
containment check: the realized positions of the last m steps all fell
inside the ellipsoids the predictor emitted m steps earlier.  Labeling
starts at step m+1, the first step with a fully observable horizon.

Wald's SPRT then decides P_{>=theta}(always good within N) from i.i.d.
trace evaluations, with indifference band theta +- delta_I and error
strengths (alpha, beta).
"""

from __future__ import annotations

import dataclasses
import enum
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .predictor import (
    LearnedPredictor,
    ObservationHistory,
    PredictorConfig,
)


@dataclass(frozen=True)
class GridMotionModel:
    """Uniform random walk over a 3x3 delta alphabet."""

    n_steps: int = 20
    cell_size: float = 1.0
    dt: float = 1.0

    def __post_init__(self) -> None:
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.cell_size <= 0.0 or self.dt <= 0.0:
            raise ValueError("cell_size and dt must be positive")

    @property
    def alphabet(self) -> np.ndarray:
        """The 9 grid deltas in meters, row-major over (dx, dy)."""
        axis = np.array([-1.0, 0.0, 1.0]) * self.cell_size
        dx, dy = np.meshgrid(axis, axis, indexing="ij")
        return np.stack([dx.ravel(), dy.ravel()], axis=1)


def sample_markov_trace(
    model: GridMotionModel, rng: np.random.Generator
) -> np.ndarray:
    """(N, 2) delta sequence, each row i.i.d. uniform over the alphabet."""
    idx = rng.integers(0, 9, size=model.n_steps)
    return model.alphabet[idx]


def evaluate_trace(
    deltas: np.ndarray,
    pipeline,
    rng: np.random.Generator,
    dt: float = 1.0,
) -> bool:
    """True iff every labeled state of the execution is good.

    The pipeline (``observe_and_predict`` + ``horizon``) runs online along
    the trace exactly as in live operation: one observation per step,
    training whenever history allows, prediction from current weights.
    Predictions whose horizon extends past the trace end are never labeled,
    so those steps are skipped.
    """
    deltas = np.asarray(deltas, dtype=np.float64)
    if deltas.ndim != 2 or deltas.shape[1] != 2:
        raise ValueError("deltas must be (N, 2)")
    n = deltas.shape[0]
    m = pipeline.horizon
    positions = np.vstack([np.zeros((1, 2)), np.cumsum(deltas, axis=0)])
    stored: dict[int, list] = {}
    for i in range(1, n + 1):
        if i <= n - m:
            history = ObservationHistory(positions=positions[: i + 1], dt=dt)
            dist = pipeline.observe_and_predict(history, rng)
            if dist is None:
                raise RuntimeError("pipeline returned no prediction")
            stored[i] = dist.ellipsoids
        if i >= m + 1:
            ells = stored[i - m]
            for k in range(1, m + 1):
                if not ells[k - 1].contains(positions[i - m + k]):
                    return False
    return True


class SprtDecision(enum.Enum):
    SAT = "SAT"
    UNSAT = "UNSAT"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class SprtConfig:
    threshold: float
    indifference: float = 0.05
    alpha: float = 0.1
    beta: float = 0.1
    max_samples: int = 10_000

    def __post_init__(self) -> None:
        low = self.threshold - self.indifference
        high = self.threshold + self.indifference
        if not (0.0 < low < high < 1.0):
            raise ValueError("need 0 < theta - delta_I < theta + delta_I < 1")
        if self.indifference <= 0.0:
            raise ValueError("indifference must be positive")
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (0.0 < v < 0.5):
                raise ValueError(f"{name} must lie in (0, 0.5)")
        if self.max_samples < 1:
            raise ValueError("max_samples must be >= 1")


@dataclass(frozen=True)
class SprtOutcome:
    decision: SprtDecision
    samples: int
    llr: float
    llr_history: np.ndarray = field(repr=False)


def run_sprt(sample_oracle: Callable[[], bool], cfg: SprtConfig) -> SprtOutcome:
    """Wald's sequential test of H0: p >= theta+delta vs H1: p < theta-delta.

    Per sample b the log-likelihood ratio gains
    log(p1^b (1-p1)^(1-b) / (p0^b (1-p0)^(1-b))); crossing
    log((1-beta)/alpha) accepts H1 (UNSAT), crossing log(beta/(1-alpha))
    accepts H0 (SAT), and hitting the sample cap yields INCONCLUSIVE.
    """
    p0 = cfg.threshold + cfg.indifference
    p1 = cfg.threshold - cfg.indifference
    upper = np.log((1.0 - cfg.beta) / cfg.alpha)
    lower = np.log(cfg.beta / (1.0 - cfg.alpha))
    gain_true = np.log(p1 / p0)
    gain_false = np.log((1.0 - p1) / (1.0 - p0))
    llr = 0.0
    history = []
    for i in range(1, cfg.max_samples + 1):
        llr += gain_true if bool(sample_oracle()) else gain_false
        history.append(llr)
        if llr >= upper:
            return SprtOutcome(SprtDecision.UNSAT, i, llr, np.array(history))
        if llr <= lower:
            return SprtOutcome(SprtDecision.SAT, i, llr, np.array(history))
    return SprtOutcome(
        SprtDecision.INCONCLUSIVE, cfg.max_samples, llr, np.array(history)
    )


@dataclass(frozen=True)
class VerificationCell:
    noise_variance: float
    threshold: float
    outcome: SprtOutcome
    wall_time: float


@dataclass(frozen=True)
class VerificationReport:
    model: GridMotionModel
    noise_variances: tuple
    thresholds: tuple
    cells: tuple

    def decision(self, noise_variance: float, threshold: float) -> SprtDecision:
        for cell in self.cells:
            if (
                cell.noise_variance == noise_variance
                and cell.threshold == threshold
            ):
                return cell.outcome.decision
        raise KeyError((noise_variance, threshold))


class _SharedSampleStream:
    """Lazily extended i.i.d. sample cache shared by one table row.

    Re-using one stream across the row's theta values makes decisions
    monotone in theta: the per-sample likelihood gain is pointwise
    non-decreasing in theta, so a shared sample path crosses the UNSAT
    boundary for every theta above the first one that does.
    """

    def __init__(self, draw: Callable[[int], bool]) -> None:
        self._draw = draw
        self._samples: list[bool] = []

    def oracle(self) -> Callable[[], bool]:
        cursor = {"i": 0}

        def sample() -> bool:
            i = cursor["i"]
            while len(self._samples) <= i:
                self._samples.append(bool(self._draw(len(self._samples))))
            cursor["i"] = i + 1
            return self._samples[i]

        return sample


def verify_prediction_system(
    model: GridMotionModel,
    predictor_config: PredictorConfig,
    noise_variances: Sequence[float],
    thresholds: Sequence[float],
    sprt: SprtConfig,
    master_seed: int,
    pipeline_factory: Callable | None = None,
) -> VerificationReport:
    """SPRT decision table over (noise variance, theta).

    Each SPRT sample evaluates a fresh uniform trace against a fresh
    cold-start pipeline seeded from (master_seed, row, sample index), so the
    table is reproducible and cells within a row share their sample stream.
    """
    if pipeline_factory is None:
        def pipeline_factory(config: PredictorConfig, rng: np.random.Generator):
            return LearnedPredictor(config, rng)

    cells = []
    for row, sigma2 in enumerate(noise_variances):
        row_config = dataclasses.replace(
            predictor_config, noise_variance=float(sigma2)
        )

        def draw(sample_index: int, row=row, row_config=row_config) -> bool:
            rng = np.random.default_rng(
                [int(master_seed), int(row), int(sample_index)]
            )
            trace = sample_markov_trace(model, rng)
            pipeline = pipeline_factory(row_config, rng)
            return evaluate_trace(trace, pipeline, rng, dt=model.dt)

        stream = _SharedSampleStream(draw)
        for theta in thresholds:
            cfg = dataclasses.replace(sprt, threshold=float(theta))
            start = time.perf_counter()
            outcome = run_sprt(stream.oracle(), cfg)
            elapsed = time.perf_counter() - start
            cells.append(
                VerificationCell(
                    noise_variance=float(sigma2),
                    threshold=float(theta),
                    outcome=outcome,
                    wall_time=elapsed,
                )
            )
    return VerificationReport(
        model=model,
        noise_variances=tuple(float(s) for s in noise_variances),
        thresholds=tuple(float(t) for t in thresholds),
        cells=tuple(cells),
    )
