"""Online obstacle motion prediction with dropout-based uncertainty.

Training (run every control tick, warm-started from the previous tick):
given the observed position deltas Dp_1..Dp_n, build all pairs

    x_k = { Dp_i + eps_i } i=1..k      y_k = { Dp_i + eps_i } i=k+1..k+m

for k = 1..n-m with eps ~ N(0, sigma^2 I) drawn fresh for every pair on
every iteration, and take Adam steps on the summed Huber cost of the
closed-loop rollout.  Dropout masks are resampled at every timestep during
training (regularizer).

Prediction: run N_s closed-loop rollouts over the noisy history, each under
one fixed-per-sequence dropout mask and its own noise draw, fit a Gaussian
to the sampled deltas at each horizon step (biased MLE, eigenvalue-floored),
and accumulate the per-step means into position estimates.  The ellipsoid at
step k is centered on the position estimate with the step-k delta covariance
and threshold c(gamma) = -2 ln(1 - gamma).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Ellipsoid, chi2_threshold, floor_covariance
from .nn.backprop import rollout_loss_grads
from .nn.cells import forward_core
from .nn.optim import Adam
from .nn.weights import WeightSet, init_weights
from .runtime import SnapshotStore


class InsufficientHistoryError(ValueError):
    """History too short to form a single training pair."""


class TrainingDivergedError(RuntimeError):
    """Training cost became non-finite; carries the last finite weights."""

    def __init__(self, message: str, weights: WeightSet) -> None:
        super().__init__(message)
        self.weights = weights


@dataclass
class PredictorConfig:
    """Hyperparameters of the learned predictor."""

    variant: str = "lstm"           # "lstm" or "rnn"
    hidden_dim: int = 20
    horizon: int = 10               # prediction steps m
    keep_prob: float = 0.9          # dropout keep probability
    noise_variance: float = 0.0     # sigma^2 of the measurement noise model
    huber_delta: float = 1.0
    learning_rate: float = 0.003
    n_iterations: int = 100         # Adam iterations per training call
    n_samples: int = 40             # dropout samples per prediction
    train_window: int = 50          # cap on training input length, in deltas
    gamma: float = 0.95             # ellipsoid confidence level
    cov_floor: float = 1e-6         # eigenvalue floor for fitted covariances

    def __post_init__(self) -> None:
        if self.variant not in ("lstm", "rnn"):
            raise ValueError(f"unknown predictor variant {self.variant!r}")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not 0.0 < self.keep_prob <= 1.0:
            raise ValueError("keep_prob must be in (0, 1]")
        if self.noise_variance < 0.0:
            raise ValueError("noise_variance must be >= 0")
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be >= 1")
        if self.train_window < 1:
            raise ValueError("train_window must be >= 1")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.cov_floor <= 0.0:
            raise ValueError("cov_floor must be positive")


@dataclass
class ObservationHistory:
    """Positions of one obstacle sampled every dt seconds."""

    positions: np.ndarray       # (n+1, 2)
    dt: float

    def __post_init__(self) -> None:
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.positions.ndim != 2 or self.positions.shape[1] != 2:
            raise ValueError("positions must be (n, 2)")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("positions contain non-finite entries")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")

    @property
    def deltas(self) -> np.ndarray:
        return np.diff(self.positions, axis=0)


@dataclass
class TrainingDataset:
    """Padded growing-window pairs for one training iteration."""

    inputs: np.ndarray      # (P, P, 2); pair k-1 valid on the first k steps
    lengths: np.ndarray     # (P,) = 1..P
    targets: np.ndarray     # (P, m, 2)

    def pair(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """1-based pair accessor returning (input sequence, target sequence)."""
        return self.inputs[k - 1, :k], self.targets[k - 1]


def build_dataset(
    deltas: np.ndarray,
    horizon: int,
    noise_variance: float,
    rng: np.random.Generator,
) -> TrainingDataset:
    """All growing-window pairs over the delta history, with fresh noise.

    Noise is i.i.d. per element and per pair; a fresh dataset is built every
    training iteration.
    """
    deltas = np.asarray(deltas, dtype=np.float64)
    n = deltas.shape[0]
    if n <= horizon:
        raise InsufficientHistoryError(
            f"need more than horizon={horizon} deltas, got {n}"
        )
    pairs = n - horizon
    sd = np.sqrt(noise_variance)
    inputs = np.zeros((pairs, pairs, 2))
    targets = np.zeros((pairs, horizon, 2))
    for k in range(1, pairs + 1):
        noisy = deltas[: k + horizon] + sd * rng.standard_normal((k + horizon, 2))
        inputs[k - 1, :k] = noisy[:k]
        targets[k - 1] = noisy[k : k + horizon]
    lengths = np.arange(1, pairs + 1, dtype=np.int64)
    return TrainingDataset(inputs=inputs, lengths=lengths, targets=targets)


def _step_masks(
    keep_prob: float,
    shape_x: tuple[int, ...],
    shape_h: tuple[int, ...],
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    z_x = (rng.random(shape_x) < keep_prob).astype(np.float64)
    z_h = (rng.random(shape_h) < keep_prob).astype(np.float64)
    return z_x, z_h


def train_network_online(
    deltas: np.ndarray,
    weights: WeightSet | None,
    config: PredictorConfig,
    rng: np.random.Generator,
) -> tuple[WeightSet, list[float]]:
    """One online training call; returns new weights and per-iteration costs.

    ``weights=None`` cold-starts a fresh network.  The input length is capped
    at ``config.train_window`` by dropping the oldest deltas.
    """
    deltas = np.asarray(deltas, dtype=np.float64)
    m = config.horizon
    if deltas.shape[0] > config.train_window + m:
        deltas = deltas[-(config.train_window + m):]
    n = deltas.shape[0]
    if n <= m:
        raise InsufficientHistoryError(f"need more than horizon={m} deltas, got {n}")
    if weights is None:
        weights = init_weights(config.variant, 2, config.hidden_dim, 2, rng)
    elif weights.variant != config.variant:
        raise ValueError(
            f"warm-start weights are {weights.variant!r}, config wants {config.variant!r}"
        )

    pairs = n - m
    T = pairs + m - 1
    optimizer = Adam(weights, learning_rate=config.learning_rate)
    losses: list[float] = []
    current = weights
    for _ in range(config.n_iterations):
        dataset = build_dataset(deltas, m, config.noise_variance, rng)
        z_x, z_h = _step_masks(
            config.keep_prob, (pairs, T, 2), (pairs, T, config.hidden_dim), rng
        )
        _, cache = forward_core(current, dataset.inputs, dataset.lengths, m, z_x, z_h)
        cost, grads = rollout_loss_grads(
            current, cache, dataset.targets, config.huber_delta
        )
        if not np.isfinite(cost):
            raise TrainingDivergedError(
                f"training cost became non-finite ({cost})", current
            )
        losses.append(cost)
        current = optimizer.step(current, grads)
    return current, losses


def sample_predictions(
    deltas: np.ndarray,
    weights: WeightSet,
    config: PredictorConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """N_s closed-loop rollouts under fixed-per-sequence dropout masks.

    Each sample draws its own mask pair and its own measurement noise over
    the history, then decodes ``config.horizon`` delta predictions.

    Returns:
        (n_samples, horizon, 2) sampled delta trajectories.
    """
    deltas = np.asarray(deltas, dtype=np.float64)
    m = config.horizon
    if deltas.shape[0] > config.train_window + m:
        deltas = deltas[-(config.train_window + m):]
    n = deltas.shape[0]
    if n < 1:
        raise InsufficientHistoryError("need at least one delta to predict")
    B = config.n_samples
    sd = np.sqrt(config.noise_variance)
    inputs = deltas[None, :, :] + sd * rng.standard_normal((B, n, 2))
    z_x, z_h = _step_masks(config.keep_prob, (B, 1, 2), (B, 1, config.hidden_dim), rng)
    lengths = np.full(B, n, dtype=np.int64)
    ys, _ = forward_core(weights, inputs, lengths, m, z_x, z_h)
    return ys[:, n - 1 : n - 1 + m, :]


def fit_gaussian_mle(
    samples: np.ndarray, floor: float = 1e-6
) -> tuple[np.ndarray, np.ndarray]:
    """Biased (divide-by-N) Gaussian MLE over 2-D samples, floored.

    The covariance is symmetrized and its eigenvalues are clamped at
    ``floor`` so downstream ellipsoids stay well-defined even for degenerate
    sample sets.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[1] != 2 or samples.shape[0] < 1:
        raise ValueError("samples must be (N, 2) with N >= 1")
    mu = samples.mean(axis=0)
    centered = samples - mu
    sigma = (centered.T @ centered) / samples.shape[0]
    return mu, floor_covariance(sigma, floor)


@dataclass
class PredictionDistribution:
    """Per-step Gaussian prediction over an m-step horizon."""

    mu: np.ndarray              # (m, 2) delta means
    sigma: np.ndarray           # (m, 2, 2) delta covariances
    positions: np.ndarray       # (m, 2) cumulative position estimates
    ellipsoids: list[Ellipsoid] = field(default_factory=list)
    gamma: float = 0.95

    @property
    def horizon(self) -> int:
        return self.mu.shape[0]


def distribution_from_samples(
    samples: np.ndarray,
    last_position: np.ndarray,
    gamma: float,
    cov_floor: float,
) -> PredictionDistribution:
    """Fit per-step Gaussians and build position ellipsoids.

    Position estimate: p^_{n+k} = p_n + sum_{i<=k} mu_i.  The ellipsoid at
    step k keeps the step-k delta covariance.
    """
    m = samples.shape[1]
    mu = np.zeros((m, 2))
    sigma = np.zeros((m, 2, 2))
    for k in range(m):
        mu[k], sigma[k] = fit_gaussian_mle(samples[:, k, :], cov_floor)
    positions = np.asarray(last_position, dtype=np.float64) + np.cumsum(mu, axis=0)
    threshold = chi2_threshold(gamma)
    ellipsoids = [
        Ellipsoid(center=positions[k], sigma=sigma[k], threshold=threshold)
        for k in range(m)
    ]
    return PredictionDistribution(
        mu=mu, sigma=sigma, positions=positions, ellipsoids=ellipsoids, gamma=gamma
    )


def predict_obstacle_motion(
    history: ObservationHistory,
    weights: WeightSet,
    config: PredictorConfig,
    rng: np.random.Generator,
) -> PredictionDistribution:
    """Full prediction pass: sample rollouts, fit Gaussians, build ellipsoids."""
    samples = sample_predictions(history.deltas, weights, config, rng)
    return distribution_from_samples(
        samples, history.positions[-1], config.gamma, config.cov_floor
    )


class LearnedPredictor:
    """Stateful per-obstacle pipeline: warm-started training plus prediction.

    Weights move through a SnapshotStore, mirroring the two-network runtime:
    the training pass updates a working copy and publishes it; predictions
    always read the latest published snapshot.
    """

    def __init__(self, config: PredictorConfig, rng: np.random.Generator) -> None:
        self.config = config
        initial = init_weights(config.variant, 2, config.hidden_dim, 2, rng)
        self.store = SnapshotStore(initial)

    @property
    def horizon(self) -> int:
        return self.config.horizon

    def observe_and_predict(
        self, history: ObservationHistory, rng: np.random.Generator
    ) -> PredictionDistribution | None:
        """Train if the history allows it, then predict from latest weights.

        Returns None when no delta is available yet.
        """
        deltas = history.deltas
        if deltas.shape[0] < 1:
            return None
        if deltas.shape[0] > self.config.horizon:
            new_weights, _ = train_network_online(
                deltas, self.store.latest().weights, self.config, rng
            )
            self.store.publish_weights(new_weights)
        return predict_obstacle_motion(
            history, self.store.latest().weights, self.config, rng
        )


class ConstantVelocityBaseline:
    """Straight-line extrapolation with a fixed small covariance."""

    def __init__(
        self, horizon: int, gamma: float = 0.95, sigma2: float = 0.0025
    ) -> None:
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        if sigma2 <= 0.0:
            raise ValueError("sigma2 must be positive")
        self.horizon = horizon
        self.gamma = gamma
        self.sigma2 = sigma2

    def observe_and_predict(
        self, history: ObservationHistory, rng: np.random.Generator
    ) -> PredictionDistribution | None:
        deltas = history.deltas
        if deltas.shape[0] < 1:
            return None
        mu = np.tile(deltas[-1], (self.horizon, 1))
        sigma = np.tile(self.sigma2 * np.eye(2), (self.horizon, 1, 1))
        positions = history.positions[-1] + np.cumsum(mu, axis=0)
        threshold = chi2_threshold(self.gamma)
        ellipsoids = [
            Ellipsoid(center=positions[k], sigma=sigma[k], threshold=threshold)
            for k in range(self.horizon)
        ]
        return PredictionDistribution(
            mu=mu, sigma=sigma, positions=positions,
            ellipsoids=ellipsoids, gamma=self.gamma,
        )
