"""Weight handoff between a training loop and prediction readers.

Training mutates its own working copy of the network; finished weights are
published as immutable, versioned snapshots.  Readers grab the latest
snapshot without blocking, so prediction latency does not depend on how long
a training pass takes.  In deterministic mode (single thread) the same store
is used with a strict train-then-predict alternation.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from .nn.weights import WeightSet


class VersionError(ValueError):
    """Raised when a snapshot would move the version backwards."""


@dataclass(frozen=True)
class WeightSnapshot:
    """One immutable published weight set."""

    weights: WeightSet
    version: int
    fingerprint: int = field(default=-1)

    def __post_init__(self) -> None:
        if self.version < 0:
            raise ValueError("version must be >= 0")
        if self.fingerprint == -1:
            object.__setattr__(self, "fingerprint", self.weights.fingerprint())

    def consistent(self) -> bool:
        """True iff the stored weights still hash to the recorded fingerprint."""
        return self.weights.fingerprint() == self.fingerprint


class SnapshotStore:
    """Single-producer, many-reader snapshot exchange.

    The store always holds a snapshot; construction publishes the cold-start
    weights as version 0, so readers that arrive before any training has
    finished still get a usable network.
    """

    def __init__(self, initial: WeightSet) -> None:
        self._lock = threading.Lock()
        self._latest = WeightSnapshot(weights=initial.copy(), version=0)

    def latest(self) -> WeightSnapshot:
        """Most recently published snapshot; never blocks on training."""
        return self._latest

    def publish(self, snapshot: WeightSnapshot) -> None:
        """Atomically replace the latest snapshot; versions must increase."""
        with self._lock:
            if snapshot.version <= self._latest.version:
                raise VersionError(
                    f"snapshot version {snapshot.version} is not newer than "
                    f"{self._latest.version}"
                )
            self._latest = snapshot

    def publish_weights(self, weights: WeightSet) -> WeightSnapshot:
        """Copy ``weights`` into a fresh snapshot one version ahead."""
        with self._lock:
            snapshot = WeightSnapshot(
                weights=weights.copy(), version=self._latest.version + 1
            )
            self._latest = snapshot
        return snapshot


class BackgroundTrainer:
    """Runs a training callable in its own thread and publishes results.

    ``train_fn`` receives the latest published WeightSet and returns the next
    one; it is called in a loop until stop() is requested.  Exceptions stop
    the loop and are re-raised by join().
    """

    def __init__(self, store: SnapshotStore, train_fn) -> None:
        self.store = store
        self.train_fn = train_fn
        self._stop = threading.Event()
        self._error: BaseException | None = None
        self._thread = threading.Thread(target=self._run, daemon=True)

    def _run(self) -> None:
        try:
            while not self._stop.is_set():
                latest = self.store.latest().weights
                result = self.train_fn(latest)
                if result is None:
                    break
                self.store.publish_weights(result)
        except BaseException as exc:  # surface in join()
            self._error = exc

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()

    def join(self, timeout: float | None = None) -> None:
        self._thread.join(timeout)
        if self._error is not None:
            raise self._error
