"""Confidence ellipsoids for 2-D Gaussians.

An ellipsoid is the sublevel set

    e = { q : (q - center)^T Sigma^{-1} (q - center) <= c }

with c = -2 ln(1 - gamma) the chi-square quantile putting probability gamma
inside e when q ~ N(center, Sigma).  The set is closed: boundary points count
as inside.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def chi2_threshold(gamma: float) -> float:
    """2-D chi-square quantile c(gamma) = -2 ln(1 - gamma)."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    return -2.0 * np.log(1.0 - gamma)


def floor_covariance(sigma: np.ndarray, floor: float) -> np.ndarray:
    """Symmetrize and clamp the eigenvalues of a 2x2 covariance at ``floor``."""
    sigma = 0.5 * (sigma + sigma.T)
    vals, vecs = np.linalg.eigh(sigma)
    vals = np.maximum(vals, floor)
    return (vecs * vals) @ vecs.T


@dataclass(frozen=True)
class Ellipsoid:
    """Closed confidence ellipsoid around a 2-D Gaussian."""

    center: np.ndarray
    sigma: np.ndarray
    threshold: float
    _inv: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        center = np.asarray(self.center, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if center.shape != (2,) or sigma.shape != (2, 2):
            raise ValueError("ellipsoid needs a 2-vector center and 2x2 covariance")
        if not (np.all(np.isfinite(center)) and np.all(np.isfinite(sigma))):
            raise ValueError("non-finite ellipsoid parameters")
        if not np.allclose(sigma, sigma.T, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        det = sigma[0, 0] * sigma[1, 1] - sigma[0, 1] * sigma[1, 0]
        if sigma[0, 0] <= 0.0 or det <= 0.0:
            raise ValueError("covariance must be positive definite")
        if self.threshold <= 0.0:
            raise ValueError("threshold must be positive")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "sigma", sigma)
        inv = np.array(
            [[sigma[1, 1], -sigma[0, 1]], [-sigma[1, 0], sigma[0, 0]]]
        ) / det
        object.__setattr__(self, "_inv", inv)

    def quadratic_form(self, points: np.ndarray) -> np.ndarray:
        """(q - center)^T Sigma^{-1} (q - center) for one point or an array."""
        diff = np.asarray(points, dtype=np.float64) - self.center
        single = diff.ndim == 1
        diff = np.atleast_2d(diff)
        q = np.einsum("...i,ij,...j->...", diff, self._inv, diff)
        return q[0] if single else q

    def contains(self, points: np.ndarray) -> np.ndarray | bool:
        """Closed-set membership test."""
        q = self.quadratic_form(points)
        return q <= self.threshold

    def semi_axes(self) -> tuple[np.ndarray, np.ndarray]:
        """(lengths, directions): semi-axis lengths sqrt(threshold * eigval)."""
        vals, vecs = np.linalg.eigh(self.sigma)
        return np.sqrt(self.threshold * vals), vecs

    def inflated(self, radius: float) -> "Ellipsoid":
        """Conservative outer bound of the Minkowski sum with a disk.

        Scales the threshold so every boundary point moves outward by at
        least ``radius``: with minimal semi-axis a_min, the scale factor
        s = 1 + radius/a_min satisfies s * h(u) >= h(u) + radius for the
        support function h, hence the scaled ellipsoid contains
        e (+) disk(radius).
        """
        if radius < 0.0:
            raise ValueError("radius must be >= 0")
        if radius == 0.0:
            return self
        lengths, _ = self.semi_axes()
        a_min = float(lengths.min())
        scale = 1.0 + radius / a_min
        return Ellipsoid(
            center=self.center, sigma=self.sigma, threshold=self.threshold * scale * scale
        )


def confidence_ellipsoid(mu: np.ndarray, sigma: np.ndarray, gamma: float) -> Ellipsoid:
    """Ellipsoid containing probability gamma of N(mu, sigma)."""
    return Ellipsoid(center=mu, sigma=sigma, threshold=chi2_threshold(gamma))
