"""Dropout masks for the recurrent cells.

A mask is a pair of 0/1 vectors (z_x over the input, z_h over the hidden
state) drawn entrywise from Bernoulli(keep_prob).  Masked values multiply the
raw ones; there is no inverse-keep-probability rescaling, so keep_prob = 1
reproduces the unmasked network exactly.

Policies:

* NO_DROPOUT          -- masks of all ones.
* FIXED_PER_SEQUENCE  -- one mask pair reused at every timestep.  Used at
  prediction time, where each forward pass under a fixed mask is one
  posterior sample.
* FRESH_PER_STEP      -- independent mask pair per timestep.  Used during
  training as a regularizer.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class MaskPolicy(enum.Enum):
    NO_DROPOUT = "no_dropout"
    FIXED_PER_SEQUENCE = "fixed_per_sequence"
    FRESH_PER_STEP = "fresh_per_step"


@dataclass(frozen=True)
class DropoutMask:
    """One input-mask/hidden-mask pair with entries in {0, 1}."""

    z_x: np.ndarray
    z_h: np.ndarray

    def __post_init__(self) -> None:
        for name, z in (("z_x", self.z_x), ("z_h", self.z_h)):
            if z.ndim != 1:
                raise ValueError(f"{name} must be a vector")
            if not np.all((z == 0.0) | (z == 1.0)):
                raise ValueError(f"{name} entries must be 0 or 1")


def ones_mask(input_dim: int, hidden_dim: int) -> DropoutMask:
    return DropoutMask(z_x=np.ones(input_dim), z_h=np.ones(hidden_dim))


def sample_dropout_mask(
    keep_prob: float,
    input_dim: int,
    hidden_dim: int,
    rng: np.random.Generator,
) -> DropoutMask:
    """Draw one mask pair with entries ~ Bernoulli(keep_prob).

    keep_prob is the probability an entry is KEPT (set to 1).
    """
    if not 0.0 < keep_prob <= 1.0:
        raise ValueError(f"keep_prob must be in (0, 1], got {keep_prob}")
    z_x = (rng.random(input_dim) < keep_prob).astype(np.float64)
    z_h = (rng.random(hidden_dim) < keep_prob).astype(np.float64)
    return DropoutMask(z_x=z_x, z_h=z_h)
