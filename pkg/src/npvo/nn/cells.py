"""Forward passes for the simple-RNN and LSTM cells.

LSTM step (sigma = logistic sigmoid, (.) = elementwise product):

    x^_i = z_x (.) x_i                 h^_{i-1} = z_h (.) h_{i-1}
    f_i  = sigma(W_f x^_i + U_f h^_{i-1} + b_f)
    i_i  = sigma(W_i x^_i + U_i h^_{i-1} + b_i)
    o_i  = sigma(W_o x^_i + U_o h^_{i-1} + b_o)
    C~_i = tanh (W_c x^_i + U_c h^_{i-1} + b_c)
    C_i  = f_i (.) C_{i-1} + i_i (.) C~_i
    h_i  = o_i (.) tanh(C_i)
    y_i  = W_y h_i + b_y

Simple RNN step:

    h_i = tanh(W_h x^_i + U_h h^_{i-1} + b_h)
    y_i = W_y h_i + b_y

Initial hidden and cell states are zero.  The dropout masks multiply the raw
input and the previous hidden state; both paths see the masked values.

Two modes share one core:

* open loop (horizon = 0): the sequence of external inputs is consumed and an
  output is emitted at every step.
* closed-loop rollout (horizon = m >= 1): after the last external input, each
  output is fed back as the next input, producing an m-step prediction
  (the output at the last external step is the first of the m predictions).

The core is batched: ragged batches are padded to a common length and an
active mask freezes finished sequences.  All functions are pure given their
arguments; fresh-per-step masks are drawn from an explicitly passed RNG.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .masks import DropoutMask, MaskPolicy, sample_dropout_mask
from .weights import WeightSet


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class ForwardCache:
    """Everything the backward pass needs, stacked over (batch, time)."""

    variant: str
    lengths: np.ndarray        # (B,) external input steps per sequence
    horizon: int               # 0 = open loop
    active: np.ndarray         # (B, T) bool
    z_x: np.ndarray            # (B, T, d)
    z_h: np.ndarray            # (B, T, h)
    xh: np.ndarray             # (B, T, d) masked input actually consumed
    hh: np.ndarray             # (B, T, h) masked previous hidden state
    h_comp: np.ndarray         # (B, T, h) hidden state computed at each step
    ys: np.ndarray             # (B, T, o) outputs (zero at inactive slots)
    # LSTM-only internals (empty arrays for the RNN):
    f: np.ndarray
    i: np.ndarray
    o: np.ndarray
    g: np.ndarray
    c_prev: np.ndarray
    tc: np.ndarray


def total_steps(lengths: np.ndarray, horizon: int) -> np.ndarray:
    """Recurrence steps per sequence: k for open loop, k + m - 1 for rollout."""
    if horizon == 0:
        return lengths.copy()
    return lengths + horizon - 1


def forward_core(
    weights: WeightSet,
    inputs: np.ndarray,
    lengths: np.ndarray,
    horizon: int,
    z_x: np.ndarray,
    z_h: np.ndarray,
) -> tuple[np.ndarray, ForwardCache]:
    """Batched forward pass.

    Args:
        weights: parameter set; the variant decides the cell equations.
        inputs: (B, T_in, d) padded external inputs.
        lengths: (B,) number of valid external steps per sequence, each >= 1.
        horizon: 0 for open loop, else the number of fed-back predictions.
        z_x, z_h: dropout masks broadcastable to (B, T, d) / (B, T, h) where
            T = max total steps.

    Returns:
        (ys, cache) with ys of shape (B, T, output_dim).
    """
    p = weights.params
    d, h, o = weights.input_dim, weights.hidden_dim, weights.output_dim
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 3 or inputs.shape[2] != d:
        raise ValueError(f"inputs must be (B, T, {d}), got {inputs.shape}")
    if not np.all(np.isfinite(inputs)):
        raise ValueError("inputs contain non-finite entries")
    lengths = np.asarray(lengths, dtype=np.int64)
    if np.any(lengths < 1):
        raise ValueError("every sequence needs at least one input step")
    if np.any(lengths > inputs.shape[1]):
        raise ValueError("lengths exceed the padded input array")
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    if horizon >= 1 and o != d:
        raise ValueError(
            "closed-loop rollout feeds outputs back as inputs; "
            f"output_dim {o} must equal input_dim {d}"
        )

    B = inputs.shape[0]
    steps = total_steps(lengths, horizon)
    T = int(steps.max())
    active = np.arange(T)[None, :] < steps[:, None]

    z_x = np.broadcast_to(np.asarray(z_x, dtype=np.float64), (B, T, d))
    z_h = np.broadcast_to(np.asarray(z_h, dtype=np.float64), (B, T, h))

    is_lstm = weights.variant == "lstm"
    shape_h = (B, T, h)
    cache = ForwardCache(
        variant=weights.variant,
        lengths=lengths,
        horizon=horizon,
        active=active,
        z_x=z_x,
        z_h=z_h,
        xh=np.zeros((B, T, d)),
        hh=np.zeros(shape_h),
        h_comp=np.zeros(shape_h),
        ys=np.zeros((B, T, o)),
        f=np.zeros(shape_h if is_lstm else (0,)),
        i=np.zeros(shape_h if is_lstm else (0,)),
        o=np.zeros(shape_h if is_lstm else (0,)),
        g=np.zeros(shape_h if is_lstm else (0,)),
        c_prev=np.zeros(shape_h if is_lstm else (0,)),
        tc=np.zeros(shape_h if is_lstm else (0,)),
    )

    h_state = np.zeros((B, h))
    c_state = np.zeros((B, h))
    y_prev = np.zeros((B, o))
    W_y, b_y = p["W_y"], p["b_y"]

    for t in range(T):
        act = active[:, t]
        if horizon >= 1:
            feedback = t >= lengths
            x_t = np.where(feedback[:, None], y_prev, inputs[:, min(t, inputs.shape[1] - 1), :])
        else:
            x_t = inputs[:, t, :]
        xh = z_x[:, t, :] * x_t
        hh = z_h[:, t, :] * h_state
        if is_lstm:
            f_t = _sigmoid(xh @ p["W_f"].T + hh @ p["U_f"].T + p["b_f"])
            i_t = _sigmoid(xh @ p["W_i"].T + hh @ p["U_i"].T + p["b_i"])
            o_t = _sigmoid(xh @ p["W_o"].T + hh @ p["U_o"].T + p["b_o"])
            g_t = np.tanh(xh @ p["W_c"].T + hh @ p["U_c"].T + p["b_c"])
            c_comp = f_t * c_state + i_t * g_t
            tc_t = np.tanh(c_comp)
            h_comp = o_t * tc_t
            cache.f[:, t], cache.i[:, t], cache.o[:, t] = f_t, i_t, o_t
            cache.g[:, t], cache.c_prev[:, t], cache.tc[:, t] = g_t, c_state, tc_t
            c_state = np.where(act[:, None], c_comp, c_state)
        else:
            h_comp = np.tanh(xh @ p["W_h"].T + hh @ p["U_h"].T + p["b_h"])
        y_comp = h_comp @ W_y.T + b_y
        cache.xh[:, t], cache.hh[:, t], cache.h_comp[:, t] = xh, hh, h_comp
        cache.ys[:, t] = np.where(act[:, None], y_comp, 0.0)
        h_state = np.where(act[:, None], h_comp, h_state)
        y_prev = cache.ys[:, t]

    return cache.ys, cache


def _materialize_masks(
    weights: WeightSet,
    T: int,
    mask: DropoutMask | Sequence[DropoutMask] | None,
    policy: MaskPolicy,
    keep_prob: float | None,
    rng: np.random.Generator | None,
) -> tuple[np.ndarray, np.ndarray]:
    """Resolve a mask argument into (1, T, d) / (1, T, h) arrays."""
    d, h = weights.input_dim, weights.hidden_dim
    if policy is MaskPolicy.NO_DROPOUT:
        if mask is not None:
            raise ValueError("NO_DROPOUT takes no mask")
        return np.ones((1, 1, d)), np.ones((1, 1, h))
    if policy is MaskPolicy.FIXED_PER_SEQUENCE:
        if not isinstance(mask, DropoutMask):
            raise ValueError("FIXED_PER_SEQUENCE requires a single DropoutMask")
        _check_mask_dims(mask, d, h)
        return mask.z_x.reshape(1, 1, d), mask.z_h.reshape(1, 1, h)
    # FRESH_PER_STEP: explicit per-step masks, or sample them from the RNG.
    if mask is None:
        if rng is None or keep_prob is None:
            raise ValueError("FRESH_PER_STEP needs per-step masks or (keep_prob, rng)")
        masks = [sample_dropout_mask(keep_prob, d, h, rng) for _ in range(T)]
    else:
        if isinstance(mask, DropoutMask):
            raise ValueError("FRESH_PER_STEP requires one mask per step")
        masks = list(mask)
        if len(masks) != T:
            raise ValueError(f"need {T} per-step masks, got {len(masks)}")
        for m_t in masks:
            _check_mask_dims(m_t, d, h)
    z_x = np.stack([m_t.z_x for m_t in masks])[None, :, :]
    z_h = np.stack([m_t.z_h for m_t in masks])[None, :, :]
    return z_x, z_h


def _check_mask_dims(mask: DropoutMask, d: int, h: int) -> None:
    if mask.z_x.shape != (d,) or mask.z_h.shape != (h,):
        raise ValueError(
            f"mask dims ({mask.z_x.shape[0]}, {mask.z_h.shape[0]}) "
            f"do not match network dims ({d}, {h})"
        )


def _forward_single(
    weights: WeightSet,
    inputs: np.ndarray,
    horizon: int,
    mask: DropoutMask | Sequence[DropoutMask] | None,
    policy: MaskPolicy,
    keep_prob: float | None,
    rng: np.random.Generator | None,
) -> tuple[np.ndarray, ForwardCache]:
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2:
        raise ValueError(f"inputs must be (T, input_dim), got shape {inputs.shape}")
    k = inputs.shape[0]
    T = k if horizon == 0 else k + horizon - 1
    z_x, z_h = _materialize_masks(weights, T, mask, policy, keep_prob, rng)
    ys, cache = forward_core(
        weights,
        inputs[None, :, :],
        np.array([k]),
        horizon,
        z_x,
        z_h,
    )
    return ys[0], cache


def lstm_forward(
    inputs: np.ndarray,
    weights: WeightSet,
    mask: DropoutMask | Sequence[DropoutMask] | None = None,
    policy: MaskPolicy = MaskPolicy.NO_DROPOUT,
    keep_prob: float | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, ForwardCache]:
    """Open-loop LSTM pass over a (T, input_dim) sequence.

    Returns the (T, output_dim) outputs and the cache for backpropagation.
    """
    if weights.variant != "lstm":
        raise ValueError(f"lstm_forward got {weights.variant!r} weights")
    return _forward_single(weights, inputs, 0, mask, policy, keep_prob, rng)


def rnn_forward(
    inputs: np.ndarray,
    weights: WeightSet,
    mask: DropoutMask | Sequence[DropoutMask] | None = None,
    policy: MaskPolicy = MaskPolicy.NO_DROPOUT,
    keep_prob: float | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, ForwardCache]:
    """Open-loop simple-RNN pass; see lstm_forward."""
    if weights.variant != "rnn":
        raise ValueError(f"rnn_forward got {weights.variant!r} weights")
    return _forward_single(weights, inputs, 0, mask, policy, keep_prob, rng)


def rollout_forward(
    weights: WeightSet,
    history: np.ndarray,
    horizon: int,
    mask: DropoutMask | Sequence[DropoutMask] | None = None,
    policy: MaskPolicy = MaskPolicy.NO_DROPOUT,
    keep_prob: float | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, ForwardCache]:
    """Closed-loop rollout: consume the history, then decode ``horizon`` steps.

    Returns the (horizon, output_dim) predictions and the cache.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    ys, cache = _forward_single(weights, history, horizon, mask, policy, keep_prob, rng)
    k = history.shape[0]
    return ys[k - 1 : k - 1 + horizon], cache
