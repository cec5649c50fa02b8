"""Backpropagation through time for both cell variants.

The backward pass mirrors forward_core exactly, including the closed-loop
rollout: at decode steps the consumed input is the previous step's output, so
input gradients are routed back into that output.  Inactive (padded) slots
carry state through unchanged and contribute nothing.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .cells import ForwardCache, _forward_single
from .loss import huber_loss
from .masks import DropoutMask, MaskPolicy
from .weights import WeightSet


def backward_core(
    weights: WeightSet,
    cache: ForwardCache,
    d_ys: np.ndarray,
) -> dict[str, np.ndarray]:
    """Gradients of a scalar cost w.r.t. every weight.

    Args:
        weights: the parameter set used in the forward pass.
        cache: cache returned by forward_core.
        d_ys: (B, T, output_dim) cost gradient w.r.t. every stored output
            (zero at slots that do not enter the cost).

    Returns:
        dict of gradient arrays keyed like ``weights.params``.
    """
    p = weights.params
    grads = weights.zeros_like()
    B, T, _ = cache.ys.shape
    h = weights.hidden_dim
    is_lstm = cache.variant == "lstm"
    lengths = cache.lengths

    dh_next = np.zeros((B, h))
    dc_next = np.zeros((B, h))
    dy_feedback = np.zeros((B, weights.output_dim))

    for t in range(T - 1, -1, -1):
        act = cache.active[:, t][:, None].astype(np.float64)
        dy_t = (d_ys[:, t] + dy_feedback) * act
        h_comp = cache.h_comp[:, t]
        grads["W_y"] += dy_t.T @ h_comp
        grads["b_y"] += dy_t.sum(axis=0)
        dh_stored = dh_next + dy_t @ p["W_y"]
        dh_comp = act * dh_stored
        dh_carry = (1.0 - act) * dh_stored

        xh = cache.xh[:, t]
        hh = cache.hh[:, t]
        if is_lstm:
            f_t, i_t, o_t = cache.f[:, t], cache.i[:, t], cache.o[:, t]
            g_t, c_prev, tc_t = cache.g[:, t], cache.c_prev[:, t], cache.tc[:, t]
            do = dh_comp * tc_t
            da_o = do * o_t * (1.0 - o_t)
            dc_total = act * dc_next + dh_comp * o_t * (1.0 - tc_t * tc_t)
            df = dc_total * c_prev
            da_f = df * f_t * (1.0 - f_t)
            di = dc_total * g_t
            da_i = di * i_t * (1.0 - i_t)
            dg = dc_total * i_t
            da_g = dg * (1.0 - g_t * g_t)
            for name, da in (("f", da_f), ("i", da_i), ("o", da_o), ("c", da_g)):
                grads[f"W_{name}"] += da.T @ xh
                grads[f"U_{name}"] += da.T @ hh
                grads[f"b_{name}"] += da.sum(axis=0)
            dxh = da_f @ p["W_f"] + da_i @ p["W_i"] + da_o @ p["W_o"] + da_g @ p["W_c"]
            dhh = da_f @ p["U_f"] + da_i @ p["U_i"] + da_o @ p["U_o"] + da_g @ p["U_c"]
            dc_next = f_t * dc_total + (1.0 - act) * dc_next
        else:
            da = dh_comp * (1.0 - h_comp * h_comp)
            grads["W_h"] += da.T @ xh
            grads["U_h"] += da.T @ hh
            grads["b_h"] += da.sum(axis=0)
            dxh = da @ p["W_h"]
            dhh = da @ p["U_h"]

        dx = cache.z_x[:, t] * dxh
        dh_next = cache.z_h[:, t] * dhh + dh_carry
        if cache.horizon >= 1 and t >= 1:
            fb = (t >= lengths)[:, None].astype(np.float64)
            dy_feedback = dx * fb
        else:
            dy_feedback = np.zeros_like(dy_feedback)

    return grads


def rollout_loss_grads(
    weights: WeightSet,
    cache: ForwardCache,
    targets: np.ndarray,
    delta: float,
) -> tuple[float, dict[str, np.ndarray]]:
    """Huber cost of a closed-loop rollout against targets, plus gradients.

    ``targets`` is (B, m, output_dim); the m predictions of sequence b sit at
    steps lengths[b]-1 .. lengths[b]+m-2 of the cache.  The cost sums Huber
    terms over every batch element, horizon step and coordinate.
    """
    if cache.horizon < 1:
        raise ValueError("cache does not hold a closed-loop rollout")
    B, T, o = cache.ys.shape
    m = cache.horizon
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != (B, m, o):
        raise ValueError(f"targets must be {(B, m, o)}, got {targets.shape}")

    steps = np.arange(T)
    # pred_slot[b, t] = horizon index of step t in sequence b, or -1.
    offset = steps[None, :] - (cache.lengths[:, None] - 1)
    is_pred = (offset >= 0) & (offset < m)
    preds = cache.ys[is_pred].reshape(B, m, o)
    value, dres = huber_loss(preds - targets, delta)
    d_ys = np.zeros_like(cache.ys)
    d_ys[is_pred] = dres.reshape(-1, o)
    return value, backward_core(weights, cache, d_ys)


def compute_gradients(
    inputs: np.ndarray,
    targets: np.ndarray,
    weights: WeightSet,
    mask: DropoutMask | Sequence[DropoutMask] | None = None,
    policy: MaskPolicy = MaskPolicy.NO_DROPOUT,
    delta: float = 1.0,
    keep_prob: float | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Cost and full BPTT gradient for one training pair.

    Runs the closed-loop rollout of ``weights`` over ``inputs`` (shape (k, d)),
    decodes len(targets) steps, and differentiates the summed Huber cost with
    transition point ``delta`` w.r.t. every weight.

    Returns:
        (cost, grads) with grads keyed like ``weights.params``.
    """
    targets = np.asarray(targets, dtype=np.float64)
    if targets.ndim != 2 or targets.shape[1] != weights.output_dim:
        raise ValueError(f"targets must be (m, {weights.output_dim})")
    m = targets.shape[0]
    if m < 1:
        raise ValueError("need at least one target step")
    _, cache = _forward_single(weights, inputs, m, mask, policy, keep_prob, rng)
    return rollout_loss_grads(weights, cache, targets[None, :, :], delta)
