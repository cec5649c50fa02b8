"""BPTT gradients checked against central finite differences.

The finite-difference oracle below re-evaluates the rollout cost through the
public forward path only, so it is independent of the backward-pass code.
"""

import numpy as np
import pytest

from npvo.nn import (
    DropoutMask,
    MaskPolicy,
    WeightSet,
    compute_gradients,
    forward_core,
    init_weights,
    rollout_forward,
    rollout_loss_grads,
    sample_dropout_mask,
)
from npvo.nn.loss import huber_loss

FD_STEP = 1e-5
REL_TOL = 1e-4


def rollout_cost(weights, inputs, targets, mask, policy, delta):
    """Forward-only cost evaluation used as the differentiation oracle."""
    preds, _ = rollout_forward(weights, inputs, targets.shape[0], mask, policy)
    value, _ = huber_loss(preds - targets, delta)
    return value


def fd_gradients(weights, inputs, targets, mask, policy, delta):
    grads = {}
    for key, w in weights.params.items():
        g = np.zeros_like(w)
        flat = w.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + FD_STEP
            up = rollout_cost(weights, inputs, targets, mask, policy, delta)
            flat[idx] = orig - FD_STEP
            down = rollout_cost(weights, inputs, targets, mask, policy, delta)
            flat[idx] = orig
            g.reshape(-1)[idx] = (up - down) / (2.0 * FD_STEP)
        grads[key] = g
    return grads


def max_rel_error(analytic, numeric, floor=1e-6):
    # The floor keeps finite-difference roundoff on near-zero entries from
    # dominating; it must stay far below typical gradient magnitudes.
    worst = 0.0
    for key in analytic:
        a, n = analytic[key], numeric[key]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def make_case(variant, seed, policy):
    rng = np.random.default_rng(seed)
    weights = init_weights(variant, 2, 4, 2, rng)
    # Shrink weights so every residual stays inside the quadratic Huber branch
    # (a residual near the knot would break the finite-difference estimate).
    for key, w in weights.params.items():
        if not key.startswith("b_"):
            weights.params[key] = 0.5 * w
    inputs = rng.normal(scale=0.3, size=(5, 2))
    targets = rng.normal(scale=0.3, size=(3, 2))
    if policy is MaskPolicy.NO_DROPOUT:
        mask = None
    elif policy is MaskPolicy.FIXED_PER_SEQUENCE:
        mask = sample_dropout_mask(0.7, 2, 4, rng)
    else:
        total = inputs.shape[0] + targets.shape[0] - 1
        mask = [sample_dropout_mask(0.7, 2, 4, rng) for _ in range(total)]
    return weights, inputs, targets, mask


@pytest.mark.parametrize("variant", ["lstm", "rnn"])
def test_bptt_matches_finite_differences_20_seeds(variant):
    for seed in range(20):
        weights, inputs, targets, mask = make_case(variant, seed, MaskPolicy.NO_DROPOUT)
        _, analytic = compute_gradients(
            inputs, targets, weights, delta=1.0
        )
        numeric = fd_gradients(weights, inputs, targets, None, MaskPolicy.NO_DROPOUT, 1.0)
        err = max_rel_error(analytic, numeric)
        assert err <= REL_TOL, f"{variant} seed {seed}: rel err {err:.2e}"


@pytest.mark.parametrize("variant", ["lstm", "rnn"])
@pytest.mark.parametrize(
    "policy", [MaskPolicy.FIXED_PER_SEQUENCE, MaskPolicy.FRESH_PER_STEP]
)
def test_bptt_with_dropout_masks(variant, policy):
    for seed in (3, 11, 27):
        weights, inputs, targets, mask = make_case(variant, seed, policy)
        _, analytic = compute_gradients(
            inputs, targets, weights, mask=mask, policy=policy, delta=1.0
        )
        numeric = fd_gradients(weights, inputs, targets, mask, policy, 1.0)
        err = max_rel_error(analytic, numeric)
        assert err <= REL_TOL, f"{variant}/{policy} seed {seed}: rel err {err:.2e}"


def test_linear_huber_branch_gradient():
    # Large targets push every residual into the linear branch; the gradient
    # there is delta * sign(residual), exercised end to end.
    weights, inputs, targets, _ = make_case("lstm", 5, MaskPolicy.NO_DROPOUT)
    targets = targets + 50.0
    _, analytic = compute_gradients(inputs, targets, weights, delta=0.5)
    numeric = fd_gradients(weights, inputs, targets, None, MaskPolicy.NO_DROPOUT, 0.5)
    # Cost here is O(100), so finite differences carry ~1e-9 absolute noise;
    # the floor is sized to that, well under the gradient scale.
    assert max_rel_error(analytic, numeric, floor=1e-4) <= REL_TOL


@pytest.mark.parametrize("variant", ["lstm", "rnn"])
def test_batched_ragged_gradients_match_per_pair_sum(variant):
    # The padded batched path must agree with summing independent per-pair
    # gradients; this is what the online trainer relies on.
    rng = np.random.default_rng(123)
    weights = init_weights(variant, 2, 4, 2, rng)
    m = 3
    lengths = np.array([1, 2, 4])
    B = len(lengths)
    T_in = int(lengths.max())
    T = int((lengths + m - 1).max())
    inputs = rng.normal(scale=0.4, size=(B, T_in, 2))
    targets = rng.normal(scale=0.4, size=(B, m, 2))
    z_x = (rng.random((B, T, 2)) < 0.8).astype(float)
    z_h = (rng.random((B, T, 4)) < 0.8).astype(float)

    _, cache = forward_core(weights, inputs, lengths, m, z_x, z_h)
    loss_b, grads_b = rollout_loss_grads(weights, cache, targets, delta=1.0)

    total = weights.zeros_like()
    loss_s = 0.0
    for b in range(B):
        k = lengths[b]
        steps = k + m - 1
        masks = [DropoutMask(z_x=z_x[b, t], z_h=z_h[b, t]) for t in range(steps)]
        value, grads = compute_gradients(
            inputs[b, :k],
            targets[b],
            weights,
            mask=masks,
            policy=MaskPolicy.FRESH_PER_STEP,
            delta=1.0,
        )
        loss_s += value
        for key in total:
            total[key] += grads[key]

    assert loss_b == pytest.approx(loss_s, rel=1e-12)
    for key in total:
        np.testing.assert_allclose(grads_b[key], total[key], rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("variant,forward", [("lstm", None), ("rnn", None)])
def test_all_zero_weights_give_zero_outputs(variant, forward):
    from npvo.nn import lstm_forward, param_keys, rnn_forward

    probe = WeightSet.__new__(WeightSet)
    probe.variant = variant
    probe.input_dim, probe.hidden_dim, probe.output_dim = 2, 3, 2
    params = {k: np.zeros(probe.shape_of(k)) for k in param_keys(variant)}
    zero = WeightSet(variant=variant, input_dim=2, hidden_dim=3, output_dim=2, params=params)
    fn = lstm_forward if variant == "lstm" else rnn_forward
    outputs, _ = fn(np.ones((4, 2)), zero)
    np.testing.assert_array_equal(outputs, np.zeros((4, 2)))
