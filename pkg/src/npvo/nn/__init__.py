"""Hand-written recurrent network kernel: cells, loss, BPTT, Adam, dropout."""

from .backprop import backward_core, compute_gradients, rollout_loss_grads
from .cells import (
    ForwardCache,
    forward_core,
    lstm_forward,
    rnn_forward,
    rollout_forward,
    total_steps,
)
from .loss import huber_loss
from .masks import DropoutMask, MaskPolicy, ones_mask, sample_dropout_mask
from .optim import Adam
from .weights import WeightFormatError, WeightSet, init_weights, param_keys

__all__ = [
    "Adam",
    "DropoutMask",
    "ForwardCache",
    "MaskPolicy",
    "WeightFormatError",
    "WeightSet",
    "backward_core",
    "compute_gradients",
    "forward_core",
    "huber_loss",
    "init_weights",
    "lstm_forward",
    "ones_mask",
    "param_keys",
    "rnn_forward",
    "rollout_forward",
    "rollout_loss_grads",
    "sample_dropout_mask",
    "total_steps",
]
