"""
Tensor core: dense matrices, feed-forward layers, a reverse-mode tape and Adam.

Usage:
    from app.tensor import GradTape, Matrix, ops

    with GradTape() as tape:
        loss = ops.sum_all(ops.matmul(x, w))
    (grad_w,) = tape.gradient(loss, [w])
"""

from app.tensor import ops
from app.tensor.gradcheck import gradient_check
from app.tensor.layers import Activation, FeedForwardNet, Layer, ff_forward, ff_logits
from app.tensor.losses import softmax, softmax_cross_entropy
from app.tensor.matrix import Matrix
from app.tensor.optim import Adam, AdamState, adam_step
from app.tensor.tape import GradTape, active_tape, no_tape

__all__ = [
    "ops",
    "Matrix",
    "GradTape",
    "active_tape",
    "no_tape",
    "Activation",
    "Layer",
    "FeedForwardNet",
    "ff_forward",
    "ff_logits",
    "softmax",
    "softmax_cross_entropy",
    "Adam",
    "AdamState",
    "adam_step",
    "gradient_check",
]
