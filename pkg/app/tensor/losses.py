"""Loss functions on plain numpy vectors."""

from typing import Optional, Sequence, Tuple

import numpy as np

from app.errors import ContractViolation, ShapeError


def softmax(logits: Sequence[float], mask: Optional[Sequence[bool]] = None) -> np.ndarray:
    """Max-subtracted softmax; masked entries get probability 0."""
    z = np.asarray(logits, dtype=np.float64).reshape(-1)
    if z.size == 0:
        raise ShapeError("softmax of empty logits")
    allowed = np.ones(z.size, dtype=bool) if mask is None else np.asarray(mask, dtype=bool).reshape(-1)
    if allowed.size != z.size:
        raise ShapeError(f"mask length {allowed.size} != logits length {z.size}")
    if not allowed.any():
        raise ContractViolation("softmax with every class masked")
    shifted = np.where(allowed, z - z[allowed].max(), -np.inf)
    exp = np.exp(shifted)
    return exp / exp.sum()


def softmax_cross_entropy(
    logits: Sequence[float],
    target: int,
    mask: Optional[Sequence[bool]] = None,
) -> Tuple[float, np.ndarray]:
    """
    Softmax cross-entropy and its gradient with respect to the logits.

    Args:
        logits: Raw class scores
        target: Index of the true class
        mask: Optional allowed-class flags; masked classes behave as -inf logits

    Returns:
        (loss, grad) with grad = softmax(logits) - onehot(target)
    """
    z = np.asarray(logits, dtype=np.float64).reshape(-1)
    if z.size == 0:
        raise ShapeError("softmax_cross_entropy of empty logits")
    if not 0 <= target < z.size:
        raise ShapeError(f"target {target} out of range for {z.size} logits")
    allowed = np.ones(z.size, dtype=bool) if mask is None else np.asarray(mask, dtype=bool).reshape(-1)
    if allowed.size != z.size:
        raise ShapeError(f"mask length {allowed.size} != logits length {z.size}")
    if not allowed[target]:
        raise ContractViolation(f"target class {target} is masked")

    shifted = np.where(allowed, z - z[allowed].max(), -np.inf)
    exp = np.exp(shifted)
    total = exp.sum()
    loss = max(float(np.log(total) - shifted[target]), 0.0)
    grad = exp / total
    grad[target] -= 1.0
    return loss, grad
