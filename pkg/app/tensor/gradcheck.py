"""Finite-difference verification of tape gradients."""

from typing import Callable, List, Sequence

import numpy as np

from app.errors import NumericError
from app.tensor.matrix import Matrix
from app.tensor.tape import GradTape, no_tape

RELATIVE_FLOOR = 1e-4


def gradient_check(
    f: Callable[[Sequence[Matrix]], Matrix],
    params: Sequence[Matrix],
    h: float = 1e-5,
) -> float:
    """
    Compare tape gradients against central differences.

    Args:
        f: Maps a parameter list to a 1×1 loss Matrix
        params: Point at which to check
        h: Finite-difference step

    Returns:
        Largest relative error |a - n| / max(|a|, |n|, 1e-4) over all entries
    """
    params = list(params)
    with GradTape() as tape:
        loss = f(params)
    if not np.isfinite(loss.item()):
        raise NumericError("gradient_check: f is not finite")
    analytic = tape.gradient(loss, params)

    worst = 0.0
    for i, param in enumerate(params):
        base = param.data
        for idx in np.ndindex(param.shape):
            plus = base.copy()
            plus[idx] += h
            minus = base.copy()
            minus[idx] -= h
            numeric = (_evaluate(f, params, i, plus) - _evaluate(f, params, i, minus)) / (2.0 * h)
            a = float(analytic[i][idx])
            err = abs(a - numeric) / max(abs(a), abs(numeric), RELATIVE_FLOOR)
            worst = max(worst, err)
    return worst


def _evaluate(f, params: List[Matrix], index: int, value: np.ndarray) -> float:
    swapped = list(params)
    swapped[index] = Matrix(value)
    with no_tape():
        result = f(swapped).item()
    if not np.isfinite(result):
        raise NumericError("gradient_check: f is not finite at a perturbed point")
    return result
