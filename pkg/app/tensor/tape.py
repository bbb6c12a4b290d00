"""
Reverse-mode gradient tape.

Ops record themselves on the active tape while one is open:

    with GradTape() as tape:
        loss = cross_entropy(logits, target)
    grads = tape.gradient(loss, params)

Outside a tape nothing is recorded (inference mode).
"""

from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from app.errors import ContractViolation, ShapeError
from app.tensor.matrix import Matrix

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_ACTIVE_TAPE: ContextVar[Optional["GradTape"]] = ContextVar("active_tape", default=None)


@dataclass(frozen=True)
class TapeRecord:
    """One recorded op: output, its inputs, and the vector-Jacobian product."""

    name: str
    output: Matrix
    inputs: Tuple[Matrix, ...]
    backward: BackwardFn


class GradTape:
    """Ordered record of differentiable ops for one forward pass."""

    def __init__(self):
        self.records: List[TapeRecord] = []
        self._token = None

    def __enter__(self) -> "GradTape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _ACTIVE_TAPE.reset(self._token)
        self._token = None

    def record(self, name: str, output: Matrix, inputs: Sequence[Matrix], backward: BackwardFn) -> None:
        self.records.append(TapeRecord(name, output, tuple(inputs), backward))

    def gradient(self, target: Matrix, params: Sequence[Matrix]) -> List[np.ndarray]:
        """
        Gradients of a scalar target with respect to params.

        Args:
            target: 1×1 Matrix produced while this tape was active
            params: Matrices to differentiate against

        Returns:
            One array per param, same shape; zeros where the target does not
            depend on the param.
        """
        if target.shape != (1, 1):
            raise ShapeError(f"gradient target must be 1×1, got {target.rows}×{target.cols}")

        grads: Dict[int, np.ndarray] = {id(target): np.ones((1, 1))}
        for rec in reversed(self.records):
            upstream = grads.get(id(rec.output))
            if upstream is None:
                continue
            input_grads = rec.backward(upstream)
            for inp, g in zip(rec.inputs, input_grads):
                if g is None:
                    continue
                if g.shape != inp.shape:
                    raise ContractViolation(
                        f"{rec.name}: gradient shape {g.shape} != input shape {inp.shape}"
                    )
                key = id(inp)
                grads[key] = grads[key] + g if key in grads else g

        return [np.array(grads.get(id(p), np.zeros(p.shape)), dtype=np.float64) for p in params]


def active_tape() -> Optional[GradTape]:
    return _ACTIVE_TAPE.get()


@contextmanager
def no_tape() -> Iterator[None]:
    """Suspend recording (used for finite-difference evaluations)."""
    token = _ACTIVE_TAPE.set(None)
    try:
        yield
    finally:
        _ACTIVE_TAPE.reset(token)
