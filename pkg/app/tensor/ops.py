"""
Differentiable ops over Matrix values.

Each op computes its result with numpy and, when a GradTape is active,
records a backward function returning one gradient per input.
"""

from typing import List, Optional, Sequence

import numpy as np

from app.errors import ContractViolation, ShapeError
from app.tensor.losses import softmax_cross_entropy
from app.tensor.matrix import Matrix
from app.tensor.tape import BackwardFn, active_tape


def _emit(name: str, value: np.ndarray, inputs: Sequence[Matrix], backward: BackwardFn) -> Matrix:
    out = Matrix._from_array(value)
    tape = active_tape()
    if tape is not None:
        tape.record(name, out, inputs, backward)
    return out


def _reduce_to(grad: np.ndarray, shape) -> np.ndarray:
    """Sum a broadcast gradient back down to an operand's shape."""
    if shape[0] == 1 and grad.shape[0] != 1:
        grad = grad.sum(axis=0, keepdims=True)
    if shape[1] == 1 and grad.shape[1] != 1:
        grad = grad.sum(axis=1, keepdims=True)
    return grad


def _broadcast_check(name: str, a: Matrix, b: Matrix) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{name}: cannot broadcast {a.shape} with {b.shape}") from None


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Standard matrix product a·b."""
    if a.cols != b.rows:
        raise ShapeError(f"matmul: {a.rows}×{a.cols} · {b.rows}×{b.cols}")
    a_data, b_data = a.data, b.data

    def backward(g):
        return g @ b_data.T, a_data.T @ g

    return _emit("matmul", a_data @ b_data, (a, b), backward)


def add(a: Matrix, b: Matrix) -> Matrix:
    _broadcast_check("add", a, b)

    def backward(g):
        return _reduce_to(g, a.shape), _reduce_to(g, b.shape)

    return _emit("add", a.data + b.data, (a, b), backward)


def sub(a: Matrix, b: Matrix) -> Matrix:
    _broadcast_check("sub", a, b)

    def backward(g):
        return _reduce_to(g, a.shape), -_reduce_to(g, b.shape)

    return _emit("sub", a.data - b.data, (a, b), backward)


def mul(a: Matrix, b: Matrix) -> Matrix:
    """Elementwise product with row/column broadcasting."""
    _broadcast_check("mul", a, b)
    a_data, b_data = a.data, b.data

    def backward(g):
        return _reduce_to(g * b_data, a.shape), _reduce_to(g * a_data, b.shape)

    return _emit("mul", a_data * b_data, (a, b), backward)


def scale(a: Matrix, factor: float) -> Matrix:
    def backward(g):
        return (g * factor,)

    return _emit("scale", a.data * factor, (a,), backward)


def relu(a: Matrix) -> Matrix:
    positive = a.data > 0

    def backward(g):
        return (g * positive,)

    return _emit("relu", np.where(positive, a.data, 0.0), (a,), backward)


def tanh(a: Matrix) -> Matrix:
    y = np.tanh(a.data)

    def backward(g):
        return (g * (1.0 - y * y),)

    return _emit("tanh", y, (a,), backward)


def stable_sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(a: Matrix) -> Matrix:
    y = stable_sigmoid(a.data)

    def backward(g):
        return (g * y * (1.0 - y),)

    return _emit("sigmoid", y, (a,), backward)


def concat_cols(parts: Sequence[Matrix]) -> Matrix:
    if not parts:
        raise ShapeError("concat_cols: nothing to concatenate")
    rows = {p.rows for p in parts}
    if len(rows) != 1:
        raise ShapeError(f"concat_cols: row counts differ {sorted(rows)}")
    bounds = np.cumsum([0] + [p.cols for p in parts])

    def backward(g):
        return [g[:, bounds[i]:bounds[i + 1]] for i in range(len(parts))]

    return _emit("concat_cols", np.hstack([p.data for p in parts]), parts, backward)


def concat_rows(parts: Sequence[Matrix]) -> Matrix:
    if not parts:
        raise ShapeError("concat_rows: nothing to concatenate")
    cols = {p.cols for p in parts}
    if len(cols) != 1:
        raise ShapeError(f"concat_rows: column counts differ {sorted(cols)}")
    bounds = np.cumsum([0] + [p.rows for p in parts])

    def backward(g):
        return [g[bounds[i]:bounds[i + 1], :] for i in range(len(parts))]

    return _emit("concat_rows", np.vstack([p.data for p in parts]), parts, backward)


def gather_rows(a: Matrix, indices: Sequence[int]) -> Matrix:
    """Rows of a in the given order (repeats allowed)."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= a.rows):
        raise ShapeError(f"gather_rows: index out of range for {a.rows} rows")

    def backward(g):
        grad = np.zeros(a.shape)
        np.add.at(grad, idx, g)
        return (grad,)

    return _emit("gather_rows", a.data[idx].reshape(len(idx), a.cols), (a,), backward)


def mean_rows(a: Matrix) -> Matrix:
    """Column-wise mean, 1×cols."""
    if a.rows == 0:
        raise ShapeError("mean_rows: no rows")
    n = a.rows

    def backward(g):
        return (np.repeat(g / n, n, axis=0),)

    return _emit("mean_rows", a.data.mean(axis=0, keepdims=True), (a,), backward)


def sum_all(a: Matrix) -> Matrix:
    def backward(g):
        return (np.full(a.shape, g[0, 0]),)

    return _emit("sum_all", np.array([[a.data.sum()]]), (a,), backward)


def aggregate_rows(
    rows: Sequence[Matrix],
    allowed: Optional[Sequence[np.ndarray]] = None,
    mode: str = "max",
) -> Matrix:
    """
    Combine 1×n rows column by column.

    For each column only the rows whose allowed flag is set take part; a
    column allowed nowhere falls back to all rows. Max routes the gradient to
    the first maximal row.

    Args:
        rows: 1×n matrices
        allowed: Optional boolean vector per row
        mode: "max", "mean" or "sum"
    """
    if not rows:
        raise ShapeError("aggregate_rows: no rows")
    if any(r.rows != 1 for r in rows) or len({r.cols for r in rows}) != 1:
        raise ShapeError("aggregate_rows: expects 1×n rows of equal width")
    if mode not in ("max", "mean", "sum"):
        raise ContractViolation(f"unknown aggregation mode {mode!r}")

    stacked = np.vstack([r.data for r in rows])
    if allowed is None:
        flags = np.ones(stacked.shape, dtype=bool)
    else:
        flags = np.vstack([np.asarray(a, dtype=bool).reshape(1, -1) for a in allowed])
    flags = flags | ~flags.any(axis=0, keepdims=True)

    if mode == "max":
        masked = np.where(flags, stacked, -np.inf)
        winner = masked.argmax(axis=0)
        value = stacked[winner, np.arange(stacked.shape[1])].reshape(1, -1)
        weights = np.zeros(stacked.shape)
        weights[winner, np.arange(stacked.shape[1])] = 1.0
    else:
        weights = flags.astype(np.float64)
        if mode == "mean":
            weights = weights / weights.sum(axis=0, keepdims=True)
        value = (weights * stacked).sum(axis=0, keepdims=True)

    def backward(g):
        return [g * weights[i:i + 1, :] for i in range(len(rows))]

    return _emit(f"aggregate_{mode}", value, rows, backward)


def cross_entropy(logits: Matrix, target: int, allowed: Optional[np.ndarray] = None) -> Matrix:
    """Tape form of softmax_cross_entropy on a 1×C logit row."""
    if logits.rows != 1:
        raise ShapeError(f"cross_entropy: logits must be a row, got {logits.rows} rows")
    loss, grad = softmax_cross_entropy(logits.data[0], target, mask=allowed)
    grad = grad.reshape(1, -1)

    def backward(g):
        return (g[0, 0] * grad,)

    return _emit("cross_entropy", np.array([[loss]]), (logits,), backward)


def binary_cross_entropy_with_logits(logits: Matrix, targets: Sequence[float]) -> Matrix:
    """Mean binary cross-entropy over an n×1 column of logits."""
    z = logits.data.reshape(-1)
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    if logits.cols != 1 or z.size != y.size:
        raise ShapeError(f"bce: logits {logits.shape} vs {y.size} targets")
    if z.size == 0:
        raise ShapeError("bce: no logits")
    losses = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    grad = ((stable_sigmoid(z) - y) / z.size).reshape(-1, 1)

    def backward(g):
        return (g[0, 0] * grad,)

    return _emit("bce_logits", np.array([[losses.mean()]]), (logits,), backward)


def add_all(terms: List[Matrix]) -> Matrix:
    """Sum of same-shaped matrices."""
    total = terms[0]
    for term in terms[1:]:
        total = add(total, term)
    return total
