"""
Dense matrix value type.

Every learned tensor in the search model is a Matrix: a read-only, row-major,
float64 numpy array with exactly two dimensions. Vectors are 1×n matrices.
"""

from typing import List, Sequence, Tuple

import numpy as np

from app.errors import NumericError, ShapeError


class Matrix:
    """
    Immutable 2-D float64 matrix.

    Identity matters: the gradient tape keys gradients by object, so two
    Matrix instances with equal data are still different parameters.

    Example:
        >>> m = Matrix([[1, 2], [3, 4]])
        >>> m.shape
        (2, 2)
    """

    __slots__ = ("_data",)

    def __init__(self, data):
        if isinstance(data, Matrix):
            data = data.data
        array = np.array(data, dtype=np.float64)
        if array.ndim == 0:
            array = array.reshape(1, 1)
        elif array.ndim == 1:
            array = array.reshape(1, -1)
        elif array.ndim != 2:
            raise ShapeError(f"Matrix needs at most 2 dimensions, got shape {array.shape}")
        self._data = _freeze(array)

    @classmethod
    def _from_array(cls, array: np.ndarray) -> "Matrix":
        """Wrap a freshly computed 2-D array without copying it."""
        if array.ndim != 2:
            raise ShapeError(f"op produced non-matrix shape {array.shape}")
        obj = cls.__new__(cls)
        obj._data = _freeze(array.astype(np.float64, copy=False))
        return obj

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "Matrix":
        return cls._from_array(np.zeros((rows, cols)))

    @classmethod
    def from_row_major(cls, rows: int, cols: int, values: Sequence[float]) -> "Matrix":
        """Build from a flat row-major list (the checkpoint layout)."""
        if len(values) != rows * cols:
            raise ShapeError(
                f"row-major data has {len(values)} values, expected {rows}×{cols}={rows * cols}"
            )
        return cls._from_array(np.array(values, dtype=np.float64).reshape(rows, cols))

    @property
    def data(self) -> np.ndarray:
        """Read-only view of the underlying array."""
        return self._data

    @property
    def rows(self) -> int:
        return self._data.shape[0]

    @property
    def cols(self) -> int:
        return self._data.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self._data.shape  # type: ignore[return-value]

    def row_major(self) -> List[float]:
        return self._data.ravel().tolist()

    def vector(self) -> np.ndarray:
        """Flattened writable copy."""
        return self._data.ravel().copy()

    def item(self) -> float:
        if self.shape != (1, 1):
            raise ShapeError(f"item() needs a 1×1 matrix, got {self.rows}×{self.cols}")
        return float(self._data[0, 0])

    def __repr__(self) -> str:
        return f"Matrix({self.rows}×{self.cols})"


def _freeze(array: np.ndarray) -> np.ndarray:
    if not np.isfinite(array).all():
        raise NumericError(f"non-finite value in {array.shape[0]}×{array.shape[1]} matrix")
    array.setflags(write=False)
    return array
