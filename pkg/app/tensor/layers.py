"""
Feed-forward layers.

A FeedForwardNet is an immutable stack of affine layers, each followed by
an activation. Parameters are exposed as a flat list so optimizers and
checkpoints can treat every network the same way.
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence, Tuple, Union

import numpy as np

from app.errors import ShapeError
from app.tensor import ops
from app.tensor.matrix import Matrix


class Activation(str, Enum):
    RELU = "relu"
    IDENTITY = "identity"
    SIGMOID = "sigmoid"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Layer:
    weight: Matrix  # in × out
    bias: Matrix  # 1 × out
    activation: Activation = Activation.IDENTITY

    def __post_init__(self):
        if self.bias.shape != (1, self.weight.cols):
            raise ShapeError(f"bias {self.bias.shape} does not fit weight {self.weight.shape}")

    @property
    def in_dim(self) -> int:
        return self.weight.rows

    @property
    def out_dim(self) -> int:
        return self.weight.cols


@dataclass(frozen=True)
class FeedForwardNet:
    layers: Tuple[Layer, ...]

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("FeedForwardNet needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ShapeError(f"layer dims incompatible: {prev.out_dim} -> {nxt.in_dim}")

    @classmethod
    def initialize(
        cls,
        dims: Sequence[int],
        activations: Sequence[Activation],
        rng: np.random.Generator,
    ) -> "FeedForwardNet":
        """
        Glorot-uniform weights, zero biases.

        Args:
            dims: Layer widths including input, e.g. [in, hidden, out]
            activations: One activation per layer (len(dims) - 1)
            rng: numpy Generator
        """
        if len(activations) != len(dims) - 1:
            raise ShapeError(f"{len(dims) - 1} layers need {len(dims) - 1} activations")
        layers = []
        for fan_in, fan_out, act in zip(dims, dims[1:], activations):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weight = Matrix(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            layers.append(Layer(weight, Matrix.zeros(1, fan_out), Activation(act)))
        return cls(tuple(layers))

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def parameters(self) -> List[Matrix]:
        params: List[Matrix] = []
        for layer in self.layers:
            params.extend([layer.weight, layer.bias])
        return params

    def with_parameters(self, params: Sequence[Matrix]) -> "FeedForwardNet":
        if len(params) != 2 * len(self.layers):
            raise ShapeError(f"expected {2 * len(self.layers)} parameters, got {len(params)}")
        return FeedForwardNet(
            tuple(
                Layer(params[2 * i], params[2 * i + 1], layer.activation)
                for i, layer in enumerate(self.layers)
            )
        )


def apply_activation(x: Matrix, activation: Activation) -> Matrix:
    if activation == Activation.RELU:
        return ops.relu(x)
    if activation == Activation.SIGMOID:
        return ops.sigmoid(x)
    return x


def _affine(layer: Layer, x: Matrix) -> Matrix:
    return ops.add(ops.matmul(x, layer.weight), layer.bias)


def ff_logits(net: FeedForwardNet, x: Matrix) -> Matrix:
    """Run every layer but skip the final activation."""
    if x.cols != net.in_dim:
        raise ShapeError(f"input width {x.cols} != network input {net.in_dim}")
    for layer in net.layers[:-1]:
        x = apply_activation(_affine(layer, x), layer.activation)
    return _affine(net.layers[-1], x)


def ff_forward(net: FeedForwardNet, x: Union[Matrix, Sequence[float], np.ndarray]) -> Union[Matrix, np.ndarray]:
    """
    Forward pass.

    A Matrix input is treated as a batch of rows and a Matrix comes back;
    a plain vector goes in and a plain vector comes out.
    """
    as_vector = not isinstance(x, Matrix)
    batch = Matrix(np.asarray(x, dtype=np.float64).reshape(1, -1)) if as_vector else x
    out = apply_activation(ff_logits(net, batch), net.layers[-1].activation)
    return out.vector() if as_vector else out
