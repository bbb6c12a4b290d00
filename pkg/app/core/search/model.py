"""
Search model parameters Θ.

Holds every learned tensor of the merged graph search network: the SG input
projection, the KG embedding table, edge-type embeddings, the propagation
message net and update gate, the importance net and the linear classifier.
"""

from dataclasses import dataclass, fields, replace
from typing import Dict, List, Sequence, Tuple

import numpy as np

from app.errors import ShapeError
from app.graphs.types import BACKGROUND, EDGE_TYPES, KnowledgeGraph
from app.tensor import Activation, FeedForwardNet, Matrix
from app.api.schemas import ModelDims


def class_labels(kg: KnowledgeGraph) -> Tuple[str, ...]:
    """Background first, then compounds in KG node order."""
    return (BACKGROUND,) + tuple(node.label for node in kg.compounds)


def _glorot(rng: np.random.Generator, rows: int, cols: int) -> Matrix:
    limit = np.sqrt(6.0 / (rows + cols))
    return Matrix(rng.uniform(-limit, limit, size=(rows, cols)))


@dataclass(frozen=True)
class SearchModel:
    """
    Immutable parameter set. Training produces new instances via with_parameters.

    Shapes (D embedding, H hidden, E edge embedding, D_img image, C classes):
        sg_projection      D × H
        kg_embeddings      |K| × H
        edge_embeddings    |edge types| × E
        message_net        2H+E → H (relu) → H
        gate_weight        2H × 1, gate_bias 1 × 1
        importance_net     2H+D_img → H (relu) → 1 (sigmoid)
        classifier_weight  H × C, classifier_bias 1 × C
    """

    classes: Tuple[str, ...]
    kg_labels: Tuple[str, ...]
    image_dim: int
    sg_projection: Matrix
    kg_embeddings: Matrix
    edge_embeddings: Matrix
    message_net: FeedForwardNet
    gate_weight: Matrix
    gate_bias: Matrix
    importance_net: FeedForwardNet
    classifier_weight: Matrix
    classifier_bias: Matrix

    def __post_init__(self):
        h = self.hidden_dim
        checks = [
            ("kg_embeddings", self.kg_embeddings.shape, (len(self.kg_labels), h)),
            ("edge_embeddings", self.edge_embeddings.shape, (len(EDGE_TYPES), self.edge_embeddings.cols)),
            ("message_net", (self.message_net.in_dim, self.message_net.out_dim), (2 * h + self.edge_dim, h)),
            ("gate_weight", self.gate_weight.shape, (2 * h, 1)),
            ("gate_bias", self.gate_bias.shape, (1, 1)),
            ("importance_net", (self.importance_net.in_dim, self.importance_net.out_dim), (2 * h + self.image_dim, 1)),
            ("classifier_weight", self.classifier_weight.shape, (h, len(self.classes))),
            ("classifier_bias", self.classifier_bias.shape, (1, len(self.classes))),
        ]
        for name, got, expected in checks:
            if got != expected:
                raise ShapeError(f"SearchModel.{name}: shape {got}, expected {expected}")

    @classmethod
    def initialize(
        cls,
        kg: KnowledgeGraph,
        embedding_dim: int = 32,
        hidden_dim: int = 32,
        image_dim: int = 32,
        edge_embedding_dim: int = 8,
        seed: int = 0,
    ) -> "SearchModel":
        """
        Fresh model for a knowledge graph.

        Args:
            kg: Knowledge graph the model will search (fixes |K| and the classes)
            embedding_dim: D, SG node embedding width
            hidden_dim: H, node state width
            image_dim: D_img, image embedding width
            edge_embedding_dim: E, edge-type embedding width
            seed: RNG seed; same seed gives an identical model
        """
        rng = np.random.default_rng(seed)
        h = hidden_dim
        classes = class_labels(kg)
        return cls(
            classes=classes,
            kg_labels=tuple(node.label for node in kg.nodes),
            image_dim=image_dim,
            sg_projection=_glorot(rng, embedding_dim, h),
            kg_embeddings=Matrix(rng.normal(0.0, 1.0 / np.sqrt(h), size=(len(kg.nodes), h))),
            edge_embeddings=Matrix(rng.normal(0.0, 1.0 / np.sqrt(edge_embedding_dim), size=(len(EDGE_TYPES), edge_embedding_dim))),
            message_net=FeedForwardNet.initialize(
                [2 * h + edge_embedding_dim, h, h], [Activation.RELU, Activation.IDENTITY], rng
            ),
            gate_weight=_glorot(rng, 2 * h, 1),
            gate_bias=Matrix.zeros(1, 1),
            importance_net=FeedForwardNet.initialize(
                [2 * h + image_dim, h, 1], [Activation.RELU, Activation.SIGMOID], rng
            ),
            classifier_weight=_glorot(rng, h, len(classes)),
            classifier_bias=Matrix.zeros(1, len(classes)),
        )

    @property
    def embedding_dim(self) -> int:
        return self.sg_projection.rows

    @property
    def hidden_dim(self) -> int:
        return self.sg_projection.cols

    @property
    def edge_dim(self) -> int:
        return self.edge_embeddings.cols

    @property
    def dims(self) -> ModelDims:
        return ModelDims(
            embedding_dim=self.embedding_dim,
            hidden_dim=self.hidden_dim,
            image_dim=self.image_dim,
            edge_embedding_dim=self.edge_dim,
            num_kg_nodes=len(self.kg_labels),
            num_classes=len(self.classes),
            num_edge_types=len(EDGE_TYPES),
        )

    def named_parameters(self) -> Dict[str, Matrix]:
        """Flat name → Matrix map in a fixed order (also the checkpoint layout)."""
        named: Dict[str, Matrix] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Matrix):
                named[f.name] = value
            elif isinstance(value, FeedForwardNet):
                for i, layer in enumerate(value.layers):
                    named[f"{f.name}.{i}.weight"] = layer.weight
                    named[f"{f.name}.{i}.bias"] = layer.bias
        return named

    def parameters(self) -> List[Matrix]:
        return list(self.named_parameters().values())

    def with_parameters(self, params: Sequence[Matrix]) -> "SearchModel":
        """Same architecture, new tensors (in parameters() order)."""
        params = list(params)
        expected = len(self.named_parameters())
        if len(params) != expected:
            raise ShapeError(f"expected {expected} parameters, got {len(params)}")
        updates = {}
        cursor = 0
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Matrix):
                if params[cursor].shape != value.shape:
                    raise ShapeError(f"{f.name}: shape {params[cursor].shape}, expected {value.shape}")
                updates[f.name] = params[cursor]
                cursor += 1
            elif isinstance(value, FeedForwardNet):
                count = 2 * len(value.layers)
                updates[f.name] = value.with_parameters(params[cursor:cursor + count])
                cursor += count
        return replace(self, **updates)
