"""
Checkpoint persistence for SearchModel.

Format (JSON, version "model/1"):
    {"version", "dims", "classes", "kg_labels",
     "parameters": {name: {"rows", "cols", "data": row-major}}, "config"}
"""

import logging
from typing import Any, Dict, Optional, Tuple, Union

from pydantic import ValidationError

from app.api.schemas import CheckpointSchema, MatrixSchema
from app.core.search.model import SearchModel, class_labels
from app.errors import CheckpointMismatchError, ParseError, ShapeError
from app.graphs.types import EDGE_TYPES, KnowledgeGraph
from app.ingest.detections import load_json, schema_error
from app.tensor import Matrix

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = "model/1"


def save_checkpoint(model: SearchModel, config: Optional[Dict[str, Any]] = None) -> bytes:
    """
    Serialize a model.

    Args:
        model: Parameters to store
        config: Search/training settings recorded alongside (informational)
    """
    schema = CheckpointSchema(
        version=CHECKPOINT_VERSION,
        dims=model.dims,
        classes=list(model.classes),
        kg_labels=list(model.kg_labels),
        parameters={
            name: MatrixSchema(rows=m.rows, cols=m.cols, data=m.row_major())
            for name, m in model.named_parameters().items()
        },
        config=config or {},
    )
    return schema.model_dump_json().encode("utf-8")


def load_checkpoint(
    data: Union[bytes, str],
    kg: KnowledgeGraph,
    embedding_dim: Optional[int] = None,
) -> Tuple[SearchModel, Dict[str, Any]]:
    """
    Restore a model and check it fits the knowledge graph.

    Args:
        data: Checkpoint bytes
        kg: Knowledge graph the model will run against
        embedding_dim: Expected SG embedding width, when the caller has one

    Returns:
        (model, stored config)

    Raises:
        ParseError: Not a readable checkpoint
        CheckpointMismatchError: Dimensions, classes or KG labels disagree
    """
    raw = load_json(data, "checkpoint")
    try:
        schema = CheckpointSchema.model_validate(raw)
    except ValidationError as e:
        raise schema_error("checkpoint", e) from None
    if schema.version != CHECKPOINT_VERSION:
        raise ParseError(f"unsupported checkpoint version {schema.version!r}", path="version")

    dims = schema.dims
    problems = []
    kg_labels = [node.label for node in kg.nodes]
    if dims.num_kg_nodes != len(kg_labels) or schema.kg_labels != kg_labels:
        problems.append(f"model has {dims.num_kg_nodes} KG nodes, knowledge graph has {len(kg_labels)}")
    expected_classes = list(class_labels(kg))
    if dims.num_classes != len(expected_classes) or schema.classes != expected_classes:
        problems.append(f"model classes {schema.classes[:3]}... do not match knowledge graph compounds")
    if dims.num_edge_types != len(EDGE_TYPES):
        problems.append(f"model has {dims.num_edge_types} edge types, expected {len(EDGE_TYPES)}")
    if embedding_dim is not None and dims.embedding_dim != embedding_dim:
        problems.append(f"model embedding_dim {dims.embedding_dim} != {embedding_dim}")
    if problems:
        raise CheckpointMismatchError("checkpoint/KG mismatch: " + "; ".join(problems))

    template = SearchModel.initialize(
        kg,
        embedding_dim=dims.embedding_dim,
        hidden_dim=dims.hidden_dim,
        image_dim=dims.image_dim,
        edge_embedding_dim=dims.edge_embedding_dim,
    )
    params = []
    for name, expected in template.named_parameters().items():
        stored = schema.parameters.get(name)
        if stored is None:
            raise CheckpointMismatchError(f"checkpoint/KG mismatch: parameter {name!r} missing")
        if (stored.rows, stored.cols) != expected.shape:
            raise CheckpointMismatchError(
                f"checkpoint/KG mismatch: {name} is {stored.rows}×{stored.cols}, expected {expected.rows}×{expected.cols}"
            )
        try:
            params.append(Matrix.from_row_major(stored.rows, stored.cols, stored.data))
        except ShapeError as e:
            raise ParseError(f"checkpoint parameter {name}: {e}", path=f"parameters.{name}") from None

    extra = set(schema.parameters) - set(template.named_parameters())
    if extra:
        logger.warning("checkpoint carries unused parameters: %s", sorted(extra))
    return template.with_parameters(params), dict(schema.config)
