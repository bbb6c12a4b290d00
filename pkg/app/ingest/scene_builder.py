"""
Scene graph construction from validated detections.
"""

import hashlib
import logging
from typing import List, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.config import settings
from app.errors import ContractViolation, DetectionValidationError, EmptySceneError
from app.graphs.types import SceneGraph, SgEdge, SgNode
from app.ingest.detections import DetectionRecord, ImageContext
from app.ingest.spatial import EdgeClassifier, predict_relations

logger = logging.getLogger(__name__)


class SceneConfig(BaseModel):
    """Scene graph construction settings."""

    model_config = ConfigDict(frozen=True)

    embedding_dim: int = Field(default=32, ge=1)
    image_dim: int = Field(default=32, ge=1)
    min_confidence: float = Field(default=0.0, ge=0.0, le=1.0)
    near_radius_ratio: float = Field(default=0.5, gt=0.0)
    edge_mode: Literal["geometric", "learned"] = "geometric"


def get_default_scene_config() -> SceneConfig:
    return SceneConfig(
        embedding_dim=settings.embedding_dim,
        image_dim=settings.image_dim,
        min_confidence=settings.min_confidence,
        near_radius_ratio=settings.near_radius_ratio,
        edge_mode=settings.edge_mode,
    )


def label_embedding(label: str, dim: int) -> np.ndarray:
    """
    Deterministic pseudo-random unit vector for a label.

    Seeded by the SHA-256 of the label, so it is stable across runs and
    machines. Used whenever a detection carries no visual embedding.
    """
    seed = int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "little")
    vector = np.random.default_rng(seed).standard_normal(dim)
    return vector / np.linalg.norm(vector)


def build_scene_graph(
    context: ImageContext,
    detections: Sequence[DetectionRecord],
    cfg: Optional[SceneConfig] = None,
    edge_classifier: Optional[EdgeClassifier] = None,
) -> SceneGraph:
    """
    Build the scene graph S.

    Args:
        context: Image size and optional image embedding
        detections: Parsed records
        cfg: SceneConfig (defaults from settings)
        edge_classifier: Required when cfg.edge_mode == "learned"

    Returns:
        SceneGraph with one node per kept detection and converse-closed edges

    Raises:
        EmptySceneError: Nothing survives the confidence filter
        DetectionValidationError: Embedding dimensions disagree with cfg
    """
    cfg = cfg or get_default_scene_config()
    if cfg.edge_mode == "learned" and edge_classifier is None:
        raise ContractViolation("learned edge mode needs an EdgeClassifier")

    if context.embedding is not None and context.embedding.size != cfg.image_dim:
        raise DetectionValidationError(
            f"image embedding has {context.embedding.size} values, expected {cfg.image_dim}"
        )

    kept = [d for d in detections if d.confidence >= cfg.min_confidence]
    if not kept:
        raise EmptySceneError(
            f"empty scene: no detection reaches min-confidence {cfg.min_confidence}"
        )

    bad = [i for i, d in enumerate(kept) if d.embedding is not None and d.embedding.size != cfg.embedding_dim]
    if bad:
        raise DetectionValidationError(
            f"detection embeddings must have {cfg.embedding_dim} values (records {bad})", bad
        )

    nodes: List[SgNode] = []
    for i, det in enumerate(kept):
        embedding = det.embedding if det.embedding is not None else label_embedding(det.label, cfg.embedding_dim)
        nodes.append(SgNode(i, det.label, det.bbox, det.confidence, embedding))

    classifier = edge_classifier if cfg.edge_mode == "learned" else None
    edges: List[SgEdge] = []
    for i, j, rel in predict_relations(
        [n.bbox for n in nodes], context.diagonal, context.area, cfg.near_radius_ratio, classifier
    ):
        edges.append(SgEdge(i, j, rel))
        edges.append(SgEdge(j, i, rel.converse))

    logger.debug("scene graph: %d nodes, %d edges (%d detections dropped)", len(nodes), len(edges), len(detections) - len(kept))
    return SceneGraph(tuple(nodes), tuple(edges))
