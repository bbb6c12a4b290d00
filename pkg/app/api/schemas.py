"""
File formats exchanged with the outside world.

Detection files, knowledge graph files, checkpoints, dataset manifests,
traces and metrics reports are all validated through these models.
"""

from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field


class _Strict(BaseModel):
    model_config = ConfigDict(allow_inf_nan=False, extra="forbid")


# Detection file -----------------------------------------------------------

class ImageSchema(_Strict):
    width: int
    height: int
    embedding: Optional[List[float]] = None


class DetectionSchema(_Strict):
    label: str
    bbox: Tuple[float, float, float, float]
    confidence: float
    embedding: Optional[List[float]] = None


class DetectionFileSchema(_Strict):
    image: ImageSchema
    detections: List[DetectionSchema] = []


# Knowledge graph file -----------------------------------------------------

class CompoundSchema(_Strict):
    label: str
    constituents: List[str]
    weights: Optional[List[float]] = None


class ExtraEdgeSchema(_Strict):
    src: str
    dst: str
    relation: str


class KgFileSchema(_Strict):
    version: str
    concepts: List[str]
    compounds: List[CompoundSchema] = []
    extra_edges: List[ExtraEdgeSchema] = []


# Checkpoint ---------------------------------------------------------------

class MatrixSchema(_Strict):
    rows: int = Field(ge=0)
    cols: int = Field(ge=0)
    data: List[float]


class ModelDims(_Strict):
    embedding_dim: int
    hidden_dim: int
    image_dim: int
    edge_embedding_dim: int
    num_kg_nodes: int
    num_classes: int
    num_edge_types: int


class CheckpointSchema(_Strict):
    version: str
    dims: ModelDims
    classes: List[str]
    kg_labels: List[str]
    parameters: Dict[str, MatrixSchema]
    config: Dict[str, Any] = {}


# Dataset manifest -----------------------------------------------------------

class ManifestEntry(BaseModel):
    detections: str
    label: str


# Trace export ---------------------------------------------------------------

class IterationExport(BaseModel):
    added: List[str]
    importance: List[float]


class RoundExport(BaseModel):
    round: int
    seed: str
    initial_active: List[str]
    final_active: List[str]
    iterations: List[IterationExport]
    halt_reason: str


# Reports --------------------------------------------------------------------

class InferenceResponse(BaseModel):
    prediction: str
    scores: Dict[str, Optional[float]]
    active_concepts: List[str]
    trace: Optional[List[RoundExport]] = None


class MetricsReport(BaseModel):
    accuracy: float
    total: int
    classes: List[str]
    confusion: List[List[int]]
    per_class_counts: Dict[str, int]
    per_round_iteration_histogram: Dict[str, int]
    mean_iterations_per_round: float
    source: str
