"""
Builders shared by the test modules.
"""

import json
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core.merge import merge
from app.core.search.model import SearchModel
from app.graphs.types import KnowledgeGraph, MergedGraph, SceneGraph
from app.ingest.detections import DetectionRecord, ImageContext
from app.ingest.scene_builder import SceneConfig, build_scene_graph
from app.knowledge.store import load_kg

FIXTURES = Path(__file__).parent / "fixtures"

SMALL_SCENE = SceneConfig(embedding_dim=8, image_dim=4)

Detection = Tuple[str, Tuple[float, float, float, float]]


def mini_kg() -> KnowledgeGraph:
    return load_kg((FIXTURES / "mini_kg.json").read_bytes())


def tiny_kg() -> KnowledgeGraph:
    """stove, sink and a kitchen compound: 3 KG nodes."""
    return load_kg(
        json.dumps(
            {
                "version": "kg/1",
                "concepts": ["stove", "sink"],
                "compounds": [{"label": "kitchen", "constituents": ["stove", "sink"]}],
            }
        )
    )


def small_model(kg: KnowledgeGraph, seed: int = 0, hidden_dim: int = 6) -> SearchModel:
    return SearchModel.initialize(
        kg, embedding_dim=8, hidden_dim=hidden_dim, image_dim=4, edge_embedding_dim=3, seed=seed
    )


def context(embedding: Optional[Sequence[float]] = None, width: float = 640, height: float = 480) -> ImageContext:
    return ImageContext(width, height, None if embedding is None else np.asarray(embedding, dtype=np.float64))


def scene_from(
    detections: Sequence[Detection],
    cfg: SceneConfig = SMALL_SCENE,
    ctx: Optional[ImageContext] = None,
) -> SceneGraph:
    records = [DetectionRecord(label, bbox, 0.9) for label, bbox in detections]
    return build_scene_graph(ctx or context(), records, cfg)


def merged_from(detections: Sequence[Detection], kg: KnowledgeGraph) -> MergedGraph:
    return merge(scene_from(detections), kg)


STOVE_SINK: List[Detection] = [
    ("stove", (10, 10, 50, 50)),
    ("sink", (60, 10, 100, 50)),
]

ROW_OF_THREE: List[Detection] = [
    ("stove", (10, 10, 50, 50)),
    ("sink", (60, 10, 100, 50)),
    ("fridge", (110, 10, 150, 50)),
]

# Two cliques far apart: kitchen objects on the left, harbor objects on the right.
TWO_COMPONENTS: List[Detection] = [
    ("stove", (20, 40, 60, 80)),
    ("sink", (20, 200, 60, 240)),
    ("fridge", (20, 360, 60, 400)),
    ("boat", (560, 40, 600, 80)),
    ("water", (560, 200, 600, 240)),
    ("dock", (560, 360, 600, 400)),
]

MINI_LABELS = ["stove", "sink", "fridge", "boat", "water", "dock", "unicorn"]


def random_detections(rng: np.random.Generator, count: int, labels: Sequence[str] = MINI_LABELS) -> List[Detection]:
    detections = []
    for _ in range(count):
        w, h = rng.uniform(10, 200), rng.uniform(10, 200)
        x0, y0 = rng.uniform(0, 640 - w), rng.uniform(0, 480 - h)
        detections.append((str(labels[int(rng.integers(len(labels)))]), (x0, y0, x0 + w, y0 + h)))
    return detections
