"""
Labeled scenes and dataset manifests.

A manifest is JSON lines, one `{"detections": path, "label": str}` per
scene; relative paths resolve against the manifest's directory.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import FrozenSet, List, Optional, Sequence

from pydantic import ValidationError

from app.api.schemas import ManifestEntry
from app.errors import DatasetError, InputError, ParseError
from app.graphs.types import BACKGROUND, KnowledgeGraph, SceneGraph, canonical_label
from app.ingest.detections import ImageContext, load_json, parse_detection_file, schema_error
from app.ingest.scene_builder import SceneConfig, build_scene_graph
from app.ingest.spatial import EdgeClassifier

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TrainExample:
    """
    One labeled scene.

    Attributes:
        context: Image size and embedding
        scene: Scene graph built from the detections
        label: Ground-truth compound label or "background"
        source: Detection file path, when loaded from disk
        important_labels: Optional concept labels whose nodes are important;
            overrides path-derived importance targets
    """

    context: ImageContext
    scene: SceneGraph
    label: str
    source: Optional[str] = None
    important_labels: Optional[FrozenSet[str]] = None


def check_label(kg: KnowledgeGraph, label: str) -> str:
    """Canonical label, which must be a KG compound or background."""
    try:
        canonical = canonical_label(label)
    except ValueError as e:
        raise DatasetError(str(e)) from None
    if canonical == BACKGROUND:
        return canonical
    if canonical not in {node.label for node in kg.compounds}:
        raise DatasetError(f"label {label!r} is neither a knowledge graph compound nor {BACKGROUND!r}")
    return canonical


def example_from_detections(
    data: bytes,
    label: str,
    kg: KnowledgeGraph,
    scene_cfg: SceneConfig,
    source: Optional[str] = None,
    edge_classifier: Optional[EdgeClassifier] = None,
) -> TrainExample:
    context, records = parse_detection_file(data, known_labels=[n.label for n in kg.nodes])
    scene = build_scene_graph(context, records, scene_cfg, edge_classifier)
    return TrainExample(context, scene, check_label(kg, label), source)


def load_manifest(
    path: Path,
    kg: KnowledgeGraph,
    scene_cfg: SceneConfig,
    edge_classifier: Optional[EdgeClassifier] = None,
) -> List[TrainExample]:
    """
    Load every scene a manifest lists.

    Raises:
        DatasetError: Missing manifest or detection file, bad entry, unknown
            label, or no entries at all
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"manifest not found: {path}")

    examples: List[TrainExample] = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            entry = ManifestEntry.model_validate(load_json(line, f"manifest line {line_no}"))
        except ValidationError as e:
            raise DatasetError(f"{path}:{line_no}: {schema_error('manifest entry', e)}") from None
        except ParseError as e:
            raise DatasetError(f"{path}:{line_no}: {e}") from None

        detections = Path(entry.detections)
        if not detections.is_absolute():
            detections = path.parent / detections
        if not detections.is_file():
            raise DatasetError(f"{path}:{line_no}: detection file not found: {detections}")
        try:
            examples.append(
                example_from_detections(
                    detections.read_bytes(), entry.label, kg, scene_cfg, str(detections), edge_classifier
                )
            )
        except DatasetError as e:
            raise DatasetError(f"{path}:{line_no}: {e}") from None
        except InputError as e:
            raise DatasetError(f"{path}:{line_no}: {detections.name}: {e}") from None

    if not examples:
        raise DatasetError(f"manifest {path} lists no scenes")
    logger.info("loaded %d scenes from %s", len(examples), path)
    return examples


def class_counts(examples: Sequence[TrainExample]) -> dict:
    counts: dict = {}
    for example in examples:
        counts[example.label] = counts.get(example.label, 0) + 1
    return counts
