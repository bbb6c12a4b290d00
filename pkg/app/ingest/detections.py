"""
Detection file parsing.

A detection file is the hand-off point from an external detector: image
size, an optional global image embedding, and one record per detected
object. See app/api/schemas.py for the JSON layout.
"""

import json
import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from app.api.schemas import DetectionFileSchema
from app.errors import DetectionValidationError, ParseError
from app.graphs.types import BBox, ConceptLabel, canonical_label

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DetectionRecord:
    label: ConceptLabel
    bbox: BBox
    confidence: float
    embedding: Optional[np.ndarray] = None
    known: Optional[bool] = None  # None when no vocabulary was supplied


@dataclass(frozen=True, eq=False)
class ImageContext:
    width: float
    height: float
    embedding: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise DetectionValidationError(f"image size {self.width}×{self.height} must be positive")

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.width, self.height))

    @property
    def area(self) -> float:
        return float(self.width * self.height)


def load_json(data: Union[bytes, str], what: str) -> object:
    """
    Decode UTF-8 JSON, reporting syntax errors by byte offset.

    Raises:
        ParseError: Invalid UTF-8 or JSON
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(f"{what}: invalid UTF-8 at byte {e.start}", offset=e.start) from None
    else:
        text = data
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        offset = len(text[: e.pos].encode("utf-8"))
        raise ParseError(f"{what}: malformed JSON at byte {offset}: {e.msg}", offset=offset) from None


def schema_error(what: str, error: ValidationError) -> ParseError:
    first = error.errors()[0]
    path = ".".join(str(part) for part in first["loc"])
    return ParseError(f"{what}: {path}: {first['msg']}", path=path)


def parse_detection_file(
    data: Union[bytes, str],
    known_labels: Optional[Iterable[str]] = None,
) -> Tuple[ImageContext, List[DetectionRecord]]:
    """
    Parse and validate a detection file.

    Args:
        data: File contents
        known_labels: Optional vocabulary; records outside it are flagged
            (known=False) and kept

    Returns:
        (image context, detection records in file order)

    Raises:
        ParseError: Malformed JSON or schema (offset / field path attached)
        DetectionValidationError: Bad boxes, confidences, labels or sizes
    """
    raw = load_json(data, "detection file")
    try:
        parsed = DetectionFileSchema.model_validate(raw)
    except ValidationError as e:
        raise schema_error("detection file", e) from None

    problems: List[str] = []
    bad_indices: List[int] = []
    for i, det in enumerate(parsed.detections):
        reasons = []
        x0, y0, x1, y1 = det.bbox
        if not (x0 < x1 and y0 < y1):
            reasons.append(f"bbox {list(det.bbox)} is not well-ordered")
        if not 0.0 <= det.confidence <= 1.0:
            reasons.append(f"confidence {det.confidence} outside [0, 1]")
        if not det.label.strip():
            reasons.append("empty label")
        if reasons:
            bad_indices.append(i)
            problems.append(f"record {i}: " + "; ".join(reasons))
    if problems:
        raise DetectionValidationError("invalid detections: " + " | ".join(problems), bad_indices)

    vocabulary = {canonical_label(label) for label in known_labels} if known_labels is not None else None
    records = []
    for det in parsed.detections:
        label = canonical_label(det.label)
        records.append(
            DetectionRecord(
                label=label,
                bbox=tuple(float(v) for v in det.bbox),
                confidence=float(det.confidence),
                embedding=None if det.embedding is None else np.asarray(det.embedding, dtype=np.float64),
                known=None if vocabulary is None else label in vocabulary,
            )
        )

    unknown = sorted({r.label for r in records if r.known is False})
    if unknown:
        logger.warning("detections with labels outside the knowledge graph: %s", ", ".join(unknown))

    image = parsed.image
    context = ImageContext(
        width=float(image.width),
        height=float(image.height),
        embedding=None if image.embedding is None else np.asarray(image.embedding, dtype=np.float64),
    )
    return context, records
