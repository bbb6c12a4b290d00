"""
Spatial relation extraction between bounding boxes.

The default extractor is a deterministic geometric predicate. A learned
alternative (EdgeClassifier) scores the same 8 geometric features with a
small feed-forward net.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from app.graphs.types import BBox, SpatialRelation
from app.tensor import Activation, FeedForwardNet, ff_forward

DEFAULT_NEAR_RATIO = 0.5

# Learned classifier output slots: the 8 relations then "no edge".
RELATION_SLOTS: List[Optional[SpatialRelation]] = list(SpatialRelation) + [None]


def _center(box: BBox):
    x0, y0, x1, y1 = box
    return 0.5 * (x0 + x1), 0.5 * (y0 + y1)


def _area(box: BBox) -> float:
    x0, y0, x1, y1 = box
    return (x1 - x0) * (y1 - y0)


def intersection_area(a: BBox, b: BBox) -> float:
    w = min(a[2], b[2]) - max(a[0], b[0])
    h = min(a[3], b[3]) - max(a[1], b[1])
    return max(w, 0.0) * max(h, 0.0)


def encloses(outer: BBox, inner: BBox) -> bool:
    return outer[0] < inner[0] and outer[1] < inner[1] and outer[2] > inner[2] and outer[3] > inner[3]


def spatial_relation(
    a: BBox,
    b: BBox,
    diag: float,
    near_ratio: float = DEFAULT_NEAR_RATIO,
) -> Optional[SpatialRelation]:
    """
    Relation of box a to box b.

    Precedence: contains > inside > overlaps > directional > near.
    Directional kinds and near need the center distance to stay below
    near_ratio * diag; otherwise no edge (None) is emitted. Image y grows
    downwards, so "a above b" means a's center has the smaller y.

    Args:
        a, b: (x0, y0, x1, y1) boxes
        diag: Image diagonal in pixels
        near_ratio: Edge radius as a fraction of the diagonal

    Returns:
        SpatialRelation or None
    """
    if encloses(a, b):
        return SpatialRelation.CONTAINS
    if encloses(b, a):
        return SpatialRelation.INSIDE
    if intersection_area(a, b) > 0:
        return SpatialRelation.OVERLAPS

    (ax, ay), (bx, by) = _center(a), _center(b)
    dx, dy = bx - ax, by - ay
    if np.hypot(dx, dy) >= near_ratio * diag:
        return None
    if dx == 0 and dy == 0:
        return SpatialRelation.NEAR
    if abs(dx) >= abs(dy):
        return SpatialRelation.LEFT_OF if dx > 0 else SpatialRelation.RIGHT_OF
    return SpatialRelation.ABOVE if dy > 0 else SpatialRelation.BELOW


def geometric_features(a: BBox, b: BBox, diag: float, image_area: float) -> np.ndarray:
    """[Δcx, Δcy, IoU, area_a, area_b, aspect_a, aspect_b, distance], scale-normalised."""
    (ax, ay), (bx, by) = _center(a), _center(b)
    dx, dy = (bx - ax) / diag, (by - ay) / diag
    inter = intersection_area(a, b)
    union = _area(a) + _area(b) - inter
    return np.array(
        [
            dx,
            dy,
            inter / union if union > 0 else 0.0,
            _area(a) / image_area,
            _area(b) / image_area,
            np.log((a[2] - a[0]) / (a[3] - a[1])),
            np.log((b[2] - b[0]) / (b[3] - b[1])),
            np.hypot(dx, dy),
        ]
    )


NUM_GEOMETRIC_FEATURES = 8


@dataclass(frozen=True)
class EdgeClassifier:
    """Learned edge-type predictor: 8 geometric features -> 9 logits."""

    net: FeedForwardNet

    @classmethod
    def initialize(cls, rng: np.random.Generator, hidden: int = 16) -> "EdgeClassifier":
        net = FeedForwardNet.initialize(
            [NUM_GEOMETRIC_FEATURES, hidden, len(RELATION_SLOTS)],
            [Activation.RELU, Activation.IDENTITY],
            rng,
        )
        return cls(net)

    def logits(self, a: BBox, b: BBox, diag: float, image_area: float) -> np.ndarray:
        return ff_forward(self.net, geometric_features(a, b, diag, image_area))

    def predict(self, a: BBox, b: BBox, diag: float, image_area: float) -> Optional[SpatialRelation]:
        return RELATION_SLOTS[int(np.argmax(self.logits(a, b, diag, image_area)))]


def relation_slot(relation: Optional[SpatialRelation]) -> int:
    return RELATION_SLOTS.index(relation)


def predict_relations(
    boxes: Sequence[BBox],
    diag: float,
    image_area: float,
    near_ratio: float = DEFAULT_NEAR_RATIO,
    classifier: Optional[EdgeClassifier] = None,
):
    """
    Yield (i, j, relation) for every unordered pair i < j that gets an edge.

    The caller adds the converse edge (j, i, relation.converse).
    """
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            if classifier is None:
                rel = spatial_relation(boxes[i], boxes[j], diag, near_ratio)
            else:
                rel = classifier.predict(boxes[i], boxes[j], diag, image_area)
            if rel is not None:
                yield i, j, rel
