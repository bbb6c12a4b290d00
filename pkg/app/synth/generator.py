"""
Synthetic scene generator.

Scenes are drawn on a 640×480 canvas. A compound scene keeps at least 60% of
the compound's constituents, laid out in a compact grid of non-overlapping
boxes (2 to 4 columns) so every constituent pair sits inside the near radius.
Composites put each compound in a two-column grid inside its own strip. Background
scenes draw primitives until the oracle finds no compound.

Every output is a regular detection file, so it goes through the same
parsing and validation as real detector output.
"""

import json
import logging
import math
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.api.schemas import DetectionFileSchema, DetectionSchema, ImageSchema
from app.errors import DatasetError
from app.graphs.types import BACKGROUND, BBox, KnowledgeGraph
from app.ingest.scene_builder import label_embedding
from app.synth.oracle import oracle_label

logger = logging.getLogger(__name__)

CANVAS_WIDTH = 640
CANVAS_HEIGHT = 480

# Grid layout for single-compound scenes.
CELL_WIDTH = 75.0
CELL_HEIGHT = 80.0
MIN_GRID_COLUMNS = 2
MAX_GRID_COLUMNS = 4
MAX_GRID_ROWS = int(CANVAS_HEIGHT // CELL_HEIGHT)

# Strips for two-compound composites; their centers stay further apart than
# the near radius (0.5 × 800 px diagonal).
LEFT_STRIP = (20.0, 100.0)
RIGHT_STRIP = (540.0, 620.0)
STRIP_Y = (40.0, 420.0)
STRIP_COLUMN_JITTER = 10.0

MIN_KEEP_FRACTION = 0.6
MAX_DRAWS = 64

SeedLike = Union[int, Sequence[int]]


class NoiseConfig(BaseModel):
    """
    Attributes:
        distractors: Random non-constituent labels added to each scene
        sigma: Gaussian jitter on embeddings
    """

    model_config = ConfigDict(frozen=True)

    distractors: int = Field(default=0, ge=0)
    sigma: float = Field(default=0.0, ge=0.0)


def _constituents(kg: KnowledgeGraph, compound: str) -> List[str]:
    if compound not in {n.label for n in kg.compounds}:
        raise DatasetError(f"{compound!r} is not a compound of the knowledge graph")
    parts = kg.constituent_labels(compound)
    if len(parts) < 2:
        raise DatasetError(f"compound {compound!r} has fewer than 2 constituents")
    return list(parts)


def _grid_boxes(rng: np.random.Generator, count: int) -> List[BBox]:
    """count boxes, one per grid cell, in a block placed at random on the canvas."""
    fewest = min(max(MIN_GRID_COLUMNS, math.ceil(count / MAX_GRID_ROWS)), MAX_GRID_COLUMNS)
    columns = int(rng.integers(fewest, MAX_GRID_COLUMNS + 1))
    rows = math.ceil(count / columns)
    block_w = columns * CELL_WIDTH
    block_h = rows * CELL_HEIGHT
    left = rng.uniform(0.0, CANVAS_WIDTH - block_w)
    top = rng.uniform(0.0, max(CANVAS_HEIGHT - block_h, 0.0))
    boxes = []
    for k in range(count):
        row, col = divmod(k, columns)
        w = rng.uniform(30.0, CELL_WIDTH - 10.0)
        h = rng.uniform(30.0, CELL_HEIGHT - 10.0)
        x0 = left + col * CELL_WIDTH + rng.uniform(2.0, CELL_WIDTH - w - 2.0)
        y0 = top + row * CELL_HEIGHT + rng.uniform(2.0, CELL_HEIGHT - h - 2.0)
        boxes.append((round(x0, 2), round(y0, 2), round(x0 + w, 2), round(y0 + h, 2)))
    return boxes


def _strip_boxes(rng: np.random.Generator, count: int, x_range: Tuple[float, float]) -> List[BBox]:
    """count boxes in a two-column grid down a vertical strip, centers inside x_range × STRIP_Y."""
    x_lo, x_hi = x_range
    y_lo, y_hi = STRIP_Y
    rows = math.ceil(count / 2)
    step = min(CELL_HEIGHT, (y_hi - y_lo) / max(rows - 1, 1))
    top = rng.uniform(y_lo, y_hi - (rows - 1) * step)
    boxes = []
    for k in range(count):
        row, col = divmod(k, 2)
        jitter = rng.uniform(0.0, STRIP_COLUMN_JITTER)
        cx = x_lo + jitter if col == 0 else x_hi - jitter
        cy = top + row * step
        half_w = rng.uniform(10.0, 20.0)
        half_h = rng.uniform(10.0, min(30.0, 0.4 * step))
        boxes.append((round(cx - half_w, 2), round(cy - half_h, 2), round(cx + half_w, 2), round(cy + half_h, 2)))
    return boxes


def _sample_constituents(rng: np.random.Generator, parts: List[str]) -> List[str]:
    keep = rng.integers(math.ceil(MIN_KEEP_FRACTION * len(parts)), len(parts) + 1)
    chosen = rng.choice(len(parts), size=int(keep), replace=False)
    return [parts[i] for i in sorted(chosen)]


def _detections(
    rng: np.random.Generator,
    labels: List[str],
    boxes: List[BBox],
    noise: NoiseConfig,
    embedding_dim: int,
) -> List[DetectionSchema]:
    detections = []
    for label, box in zip(labels, boxes):
        embedding = label_embedding(label, embedding_dim) + rng.normal(0.0, noise.sigma, embedding_dim)
        detections.append(
            DetectionSchema(
                label=label,
                bbox=box,
                confidence=round(float(rng.uniform(0.7, 1.0)), 4),
                embedding=embedding.tolist(),
            )
        )
    return detections


def _image(rng: np.random.Generator, scene_label: str, noise: NoiseConfig, image_dim: int) -> ImageSchema:
    embedding = label_embedding(f"scene:{scene_label}", image_dim) + rng.normal(0.0, noise.sigma, image_dim)
    return ImageSchema(width=CANVAS_WIDTH, height=CANVAS_HEIGHT, embedding=embedding.tolist())


def _encode(image: ImageSchema, detections: List[DetectionSchema]) -> bytes:
    return DetectionFileSchema(image=image, detections=detections).model_dump_json().encode("utf-8")


def generate_scene(
    kg: KnowledgeGraph,
    compound: str,
    noise: NoiseConfig = NoiseConfig(),
    seed: SeedLike = 0,
    embedding_dim: int = 32,
    image_dim: int = 32,
) -> Tuple[bytes, str]:
    """
    One synthetic detection file.

    Constituent draws that would let another compound tie or win under the
    oracle are redrawn, so the returned label is also the oracle's label.

    Args:
        kg: Knowledge graph
        compound: Compound label or "background"
        noise: Distractor count and embedding jitter
        seed: RNG seed; the same seed gives identical bytes
        embedding_dim: Width of detection embeddings
        image_dim: Width of the image embedding

    Returns:
        (detection file bytes, label)

    Raises:
        DatasetError: Unknown compound or one with fewer than 2 constituents
    """
    rng = np.random.default_rng(seed)
    primitives = sorted(n.label for n in kg.primitives)

    if compound == BACKGROUND:
        labels: List[str] = []
        for _ in range(MAX_DRAWS):
            count = min(int(rng.integers(2, 5)) + noise.distractors, len(primitives))
            labels = [primitives[i] for i in rng.choice(len(primitives), size=count, replace=False)]
            if oracle_label(kg, labels) == BACKGROUND:
                break
        else:
            raise DatasetError("could not draw a background scene for this knowledge graph")
    else:
        parts = _constituents(kg, compound)
        others = [p for p in primitives if p not in set(parts)]
        for _ in range(MAX_DRAWS):
            labels = _sample_constituents(rng, parts)
            if noise.distractors:
                picks = rng.choice(len(others), size=min(noise.distractors, len(others)), replace=False)
                labels += [others[i] for i in sorted(picks)]
            if oracle_label(kg, labels) == compound:
                break
        else:
            raise DatasetError(f"could not draw an unambiguous {compound!r} scene")

    order = rng.permutation(len(labels))
    labels = [labels[i] for i in order]
    boxes = _grid_boxes(rng, len(labels))
    detections = _detections(rng, labels, boxes, noise, embedding_dim)
    return _encode(_image(rng, compound, noise, image_dim), detections), compound


def generate_composite_scene(
    kg: KnowledgeGraph,
    compounds: Sequence[str],
    noise: NoiseConfig = NoiseConfig(),
    seed: SeedLike = 0,
    embedding_dim: int = 32,
    image_dim: int = 32,
) -> Tuple[bytes, Tuple[str, str]]:
    """
    Two compounds side by side: the first in a left strip, the second in a
    right strip, far enough apart that the scene graph splits into two
    components.

    Returns:
        (detection file bytes, (left compound, right compound))
    """
    if len(compounds) != 2:
        raise DatasetError(f"a composite scene needs exactly 2 compounds, got {len(compounds)}")
    left, right = compounds
    rng = np.random.default_rng(seed)
    left_labels = _sample_constituents(rng, _constituents(kg, left))
    right_labels = _sample_constituents(rng, _constituents(kg, right))
    boxes = _strip_boxes(rng, len(left_labels), LEFT_STRIP) + _strip_boxes(rng, len(right_labels), RIGHT_STRIP)
    detections = _detections(rng, left_labels + right_labels, boxes, noise, embedding_dim)
    image = _image(rng, f"{left}+{right}", noise, image_dim)
    return _encode(image, detections), (left, right)


def write_dataset(
    out_dir: Path,
    kg: KnowledgeGraph,
    count: int,
    noise: NoiseConfig = NoiseConfig(),
    seed: int = 0,
    background_fraction: float = 0.1,
    embedding_dim: int = 32,
    image_dim: int = 32,
) -> Path:
    """
    Write count detection files plus manifest.jsonl into out_dir.

    Scene i is generated from seed [seed, i]; its label is background with
    probability background_fraction, else a uniformly drawn compound.

    Returns:
        Path of the manifest
    """
    if count < 1:
        raise DatasetError(f"dataset size must be positive, got {count}")
    if not 0.0 <= background_fraction <= 1.0:
        raise DatasetError(f"background_fraction {background_fraction} outside [0, 1]")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    compounds = sorted(n.label for n in kg.compounds if len(kg.constituent_labels(n.label)) >= 2)
    if not compounds and background_fraction < 1.0:
        raise DatasetError("knowledge graph has no compound with at least 2 constituents")

    lines = []
    for i in range(count):
        rng = np.random.default_rng([seed, i, 0])
        if not compounds or rng.random() < background_fraction:
            label = BACKGROUND
        else:
            label = compounds[int(rng.integers(len(compounds)))]
        data, _ = generate_scene(kg, label, noise, [seed, i], embedding_dim, image_dim)
        name = f"scene_{i:05d}.json"
        (out_dir / name).write_bytes(data)
        lines.append(json.dumps({"detections": name, "label": label}))

    manifest = out_dir / "manifest.jsonl"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info("wrote %d synthetic scenes to %s", count, out_dir)
    return manifest
