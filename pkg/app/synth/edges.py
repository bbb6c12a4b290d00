"""
Training the learned edge classifier on synthetic box pairs.

Pairs are labelled by the geometric predicate, so the classifier learns to
imitate it from the 8 scale-normalised features.
"""

import logging
from typing import List, Tuple

import numpy as np

from app.ingest.spatial import (
    DEFAULT_NEAR_RATIO,
    NUM_GEOMETRIC_FEATURES,
    EdgeClassifier,
    geometric_features,
    relation_slot,
    spatial_relation,
)
from app.synth.generator import CANVAS_HEIGHT, CANVAS_WIDTH
from app.tensor import Adam, GradTape, Matrix, ff_logits, ops

logger = logging.getLogger(__name__)


def _random_box(rng: np.random.Generator) -> Tuple[float, float, float, float]:
    w = rng.uniform(10.0, 300.0)
    h = rng.uniform(10.0, 250.0)
    x0 = rng.uniform(0.0, CANVAS_WIDTH - w)
    y0 = rng.uniform(0.0, CANVAS_HEIGHT - h)
    return (x0, y0, x0 + w, y0 + h)


def edge_training_pairs(
    count: int,
    seed: int = 0,
    near_ratio: float = DEFAULT_NEAR_RATIO,
) -> Tuple[np.ndarray, List[int]]:
    """
    Random box pairs on the synthetic canvas.

    Returns:
        (count × 8 feature matrix, relation slot per pair)
    """
    rng = np.random.default_rng(seed)
    diag = float(np.hypot(CANVAS_WIDTH, CANVAS_HEIGHT))
    area = float(CANVAS_WIDTH * CANVAS_HEIGHT)
    features = np.zeros((count, NUM_GEOMETRIC_FEATURES))
    slots = []
    for k in range(count):
        a, b = _random_box(rng), _random_box(rng)
        features[k] = geometric_features(a, b, diag, area)
        slots.append(relation_slot(spatial_relation(a, b, diag, near_ratio)))
    return features, slots


def train_edge_classifier(
    pairs: int = 2000,
    epochs: int = 60,
    lr: float = 1e-2,
    seed: int = 0,
    near_ratio: float = DEFAULT_NEAR_RATIO,
    batch_size: int = 100,
) -> Tuple[EdgeClassifier, float]:
    """
    Fit an EdgeClassifier with Adam on mini-batches of generated pairs.

    Returns:
        (classifier, accuracy on a held-out set of the same size)
    """
    features, slots = edge_training_pairs(pairs, seed, near_ratio)
    rng = np.random.default_rng(seed + 1)
    classifier = EdgeClassifier.initialize(rng)
    optimizer = Adam(lr=lr)

    for epoch in range(epochs):
        order = rng.permutation(pairs)
        total = 0.0
        for start in range(0, pairs, batch_size):
            batch = order[start:start + batch_size]
            params = classifier.net.parameters()
            with GradTape() as tape:
                logits = ff_logits(classifier.net, Matrix(features[batch]))
                losses = [ops.cross_entropy(ops.gather_rows(logits, [i]), slots[k]) for i, k in enumerate(batch)]
                loss = ops.scale(ops.add_all(losses), 1.0 / len(batch))
            grads = tape.gradient(loss, params)
            classifier = EdgeClassifier(classifier.net.with_parameters(optimizer.step(params, grads)))
            total += loss.item() * len(batch)
        if (epoch + 1) % 20 == 0:
            logger.info("edge classifier epoch %d/%d: loss %.4f", epoch + 1, epochs, total / pairs)

    held_out, truth = edge_training_pairs(pairs, seed + 2, near_ratio)
    predicted = np.argmax(ff_logits(classifier.net, Matrix(held_out)).data, axis=1)
    accuracy = float(np.mean(predicted == np.asarray(truth)))
    logger.info("edge classifier held-out accuracy %.4f", accuracy)
    return classifier, accuracy
