"""
End-to-end training of the search model.

Loss per scene:
    CE(aggregated round logits, truth) + α · mean BCE(frontier importance, targets)

Importance targets come from short paths in the merged graph between detected
concepts and the truth compound. While teacher forcing is on, expansion follows
those targets instead of the importance threshold, so the decisions that shape
the graph are never differentiated through.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.config import settings
from app.core.merge import merge
from app.core.orchestrator import SearchPass, search_pass
from app.core.search.model import SearchModel
from app.core.search.types import SearchConfig, get_default_search_config
from app.errors import DatasetError, NumericError, TrainingDivergedError
from app.graphs.types import BACKGROUND, KnowledgeGraph, MergedGraph, canonical_label
from app.tensor import Adam, GradTape, Matrix, ops
from app.training.dataset import TrainExample

logger = logging.getLogger(__name__)


class TrainConfig(BaseModel):
    """
    Training settings.

    Attributes:
        epochs: Passes over the dataset
        lr: Adam learning rate (0 leaves parameters unchanged)
        seed: Shuffle and round-seeding seed
        importance_loss_weight: α, weight of the importance BCE term
        importance_k_hops: Path length bound for importance targets
        teacher_forcing: Follow importance targets for the first half of training
        search: Search settings used during training
    """

    model_config = ConfigDict(frozen=True)

    epochs: int = Field(default=30, ge=1)
    lr: float = Field(default=1e-3, ge=0.0)
    seed: int = 0
    importance_loss_weight: float = Field(default=1.0, ge=0.0)
    importance_k_hops: int = Field(default=2, ge=0)
    teacher_forcing: bool = True
    search: SearchConfig = Field(default_factory=SearchConfig)


def get_default_train_config() -> TrainConfig:
    return TrainConfig(
        epochs=settings.train_epochs,
        lr=settings.train_lr,
        seed=settings.train_seed,
        importance_loss_weight=settings.importance_loss_weight,
        importance_k_hops=settings.importance_k_hops,
        teacher_forcing=settings.teacher_forcing,
        search=get_default_search_config(),
    )


def importance_targets(
    merged: MergedGraph,
    truth: str,
    k_hops: int = 2,
    important_labels: Optional[Sequence[str]] = None,
) -> np.ndarray:
    """
    Binary importance target per merged-graph node.

    A node is important iff it lies on a path of at most k_hops edges between
    some SG node and the truth compound's KG node. Background scenes have no
    important nodes. An explicit important_labels set overrides the path rule.

    Returns:
        int8 array of length merged.num_nodes
    """
    targets = np.zeros(merged.num_nodes, dtype=np.int8)
    if important_labels is not None:
        wanted = {canonical_label(label) for label in important_labels}
        for node_id in range(merged.num_nodes):
            targets[node_id] = merged.label_of(node_id) in wanted
        return targets
    if truth == BACKGROUND:
        return targets
    if truth not in merged.kg.label_index:
        raise DatasetError(f"truth label {truth!r} is not in the knowledge graph")

    goal = merged.kg_global(merged.kg.label_index[truth])
    graph = merged.graph
    to_goal = nx.single_source_shortest_path_length(graph, goal, cutoff=k_hops)
    for sg_node in range(merged.num_sg):
        if sg_node not in to_goal:
            continue
        from_sg = nx.single_source_shortest_path_length(graph, sg_node, cutoff=k_hops)
        for node_id, d in from_sg.items():
            if node_id in to_goal and d + to_goal[node_id] <= k_hops:
                targets[node_id] = 1
    return targets


@dataclass(frozen=True)
class StepLoss:
    total: float
    classification: float
    importance: float


@dataclass
class TrainingHistory:
    epoch_losses: List[float] = field(default_factory=list)
    epoch_classification: List[float] = field(default_factory=list)
    epoch_importance: List[float] = field(default_factory=list)


def class_index(model: SearchModel, label: str) -> int:
    try:
        return model.classes.index(label)
    except ValueError:
        raise DatasetError(f"label {label!r} is not a model class") from None


def scene_loss(
    model: SearchModel,
    merged: MergedGraph,
    example: TrainExample,
    cfg: TrainConfig,
    targets: Optional[np.ndarray],
    teacher_forcing: bool,
    rng_seed: int = 0,
) -> Tuple[Matrix, Matrix, Optional[Matrix], SearchPass]:
    """
    Forward pass and loss for one scene (records on the active tape, if any).

    Args:
        targets: Importance targets; required when teacher forcing or α > 0

    Returns:
        (total loss, classification loss, importance loss or None, search pass)
    """
    outcome = search_pass(
        merged,
        example.context,
        model,
        cfg.search,
        rng_seed,
        forced_targets=targets if teacher_forcing else None,
    )
    target = class_index(model, example.label)
    allowed = outcome.allowed.copy()
    allowed[target] = True
    classification = ops.cross_entropy(outcome.aggregate(cfg.search.round_aggregation), target, allowed)

    importance = None
    total = classification
    if cfg.importance_loss_weight > 0 and outcome.frontier_logits:
        ids = [n for group in outcome.frontier_ids for n in group]
        importance = ops.binary_cross_entropy_with_logits(
            ops.concat_rows(outcome.frontier_logits), targets[ids].astype(np.float64)
        )
        total = ops.add(classification, ops.scale(importance, cfg.importance_loss_weight))
    return total, classification, importance, outcome


class Trainer:
    """
    Owns the model, the optimizer state and per-scene caches.

    Merged graphs and importance targets are computed once per example and
    reused across epochs. target_reads counts importance-target computations.

    Usage:
        trainer = Trainer(kg, model, cfg)
        history = trainer.train(examples)
        model = trainer.model
    """

    def __init__(self, kg: KnowledgeGraph, model: SearchModel, cfg: Optional[TrainConfig] = None):
        self.kg = kg
        self.model = model
        self.cfg = cfg or get_default_train_config()
        self.optimizer = Adam(lr=self.cfg.lr)
        self.steps = 0
        self.target_reads = 0
        self._merged: Dict[TrainExample, MergedGraph] = {}
        self._targets: Dict[TrainExample, np.ndarray] = {}

    def merged_for(self, example: TrainExample) -> MergedGraph:
        if example not in self._merged:
            self._merged[example] = merge(example.scene, self.kg)
        return self._merged[example]

    def targets_for(self, example: TrainExample) -> np.ndarray:
        if example not in self._targets:
            self.target_reads += 1
            self._targets[example] = importance_targets(
                self.merged_for(example),
                example.label,
                self.cfg.importance_k_hops,
                example.important_labels,
            )
        return self._targets[example]

    def train_step(self, example: TrainExample, teacher_forcing: Optional[bool] = None) -> StepLoss:
        """
        One forward/backward pass and one Adam update on a single scene.

        Raises:
            TrainingDivergedError: Loss or an intermediate value became non-finite
        """
        cfg = self.cfg
        forcing = cfg.teacher_forcing if teacher_forcing is None else teacher_forcing
        merged = self.merged_for(example)
        needs_targets = forcing or cfg.importance_loss_weight > 0
        targets = self.targets_for(example) if needs_targets else None
        params = self.model.parameters()

        try:
            with GradTape() as tape:
                total, classification, importance, _ = scene_loss(
                    self.model, merged, example, cfg, targets, forcing, rng_seed=cfg.seed + self.steps
                )
            grads = tape.gradient(total, params)
        except NumericError as e:
            raise TrainingDivergedError(
                f"training diverged at step {self.steps}: {e}",
                {"step": self.steps, "source": example.source, "label": example.label},
            ) from None

        if not all(np.isfinite(g).all() for g in grads):
            raise TrainingDivergedError(
                f"non-finite gradient at step {self.steps}",
                {"step": self.steps, "source": example.source, "loss": total.item()},
            )

        self.model = self.model.with_parameters(self.optimizer.step(params, grads))
        self.steps += 1
        return StepLoss(
            total=total.item(),
            classification=classification.item(),
            importance=importance.item() if importance is not None else 0.0,
        )

    def train(self, examples: Sequence[TrainExample]) -> TrainingHistory:
        """
        Run cfg.epochs epochs with a seeded shuffle per epoch.

        Teacher forcing (when enabled) covers the first ceil(epochs / 2) epochs.
        """
        if not examples:
            raise DatasetError("cannot train on an empty dataset")
        cfg = self.cfg
        rng = np.random.default_rng(cfg.seed)
        forced_epochs = math.ceil(cfg.epochs / 2) if cfg.teacher_forcing else 0
        history = TrainingHistory()

        for epoch in range(cfg.epochs):
            forcing = epoch < forced_epochs
            losses = [self.train_step(examples[i], forcing) for i in rng.permutation(len(examples))]
            history.epoch_losses.append(float(np.mean([l.total for l in losses])))
            history.epoch_classification.append(float(np.mean([l.classification for l in losses])))
            history.epoch_importance.append(float(np.mean([l.importance for l in losses])))
            logger.info(
                "epoch %d/%d: loss %.4f (ce %.4f, importance %.4f)%s",
                epoch + 1,
                cfg.epochs,
                history.epoch_losses[-1],
                history.epoch_classification[-1],
                history.epoch_importance[-1],
                " [teacher forcing]" if forcing else "",
            )
        return history


def train(
    examples: Sequence[TrainExample],
    kg: KnowledgeGraph,
    model: SearchModel,
    cfg: Optional[TrainConfig] = None,
) -> Tuple[SearchModel, TrainingHistory]:
    """Train a model on a dataset; returns the trained model and the loss history."""
    trainer = Trainer(kg, model, cfg)
    history = trainer.train(examples)
    return trainer.model, history
