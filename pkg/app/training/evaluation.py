"""
Top-1 evaluation and metrics reports.
"""

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from app.api.schemas import MetricsReport
from app.core.merge import merge
from app.core.orchestrator import run_search
from app.core.search.model import SearchModel
from app.core.search.types import SearchConfig, SearchResult, get_default_search_config
from app.errors import DatasetError
from app.graphs.types import KnowledgeGraph
from app.training.dataset import TrainExample

logger = logging.getLogger(__name__)


@dataclass
class EvaluationReport:
    """
    Attributes:
        accuracy: Correct top-1 predictions / total
        classes: Class order of the confusion matrix
        confusion: confusion[true][predicted] counts
        per_class_counts: Examples per true class
        iteration_histogram: Rounds per iteration count
        mean_iterations_per_round: Average iterations over all rounds (0 without search)
        predictions: Predicted label per example, dataset order
    """

    accuracy: float
    total: int
    classes: List[str]
    confusion: np.ndarray
    per_class_counts: Dict[str, int]
    iteration_histogram: Dict[int, int] = field(default_factory=dict)
    mean_iterations_per_round: float = 0.0
    predictions: List[str] = field(default_factory=list)

    def to_metrics(self, source: str) -> MetricsReport:
        return MetricsReport(
            accuracy=self.accuracy,
            total=self.total,
            classes=self.classes,
            confusion=self.confusion.tolist(),
            per_class_counts=self.per_class_counts,
            per_round_iteration_histogram={str(k): v for k, v in sorted(self.iteration_histogram.items())},
            mean_iterations_per_round=self.mean_iterations_per_round,
            source=source,
        )


def evaluate_predictions(
    labels: Sequence[str],
    predictions: Sequence[str],
    classes: Sequence[str],
) -> EvaluationReport:
    """
    Score any predictor's labels against ground truth.

    Raises:
        DatasetError: Empty dataset, length mismatch or a label outside classes
    """
    if not labels:
        raise DatasetError("cannot evaluate an empty dataset")
    if len(labels) != len(predictions):
        raise DatasetError(f"{len(labels)} labels but {len(predictions)} predictions")
    classes = list(classes)
    index = {c: i for i, c in enumerate(classes)}
    unknown = sorted({x for x in list(labels) + list(predictions) if x not in index})
    if unknown:
        raise DatasetError(f"labels outside the class list: {unknown}")

    confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for truth, predicted in zip(labels, predictions):
        confusion[index[truth], index[predicted]] += 1
    correct = int(np.trace(confusion))
    counts = Counter(labels)
    return EvaluationReport(
        accuracy=correct / len(labels),
        total=len(labels),
        classes=classes,
        confusion=confusion,
        per_class_counts={c: counts.get(c, 0) for c in classes},
        predictions=list(predictions),
    )


def evaluate(
    examples: Sequence[TrainExample],
    kg: KnowledgeGraph,
    model: SearchModel,
    cfg: Optional[SearchConfig] = None,
    seed: int = 0,
    workers: int = 1,
) -> EvaluationReport:
    """
    Top-1 accuracy of a search model.

    Args:
        examples: Labeled scenes
        kg: Knowledge graph matching the model
        model: Model to evaluate (read-only, so shared across workers)
        cfg: Search config
        seed: Round-seeding seed, the same for every scene
        workers: Thread pool size; 1 runs inline
    """
    if not examples:
        raise DatasetError("cannot evaluate an empty dataset")
    cfg = cfg or get_default_search_config()

    def predict(example: TrainExample) -> SearchResult:
        return run_search(merge(example.scene, kg), example.context, model, cfg, seed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(predict, examples))
    else:
        results = [predict(e) for e in examples]

    report = evaluate_predictions(
        [e.label for e in examples], [r.prediction for r in results], model.classes
    )
    iterations = [r.num_iterations for result in results for r in result.rounds]
    report.iteration_histogram = dict(Counter(iterations))
    report.mean_iterations_per_round = float(np.mean(iterations)) if iterations else 0.0
    logger.info(
        "evaluated %d scenes: accuracy %.4f, %.2f iterations per round",
        report.total,
        report.accuracy,
        report.mean_iterations_per_round,
    )
    return report


def balanced_subset(examples: Sequence[TrainExample], per_class: int, seed: int = 0) -> List[TrainExample]:
    """
    Up to per_class examples of each label, drawn with a seeded RNG.

    Dataset order is preserved within the subset.
    """
    if per_class < 1:
        raise DatasetError(f"per_class must be at least 1, got {per_class}")
    rng = np.random.default_rng(seed)
    by_label: Dict[str, List[int]] = {}
    for i, example in enumerate(examples):
        by_label.setdefault(example.label, []).append(i)
    keep: List[int] = []
    for label in sorted(by_label):
        indices = by_label[label]
        if len(indices) > per_class:
            indices = sorted(rng.choice(indices, size=per_class, replace=False).tolist())
        keep.extend(indices)
    return [examples[i] for i in sorted(keep)]
