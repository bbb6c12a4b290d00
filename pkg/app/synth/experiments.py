"""
Dynamic halting experiment: how much the λ rule saves and what it costs.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

from app.core.search.model import SearchModel
from app.core.search.types import SearchConfig, get_default_search_config
from app.graphs.types import KnowledgeGraph
from app.training.dataset import TrainExample
from app.training.evaluation import evaluate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HaltingResult:
    halt_lambda: float
    accuracy: float
    mean_iterations_per_round: float


def run_halting_experiment(
    examples: Sequence[TrainExample],
    kg: KnowledgeGraph,
    model: SearchModel,
    lambdas: Sequence[float] = (0.75, 0.0),
    cfg: Optional[SearchConfig] = None,
    seed: int = 0,
    workers: int = 1,
) -> List[HaltingResult]:
    """
    Evaluate the same model under several halting thresholds.

    λ = 0 is the no-halting reference: early halting is switched off and
    every round runs to t_max.
    """
    base = cfg or get_default_search_config()
    results = []
    for halt_lambda in lambdas:
        run_cfg = base.model_copy(update={"halt_lambda": halt_lambda, "early_halting": halt_lambda > 0.0})
        report = evaluate(examples, kg, model, run_cfg, seed=seed, workers=workers)
        results.append(HaltingResult(halt_lambda, report.accuracy, report.mean_iterations_per_round))
        logger.info(
            "λ=%.2f: accuracy %.4f, %.2f iterations per round",
            halt_lambda,
            report.accuracy,
            report.mean_iterations_per_round,
        )
    return results


def iteration_reduction(results: Sequence[HaltingResult]) -> float:
    """Relative drop in mean iterations of the first result versus the last."""
    first, last = results[0], results[-1]
    if last.mean_iterations_per_round == 0:
        return 0.0
    return 1.0 - first.mean_iterations_per_round / last.mean_iterations_per_round
