"""
Search Engine Types

Configuration, per-iteration traces and the final search result.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.api.schemas import InferenceResponse, IterationExport, RoundExport
from app.config import settings
from app.graphs.types import MergedGraph


class SearchConfig(BaseModel):
    """
    Search hyperparameters.

    Attributes:
        gamma: Importance threshold; a frontier node joins when its score exceeds it
        halt_lambda: Halting threshold; a round stops when no added node exceeds it
        t_max: Iteration cap per round
        early_halting: Stop a round when nothing is added or nothing beats lambda;
            when off, every round runs exactly t_max iterations
        image_conditioning: Feed the image embedding to the importance network
        round_aggregation: How per-round logits are combined
    """

    model_config = ConfigDict(frozen=True)

    gamma: float = Field(default=0.5, gt=0.0, lt=1.0)
    halt_lambda: float = Field(default=0.75, ge=0.0, lt=1.0)
    t_max: int = Field(default=10, ge=1)
    early_halting: bool = True
    image_conditioning: bool = False
    round_aggregation: Literal["max", "mean", "sum"] = "max"


def get_default_search_config() -> SearchConfig:
    return SearchConfig(
        gamma=settings.search_gamma,
        halt_lambda=settings.search_lambda,
        t_max=settings.search_t_max,
        image_conditioning=settings.image_conditioning,
        round_aggregation=settings.round_aggregation,
    )


class HaltReason(str, Enum):
    NOTHING_ADDED = "nothing-added"
    BELOW_LAMBDA = "below-lambda"
    T_MAX = "t-max"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class IterationTrace:
    """
    One propagate → score → expand step.

    Attributes:
        iteration: t after the expansion (1-based)
        added: Node ids activated in this step, ascending
        importance: Importance of each added node, same order
        scores: Importance of every scored frontier node
    """

    iteration: int
    added: Tuple[int, ...]
    importance: Tuple[float, ...]
    scores: Dict[int, float] = field(default_factory=dict)


@dataclass
class RoundTrace:
    round: int
    seed: int
    initial_active: Tuple[int, ...]
    final_active: Tuple[int, ...] = ()
    iterations: List[IterationTrace] = field(default_factory=list)
    halt_reason: Optional[HaltReason] = None

    @property
    def num_iterations(self) -> int:
        return len(self.iterations)


@dataclass
class SearchResult:
    """
    Outcome of a full multi-round search on one scene.

    Attributes:
        classes: Class labels, background first
        scores: Aggregated logits; -inf for compounds never activated
        prediction: Top-1 class label
        active_concepts: Labels of KG nodes active in any round
        rounds: Per-round traces
    """

    merged: MergedGraph
    classes: Tuple[str, ...]
    scores: np.ndarray
    prediction: str
    active_concepts: List[str]
    rounds: List[RoundTrace]

    @property
    def prediction_index(self) -> int:
        return self.classes.index(self.prediction)

    def ranking(self) -> List[Tuple[str, float]]:
        """Classes by descending score; ties keep class order."""
        order = sorted(range(len(self.classes)), key=lambda i: -self.scores[i])
        return [(self.classes[i], float(self.scores[i])) for i in order]

    def export_trace(self) -> List[RoundExport]:
        describe = self.merged.describe
        return [
            RoundExport(
                round=r.round,
                seed=describe(r.seed),
                initial_active=[describe(i) for i in r.initial_active],
                final_active=[describe(i) for i in r.final_active],
                iterations=[
                    IterationExport(added=[describe(i) for i in it.added], importance=list(it.importance))
                    for it in r.iterations
                ],
                halt_reason=str(r.halt_reason),
            )
            for r in self.rounds
        ]

    def to_response(self, explain: bool = False) -> InferenceResponse:
        return InferenceResponse(
            prediction=self.prediction,
            scores={
                label: (float(score) if np.isfinite(score) else None)
                for label, score in zip(self.classes, self.scores)
            },
            active_concepts=self.active_concepts,
            trace=self.export_trace() if explain else None,
        )
