"""
Search Orchestrator - Coordinates the flow from merged graph to prediction

Flow per scene:
1. Seed an active graph from an uncovered SG node (merge engine)
2. Iterate propagate → score_frontier → expand until the halting rule fires
3. Classify the final active graph
4. Re-seed from SG nodes no round has activated, until the scene is covered
5. Combine the per-round logits and take the top-1 class
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Set, Tuple

import numpy as np

from app.core.merge import reseed_plan
from app.core.search.expansion import expand, forced_expand, halt_reason
from app.core.search.model import SearchModel
from app.core.search.network import NodeStates, classify, ensure_states, frontier_logits, initial_states, masked_scores, propagate
from app.core.search.types import RoundTrace, IterationTrace, SearchConfig, SearchResult, get_default_search_config
from app.errors import ContractViolation
from app.graphs.types import MergedGraph
from app.ingest.detections import ImageContext
from app.tensor import Matrix, ops

logger = logging.getLogger(__name__)


@dataclass
class SearchPass:
    """
    Everything one multi-round search produced, kept as tape-connected
    matrices so training can build its loss from it.

    Attributes:
        rounds: Per-round traces
        round_logits: 1×C classifier logits per round
        round_allowed: Allowed-class flags per round
        frontier_ids: Frontier node ids scored at each iteration
        frontier_logits: Matching n×1 importance logits
    """

    rounds: List[RoundTrace] = field(default_factory=list)
    round_logits: List[Matrix] = field(default_factory=list)
    round_allowed: List[np.ndarray] = field(default_factory=list)
    frontier_ids: List[Tuple[int, ...]] = field(default_factory=list)
    frontier_logits: List[Matrix] = field(default_factory=list)

    @property
    def allowed(self) -> np.ndarray:
        """Classes allowed in at least one round."""
        return np.logical_or.reduce(self.round_allowed)

    def aggregate(self, mode: str = "max") -> Matrix:
        """Per-class combination of round logits over the rounds that allow the class."""
        return ops.aggregate_rows(self.round_logits, self.round_allowed, mode=mode)


def search_pass(
    merged: MergedGraph,
    context: Optional[ImageContext],
    model: SearchModel,
    cfg: SearchConfig,
    rng_seed: int = 0,
    forced_targets: Optional[np.ndarray] = None,
) -> SearchPass:
    """
    Run every re-seeding round on one merged graph.

    Args:
        merged: Merged graph with at least one SG node
        context: Image context (its embedding is used only with image conditioning)
        model: Search model
        cfg: Search config
        rng_seed: Round r seeds from numpy.random.default_rng([rng_seed, r])
        forced_targets: Per-node 0/1 importance targets; when given, expansion
            is teacher-forced and only "nothing added" and t_max halt a round

    Returns:
        SearchPass with traces and tape-connected logits
    """
    if merged.num_sg == 0:
        raise ContractViolation("search needs at least one scene-graph node")

    init = initial_states(merged, model)
    outcome = SearchPass()
    covered: Set[int] = set()
    round_index = 0

    while True:
        active = reseed_plan(merged, covered, [rng_seed, round_index])
        if active is None:
            break
        trace = RoundTrace(round=round_index, seed=active.seed, initial_active=tuple(active.sorted_ids()))
        states: NodeStates = ensure_states({}, init, active.active | active.frontier)

        while True:
            states = propagate(merged, states, active, model)
            ids, logits = frontier_logits(merged, states, active, context, model, cfg)
            scores = {}
            if logits is not None:
                outcome.frontier_ids.append(ids)
                outcome.frontier_logits.append(logits)
                scores = {n: float(s) for n, s in zip(ids, ops.stable_sigmoid(logits.data).reshape(-1))}

            if forced_targets is None:
                step = expand(merged, active, scores, cfg)
            else:
                step = forced_expand(merged, active, scores, forced_targets)
            active = step.active
            added = tuple(sorted(step.added))
            trace.iterations.append(
                IterationTrace(active.iteration, added, tuple(scores[n] for n in added), scores)
            )
            states = ensure_states(states, init, active.frontier)

            reason = halt_reason(
                step.added, step.max_importance, active.iteration, cfg, use_lambda=forced_targets is None
            )
            if reason is not None:
                trace.halt_reason = reason
                break

        logits, allowed = classify(merged, states, active, model)
        trace.final_active = tuple(active.sorted_ids())
        outcome.rounds.append(trace)
        outcome.round_logits.append(logits)
        outcome.round_allowed.append(allowed)
        covered.update(i for i in active.active if merged.is_sg(i))
        logger.debug(
            "round %d: seed %s, %d iterations, %d active, halt=%s",
            round_index,
            merged.describe(trace.seed),
            trace.num_iterations,
            len(active),
            trace.halt_reason,
        )
        round_index += 1

    return outcome


def run_search(
    merged: MergedGraph,
    context: Optional[ImageContext],
    model: SearchModel,
    cfg: Optional[SearchConfig] = None,
    rng_seed: int = 0,
) -> SearchResult:
    """
    Classify one scene.

    Per-round logits are masked by compound activation and combined with
    cfg.round_aggregation (elementwise max by default); the prediction is the
    argmax, ties going to the lower class index.

    Args:
        merged: Merged graph
        context: Image context
        model: Trained search model
        cfg: Search config (defaults from settings)
        rng_seed: Seed for round seeding

    Returns:
        SearchResult with scores, prediction, active concepts and trace
    """
    cfg = cfg or get_default_search_config()
    outcome = search_pass(merged, context, model, cfg, rng_seed)
    scores = masked_scores(outcome.aggregate(cfg.round_aggregation), outcome.allowed)
    prediction = int(np.argmax(scores))

    active_kg: Set[int] = set()
    for r in outcome.rounds:
        active_kg.update(i for i in r.final_active if merged.is_kg(i))
    active_concepts = sorted({merged.label_of(i) for i in active_kg})

    return SearchResult(
        merged=merged,
        classes=model.classes,
        scores=scores,
        prediction=model.classes[prediction],
        active_concepts=active_concepts,
        rounds=outcome.rounds,
    )
