"""
Frontier expansion and dynamic halting.

Threshold decisions are hard: nothing here is differentiated through.
"""

from dataclasses import dataclass
from typing import AbstractSet, Mapping, Optional

import numpy as np

from app.core.search.types import HaltReason, SearchConfig
from app.graphs.types import ActiveSet, MergedGraph


@dataclass(frozen=True)
class Expansion:
    active: ActiveSet
    added: frozenset
    max_importance: float  # -inf when nothing was added


def expand(
    merged: MergedGraph,
    active: ActiveSet,
    scores: Mapping[int, float],
    cfg: SearchConfig,
) -> Expansion:
    """
    Add every frontier node whose importance strictly exceeds gamma.

    Args:
        merged: Merged graph (needed to recompute the frontier)
        active: Current active set
        scores: Importance per frontier node
        cfg: Search config (gamma)
    """
    added = frozenset(n for n, s in scores.items() if s > cfg.gamma and n in active.frontier)
    return _grow(merged, active, added, scores)


def forced_expand(
    merged: MergedGraph,
    active: ActiveSet,
    scores: Mapping[int, float],
    targets: np.ndarray,
) -> Expansion:
    """
    Teacher-forced expansion: add exactly the frontier nodes whose target is 1.

    The reported importances still come from the model's scores.
    """
    added = frozenset(n for n in active.frontier if targets[n] > 0)
    return _grow(merged, active, added, scores)


def _grow(merged: MergedGraph, active: ActiveSet, added: frozenset, scores: Mapping[int, float]) -> Expansion:
    max_importance = max((scores.get(n, -np.inf) for n in added), default=-np.inf)
    return Expansion(active.grow(merged, added), added, float(max_importance))


def halt_reason(
    added: AbstractSet[int],
    max_importance: float,
    iteration: int,
    cfg: SearchConfig,
    use_lambda: bool = True,
) -> Optional[HaltReason]:
    """
    Why the round stops after this iteration, or None to continue.

    Halts when nothing was added, when no added node exceeds lambda (only if
    use_lambda), or when iteration reaches t_max. With cfg.early_halting off
    only t_max ends a round.
    """
    if not cfg.early_halting:
        return HaltReason.T_MAX if iteration >= cfg.t_max else None
    if not added:
        return HaltReason.NOTHING_ADDED
    if use_lambda and max_importance <= cfg.halt_lambda:
        return HaltReason.BELOW_LAMBDA
    if iteration >= cfg.t_max:
        return HaltReason.T_MAX
    return None


def should_halt(
    added: AbstractSet[int],
    max_importance: float,
    iteration: int,
    cfg: SearchConfig,
) -> bool:
    """True iff added is empty, max_importance <= lambda, or iteration >= t_max (only the last without early halting)."""
    return halt_reason(added, max_importance, iteration, cfg) is not None
