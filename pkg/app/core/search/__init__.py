"""
Merged graph search network.

Public API:
    - SearchModel, SearchConfig, get_default_search_config
    - propagate(), score_frontier(), classify()
    - expand(), should_halt()
    - save_checkpoint(), load_checkpoint()
"""

from app.core.search.checkpoint import CHECKPOINT_VERSION, load_checkpoint, save_checkpoint
from app.core.search.expansion import Expansion, expand, forced_expand, halt_reason, should_halt
from app.core.search.model import SearchModel, class_labels
from app.core.search.network import (
    InitialStates,
    NodeStates,
    classify,
    ensure_states,
    frontier_logits,
    initial_states,
    masked_scores,
    propagate,
    score_frontier,
)
from app.core.search.types import (
    HaltReason,
    IterationTrace,
    RoundTrace,
    SearchConfig,
    SearchResult,
    get_default_search_config,
)

__all__ = [
    "CHECKPOINT_VERSION",
    "Expansion",
    "HaltReason",
    "InitialStates",
    "IterationTrace",
    "NodeStates",
    "RoundTrace",
    "SearchConfig",
    "SearchModel",
    "SearchResult",
    "class_labels",
    "classify",
    "ensure_states",
    "expand",
    "forced_expand",
    "frontier_logits",
    "get_default_search_config",
    "halt_reason",
    "initial_states",
    "load_checkpoint",
    "masked_scores",
    "propagate",
    "save_checkpoint",
    "score_frontier",
    "should_halt",
]
