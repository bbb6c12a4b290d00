"""
Merged Graph Search Network.

Three learned pieces run over the active graph each iteration:
- propagate: typed message passing into active and frontier nodes
- score_frontier: importance of each frontier node given the active context
- classify: linear head over the mean active state

All computation goes through tensor ops, so the same code serves inference
and training (under a GradTape).
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from app.core.search.model import SearchModel
from app.core.search.types import SearchConfig
from app.errors import ContractViolation, ShapeError
from app.graphs.types import ActiveSet, MergedGraph
from app.ingest.detections import ImageContext
from app.tensor import Matrix, ff_forward, ff_logits, ops

logger = logging.getLogger(__name__)

NodeStates = Dict[int, Matrix]


@dataclass(frozen=True)
class InitialStates:
    """
    Projected starting states for every node of M, computed once per search.

    sg holds one row per SG node (embedding · projection); kg is the KG
    embedding table itself.
    """

    merged: MergedGraph
    sg: Matrix
    kg: Matrix

    def state(self, node_id: int) -> Matrix:
        self.merged.check_id(node_id)
        if self.merged.is_sg(node_id):
            return ops.gather_rows(self.sg, [node_id])
        return ops.gather_rows(self.kg, [node_id - self.merged.num_sg])


def initial_states(merged: MergedGraph, model: SearchModel) -> InitialStates:
    embeddings = np.vstack([node.embedding.reshape(1, -1) for node in merged.sg.nodes])
    if embeddings.shape[1] != model.embedding_dim:
        raise ShapeError(
            f"scene embeddings have {embeddings.shape[1]} values, model expects {model.embedding_dim}"
        )
    if len(merged.kg.nodes) != model.kg_embeddings.rows:
        raise ShapeError(
            f"knowledge graph has {len(merged.kg.nodes)} nodes, model table has {model.kg_embeddings.rows}"
        )
    return InitialStates(merged, ops.matmul(Matrix(embeddings), model.sg_projection), model.kg_embeddings)


def ensure_states(states: NodeStates, init: InitialStates, node_ids: Iterable[int]) -> NodeStates:
    """Copy of states with a starting state for every id that lacks one."""
    updated = dict(states)
    for node_id in sorted(set(node_ids)):
        if node_id not in updated:
            updated[node_id] = init.state(node_id)
    return updated


def propagate(merged: MergedGraph, states: NodeStates, active: ActiveSet, model: SearchModel) -> NodeStates:
    """
    One round of message passing.

    Every node v in active ∪ frontier with at least one active neighbour u
    receives message_net([h_u, h_v, e_type]) per incoming edge; messages are
    mean-aggregated and blended in through a sigmoid gate:
        h_v ← h_v + g_v · (tanh(agg_v) − h_v)
    Nodes without active neighbours keep their state object unchanged.

    Raises:
        ContractViolation: A node in active ∪ frontier has no state
    """
    targets = sorted(active.active | active.frontier)
    missing = [v for v in targets if v not in states]
    if missing:
        raise ContractViolation(f"propagate: no state for nodes {missing[:5]}")

    src, dst, types = [], [], []
    receivers: List[int] = []
    for v in targets:
        inbox = [(u, t) for u, t in merged.incoming[v] if u in active.active]
        if not inbox:
            continue
        receivers.append(v)
        for u, t in inbox:
            src.append(u)
            dst.append(v)
            types.append(t)
    if not receivers:
        return dict(states)

    row_of = {v: i for i, v in enumerate(receivers)}
    h_src = ops.concat_rows([states[u] for u in src])
    h_dst = ops.concat_rows([states[v] for v in dst])
    edge = ops.gather_rows(model.edge_embeddings, types)
    messages = ff_forward(model.message_net, ops.concat_cols([h_src, h_dst, edge]))

    averaging = np.zeros((len(receivers), len(src)))
    for k, v in enumerate(dst):
        averaging[row_of[v], k] = 1.0
    averaging /= averaging.sum(axis=1, keepdims=True)
    aggregate = ops.matmul(Matrix(averaging), messages)

    current = ops.concat_rows([states[v] for v in receivers])
    gate = ops.sigmoid(
        ops.add(ops.matmul(ops.concat_cols([current, aggregate]), model.gate_weight), model.gate_bias)
    )
    updated_rows = ops.add(current, ops.mul(gate, ops.sub(ops.tanh(aggregate), current)))

    updated = dict(states)
    for v, i in row_of.items():
        updated[v] = ops.gather_rows(updated_rows, [i])
    return updated


def _image_row(context: Optional[ImageContext], model: SearchModel, cfg: SearchConfig) -> np.ndarray:
    if not cfg.image_conditioning or context is None or context.embedding is None:
        return np.zeros(model.image_dim)
    embedding = np.asarray(context.embedding, dtype=np.float64).reshape(-1)
    if embedding.size != model.image_dim:
        raise ShapeError(f"image embedding has {embedding.size} values, model expects {model.image_dim}")
    return embedding


def frontier_logits(
    merged: MergedGraph,
    states: NodeStates,
    active: ActiveSet,
    context: Optional[ImageContext],
    model: SearchModel,
    cfg: SearchConfig,
) -> Tuple[Tuple[int, ...], Optional[Matrix]]:
    """
    Pre-sigmoid importance for each frontier node.

    Returns:
        (frontier ids ascending, n×1 logits), or ((), None) for an empty frontier
    """
    frontier = tuple(sorted(active.frontier))
    if not frontier:
        return (), None
    if not active.active:
        raise ContractViolation("score_frontier: empty active set")
    n = len(frontier)
    context_row = ops.mean_rows(ops.concat_rows([states[a] for a in sorted(active.active)]))
    image = Matrix(np.tile(_image_row(context, model, cfg), (n, 1)))
    features = ops.concat_cols(
        [
            ops.concat_rows([states[v] for v in frontier]),
            ops.gather_rows(context_row, [0] * n),
            image,
        ]
    )
    return frontier, ff_logits(model.importance_net, features)


def score_frontier(
    merged: MergedGraph,
    states: NodeStates,
    active: ActiveSet,
    context: Optional[ImageContext],
    model: SearchModel,
    cfg: SearchConfig,
) -> Dict[int, float]:
    """
    Importance in (0, 1) for every frontier node.

    The context vector is the mean state over the active set. The image
    embedding enters only with image conditioning on; otherwise a zero
    vector takes its place.
    """
    ids, logits = frontier_logits(merged, states, active, context, model, cfg)
    if logits is None:
        return {}
    scores = ops.sigmoid(logits).vector()
    return {node_id: float(s) for node_id, s in zip(ids, scores)}


def classify(
    merged: MergedGraph,
    states: NodeStates,
    active: ActiveSet,
    model: SearchModel,
) -> Tuple[Matrix, np.ndarray]:
    """
    Linear classifier over the mean active state.

    Returns:
        (1×C logits, allowed flags). A compound is allowed only if its KG node
        is active; background is always allowed.

    Raises:
        ContractViolation: Empty active set
    """
    if not active.active:
        raise ContractViolation("classify: empty active set")
    pooled = ops.mean_rows(ops.concat_rows([states[v] for v in sorted(active.active)]))
    logits = ops.add(ops.matmul(pooled, model.classifier_weight), model.classifier_bias)
    allowed = np.zeros(logits.cols, dtype=bool)
    allowed[0] = True
    for k, node_id in enumerate(merged.compound_ids, start=1):
        allowed[k] = node_id in active.active
    return logits, allowed


def masked_scores(logits: Matrix, allowed: np.ndarray) -> np.ndarray:
    """Logit vector with disallowed classes set to -inf."""
    return np.where(allowed, logits.vector(), -np.inf)
