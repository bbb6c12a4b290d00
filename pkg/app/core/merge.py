"""
Graph Merging Module.

Joins the scene graph and the knowledge graph into one merged graph, picks
random seeds for the active graph, and plans re-seeding rounds until every
scene-graph node has been considered.
"""

import logging
from typing import AbstractSet, Iterable, Optional, Sequence, Set, Union

import numpy as np

from app.errors import ContractViolation
from app.graphs.types import ActiveSet, KnowledgeGraph, MergedGraph, NodeKind, SceneGraph

logger = logging.getLogger(__name__)

RngSeed = Union[int, Sequence[int]]


def merge(scene: SceneGraph, kg: KnowledgeGraph) -> MergedGraph:
    """
    Build the merged graph M.

    Every SG node gets a link edge to the primitive KG node with the same
    label. SG nodes whose label is not in the KG stay in M unlinked.

    Args:
        scene: Scene graph (non-empty; build_scene_graph guarantees it)
        kg: Validated knowledge graph

    Returns:
        MergedGraph over all SG and KG nodes
    """
    primitives = {node.label: node.index for node in kg.nodes if node.kind == NodeKind.PRIMITIVE}
    links = tuple(
        (node.index, primitives[node.label]) for node in scene.nodes if node.label in primitives
    )
    merged = MergedGraph(scene, kg, links)
    unlinked = merged.num_sg - len(links)
    if unlinked:
        logger.debug("merge: %d of %d scene nodes have no knowledge graph counterpart", unlinked, merged.num_sg)
    return merged


def seed_active(
    merged: MergedGraph,
    rng_seed: RngSeed,
    exclude: AbstractSet[int] = frozenset(),
) -> Optional[ActiveSet]:
    """
    Start an active graph from a random scene-graph node.

    The seed is drawn uniformly from SG nodes not in exclude. The active set
    is the seed, its SG neighbours, and every KG node linked to any of them.

    Args:
        merged: Merged graph
        rng_seed: Seed for numpy.random.default_rng
        exclude: SG node ids that may not be picked

    Returns:
        ActiveSet at iteration 0 carrying the drawn seed, or None when every
        SG node is excluded
        (the "fully covered" signal)
    """
    eligible = [i for i in range(merged.num_sg) if i not in exclude]
    if not eligible:
        return None
    rng = np.random.default_rng(rng_seed)
    seed = eligible[int(rng.integers(len(eligible)))]

    sg_part: Set[int] = {seed}
    sg_part.update(e.dst for e in merged.sg.edges if e.src == seed)
    active = set(sg_part)
    active.update(merged.kg_global(k) for s, k in merged.link_edges if s in sg_part)
    return ActiveSet.create(merged, active, iteration=0, seed=seed)


def reseed_plan(
    merged: MergedGraph,
    covered: Iterable[int],
    rng_seed: RngSeed,
) -> Optional[ActiveSet]:
    """
    Next round's starting active set, or None when the scene is covered.

    Args:
        merged: Merged graph
        covered: SG node ids activated by earlier rounds
        rng_seed: Seed for this round

    Returns:
        ActiveSet seeded from an uncovered SG node, or None (done)
    """
    covered = frozenset(covered)
    if any(not merged.is_sg(i) for i in covered):
        raise ContractViolation("covered set may only hold scene-graph node ids")
    return seed_active(merged, rng_seed, exclude=covered)
