"""
Brute-force labelling oracle for synthetic scenes.

Written without the knowledge store's ranking code so the two can be
checked against each other.
"""

from typing import Dict, Iterable, List, Tuple

from app.graphs.types import BACKGROUND, KgRelation, KnowledgeGraph, NodeKind

ORACLE_THRESHOLD = 0.5


def compound_recalls(kg: KnowledgeGraph, labels: Iterable[str]) -> Dict[str, float]:
    """Weighted constituent recall of every compound."""
    present = {label.strip().lower() for label in labels}
    weights: Dict[str, List[Tuple[str, float]]] = {
        node.label: [] for node in kg.nodes if node.kind == NodeKind.COMPOUND
    }
    for edge in kg.edges:
        if edge.relation != KgRelation.PART_OF:
            continue
        compound = kg.nodes[edge.dst].label
        if compound in weights:
            weights[compound].append((kg.nodes[edge.src].label, edge.weight))

    recalls = {}
    for compound, parts in weights.items():
        total = 0.0
        hit = 0.0
        for label, weight in parts:
            total += weight
            if label in present:
                hit += weight
        recalls[compound] = hit / total if total else 0.0
    return recalls


def oracle_label(kg: KnowledgeGraph, labels: Iterable[str]) -> str:
    """
    Best compound by constituent recall if it reaches 0.5, else background.

    Ties go to the lexicographically smallest compound label.
    """
    recalls = compound_recalls(kg, labels)
    best_label = BACKGROUND
    best_score = -1.0
    for compound in sorted(recalls):
        if recalls[compound] > best_score:
            best_label, best_score = compound, recalls[compound]
    if best_score < ORACLE_THRESHOLD:
        return BACKGROUND
    return best_label
