"""
Synthetic data: scene generator, labelling oracle and experiments.

Usage:
    from app.synth import NoiseConfig, generate_scene, oracle_label

    data, label = generate_scene(kg, "kitchen", NoiseConfig(distractors=1, sigma=0.1), seed=3)
"""

from app.synth.edges import edge_training_pairs, train_edge_classifier
from app.synth.experiments import HaltingResult, iteration_reduction, run_halting_experiment
from app.synth.generator import NoiseConfig, generate_composite_scene, generate_scene, write_dataset
from app.synth.oracle import ORACLE_THRESHOLD, compound_recalls, oracle_label

__all__ = [
    "HaltingResult",
    "NoiseConfig",
    "ORACLE_THRESHOLD",
    "compound_recalls",
    "edge_training_pairs",
    "generate_composite_scene",
    "generate_scene",
    "iteration_reduction",
    "oracle_label",
    "run_halting_experiment",
    "train_edge_classifier",
    "write_dataset",
]
