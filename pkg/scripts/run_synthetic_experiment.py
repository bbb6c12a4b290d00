"""
Synthetic End-to-End Experiment

Generates train/held-out sets on the packaged knowledge graph, trains a search
model, then compares it with the symbolic KG baseline and measures how much
dynamic halting saves.

Results are saved to a timestamped JSON file for later comparison.

Usage:
    python scripts/run_synthetic_experiment.py [train_count] [held_out_count]
"""

import json
import logging
import sys
import tempfile
from datetime import datetime
from pathlib import Path

# Add parent directory to path to import app modules
sys.path.insert(0, str(Path(__file__).parent.parent))

from app.config import settings
from app.core.search import SearchModel, get_default_search_config
from app.ingest import get_default_scene_config
from app.knowledge import default_kg, symbolic_predict
from app.synth import NoiseConfig, iteration_reduction, run_halting_experiment, write_dataset
from app.training import evaluate, evaluate_predictions, get_default_train_config, load_manifest, train

NOISE = NoiseConfig(distractors=1, sigma=0.1)


def print_banner(train_count: int, held_out_count: int):
    print("=" * 70)
    print("SYNTHETIC SCENE EXPERIMENT")
    print("=" * 70)
    print(f"Train scenes:    {train_count}")
    print(f"Held-out scenes: {held_out_count}")
    print(f"Noise:           {NOISE.distractors} distractor(s), sigma={NOISE.sigma}")
    print(f"Epochs:          {settings.train_epochs}")
    print("=" * 70)
    print()


def main():
    train_count = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
    held_out_count = int(sys.argv[2]) if len(sys.argv) > 2 else 500
    logging.basicConfig(level=settings.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    print_banner(train_count, held_out_count)

    kg = default_kg()
    scene_cfg = get_default_scene_config()
    search_cfg = get_default_search_config()

    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        print("[1/4] Generating datasets...")
        train_manifest = write_dataset(root / "train", kg, train_count, NOISE, seed=1)
        held_out_manifest = write_dataset(root / "held_out", kg, held_out_count, NOISE, seed=2)
        examples = load_manifest(train_manifest, kg, scene_cfg)
        held_out = load_manifest(held_out_manifest, kg, scene_cfg)

    print("[2/4] Training...")
    model = SearchModel.initialize(
        kg,
        embedding_dim=scene_cfg.embedding_dim,
        hidden_dim=settings.hidden_dim,
        image_dim=scene_cfg.image_dim,
        edge_embedding_dim=settings.edge_embedding_dim,
        seed=settings.train_seed,
    )
    model, history = train(examples, kg, model, get_default_train_config())
    print(f"  final loss: {history.epoch_losses[-1]:.4f}")

    print("[3/4] Evaluating model and KG baseline...")
    report = evaluate(held_out, kg, model, search_cfg, workers=4)
    baseline = evaluate_predictions(
        [e.label for e in held_out],
        [symbolic_predict(kg, e.scene.labels) for e in held_out],
        model.classes,
    )
    print(f"  model accuracy:    {report.accuracy:.4f}")
    print(f"  baseline accuracy: {baseline.accuracy:.4f}")

    print("[4/4] Dynamic halting (lambda=0.75 vs lambda=0)...")
    halting = run_halting_experiment(held_out, kg, model, lambdas=(0.75, 0.0), cfg=search_cfg, workers=4)
    for result in halting:
        print(
            f"  lambda={result.halt_lambda:.2f}: accuracy {result.accuracy:.4f}, "
            f"{result.mean_iterations_per_round:.2f} iterations per round"
        )
    reduction = iteration_reduction(halting)
    print(f"  iteration reduction: {reduction:.1%}")

    results = {
        "timestamp": datetime.now().isoformat(),
        "train_count": train_count,
        "held_out_count": held_out_count,
        "final_loss": history.epoch_losses[-1],
        "model": report.to_metrics("held_out").model_dump(),
        "baseline_accuracy": baseline.accuracy,
        "halting": [
            {"lambda": r.halt_lambda, "accuracy": r.accuracy, "mean_iterations_per_round": r.mean_iterations_per_round}
            for r in halting
        ],
        "iteration_reduction": reduction,
    }
    out = Path(f"experiment_results_{datetime.now().strftime('%Y%m%d_%H%M%S')}.json")
    out.write_text(json.dumps(results, indent=2), encoding="utf-8")

    print()
    print("=" * 70)
    print(f"Results saved to: {out}")
    print("=" * 70)


if __name__ == "__main__":
    main()
