"""
Command handlers for the scene reasoner CLI.

Every command reads JSON files, writes JSON to stdout and maps errors to exit
codes: 2 for bad input, 3 for broken internal invariants.
"""

import functools
import json
import logging
from pathlib import Path
from typing import Optional

import click
from pydantic import ValidationError

from app.config import settings
from app.core.merge import merge
from app.core.orchestrator import run_search
from app.core.search.checkpoint import load_checkpoint, save_checkpoint
from app.core.search.model import SearchModel, class_labels
from app.core.search.types import SearchConfig, get_default_search_config
from app.errors import InputError, SceneReasonerError
from app.graphs.types import KnowledgeGraph
from app.ingest.detections import parse_detection_file
from app.ingest.scene_builder import SceneConfig, build_scene_graph, get_default_scene_config
from app.knowledge.store import default_kg, load_kg, symbolic_predict
from app.synth.edges import train_edge_classifier
from app.synth.generator import NoiseConfig, write_dataset
from app.training.dataset import load_manifest
from app.training.evaluation import balanced_subset, evaluate, evaluate_predictions
from app.training.trainer import TrainConfig, Trainer, get_default_train_config

logger = logging.getLogger(__name__)

MODES = {"object-level": False, "image-level": True}


def handle_errors(command):
    """Turn package errors into `error: ...` on stderr plus the matching exit code."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except SceneReasonerError as e:
            click.echo(f"error: {e}", err=True)
            raise SystemExit(e.exit_code) from None

    return wrapper


def read_file(path: str, what: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise InputError(f"cannot read {what} {path}: {e.strerror}") from None


def load_knowledge_graph(path: Optional[str]) -> KnowledgeGraph:
    if path is None:
        return default_kg()
    return load_kg(read_file(path, "knowledge graph"))


def scene_config(
    min_confidence: Optional[float],
    embedding_dim: Optional[int] = None,
    image_dim: Optional[int] = None,
) -> SceneConfig:
    defaults = get_default_scene_config()
    updates = {}
    if image_dim is not None:
        updates["image_dim"] = image_dim
    if min_confidence is not None:
        updates["min_confidence"] = min_confidence
    if embedding_dim is not None:
        updates["embedding_dim"] = embedding_dim
    try:
        return SceneConfig.model_validate({**defaults.model_dump(), **updates})
    except ValidationError as e:
        raise InputError(f"invalid scene settings: {e.errors()[0]['msg']}") from None


def edge_classifier_for(cfg: SceneConfig, seed: int):
    if cfg.edge_mode != "learned":
        return None
    logger.info("edge mode is 'learned': fitting the edge classifier (seed %d)", seed)
    classifier, _ = train_edge_classifier(seed=seed)
    return classifier


def search_config(
    gamma: Optional[float],
    halt_lambda: Optional[float],
    t_max: Optional[int],
    mode: Optional[str],
) -> SearchConfig:
    defaults = get_default_search_config()
    updates = {}
    if gamma is not None:
        updates["gamma"] = gamma
    if halt_lambda is not None:
        updates["halt_lambda"] = halt_lambda
    if t_max is not None:
        updates["t_max"] = t_max
    if mode is not None:
        updates["image_conditioning"] = MODES[mode]
    try:
        return SearchConfig.model_validate({**defaults.model_dump(), **updates})
    except ValidationError as e:
        first = e.errors()[0]
        raise InputError(f"invalid search settings: {first['loc'][0]}: {first['msg']}") from None


def echo_json(payload) -> None:
    click.echo(json.dumps(payload, indent=2))


# Shared options -------------------------------------------------------------

kg_option = click.option("--kg", "kg_path", type=str, default=None, help="Knowledge graph file (default: packaged KG)")
seed_option = click.option("--seed", type=int, default=None, help="RNG seed (default: TRAIN_SEED)")
min_confidence_option = click.option("--min-confidence", type=float, default=None, help="Drop detections below this confidence")


def search_options(command):
    command = click.option("--gamma", type=float, default=None, help="Importance threshold γ")(command)
    command = click.option("--lambda", "halt_lambda", type=float, default=None, help="Halting threshold λ (default 0.75)")(command)
    command = click.option("--t-max", type=int, default=None, help="Iteration cap per round")(command)
    command = click.option("--mode", type=click.Choice(sorted(MODES)), default=None, help="Image conditioning off/on")(command)
    return command


# Commands -------------------------------------------------------------------

@click.command()
@click.argument("detections")
@kg_option
@min_confidence_option
@handle_errors
def ingest(detections: str, kg_path: Optional[str], min_confidence: Optional[float]):
    """Build the scene graph for DETECTIONS and print it with its KG links."""
    kg = load_knowledge_graph(kg_path)
    cfg = scene_config(min_confidence)
    context, records = parse_detection_file(read_file(detections, "detection file"), [n.label for n in kg.nodes])
    scene = build_scene_graph(context, records, cfg, edge_classifier_for(cfg, settings.train_seed))
    merged = merge(scene, kg)
    echo_json(
        {
            "image": {"width": context.width, "height": context.height},
            "nodes": [
                {
                    "id": node.index,
                    "name": node.name,
                    "label": node.label,
                    "bbox": list(node.bbox),
                    "confidence": node.confidence,
                }
                for node in scene.nodes
            ],
            "edges": [
                {"src": scene.nodes[e.src].name, "dst": scene.nodes[e.dst].name, "relation": e.relation.value}
                for e in scene.edges
            ],
            "links": [
                {"sg": merged.describe(s), "kg": merged.describe(merged.kg_global(k))} for s, k in merged.link_edges
            ],
        }
    )


@click.command()
@click.argument("manifest")
@kg_option
@click.option("--out", "out_path", required=True, help="Checkpoint file to write")
@click.option("--report", "report_path", default=None, help="Metrics report file (default: stdout only)")
@click.option("--eval-manifest", default=None, help="Manifest to evaluate on (default: the training manifest)")
@click.option("--epochs", type=int, default=None)
@click.option("--lr", type=float, default=None)
@click.option("--alpha", type=float, default=None, help="Importance loss weight α")
@click.option("--teacher-forcing/--no-teacher-forcing", default=None)
@click.option("--hidden-dim", type=int, default=None)
@seed_option
@search_options
@min_confidence_option
@handle_errors
def train(
    manifest: str,
    kg_path: Optional[str],
    out_path: str,
    report_path: Optional[str],
    eval_manifest: Optional[str],
    epochs: Optional[int],
    lr: Optional[float],
    alpha: Optional[float],
    teacher_forcing: Optional[bool],
    hidden_dim: Optional[int],
    seed: Optional[int],
    gamma: Optional[float],
    halt_lambda: Optional[float],
    t_max: Optional[int],
    mode: Optional[str],
    min_confidence: Optional[float],
):
    """Train a search model on MANIFEST and write a checkpoint plus metrics."""
    kg = load_knowledge_graph(kg_path)
    scene_cfg = scene_config(min_confidence)
    search_cfg = search_config(gamma, halt_lambda, t_max, mode)
    defaults = get_default_train_config()
    overrides = {
        "epochs": epochs,
        "lr": lr,
        "importance_loss_weight": alpha,
        "teacher_forcing": teacher_forcing,
        "seed": seed,
    }
    try:
        train_cfg = TrainConfig.model_validate(
            {
                **defaults.model_dump(exclude={"search"}),
                **{k: v for k, v in overrides.items() if v is not None},
                "search": search_cfg,
            }
        )
    except ValidationError as e:
        first = e.errors()[0]
        raise InputError(f"invalid training settings: {first['loc'][0]}: {first['msg']}") from None

    edge_classifier = edge_classifier_for(scene_cfg, train_cfg.seed)
    examples = load_manifest(Path(manifest), kg, scene_cfg, edge_classifier)
    model = SearchModel.initialize(
        kg,
        embedding_dim=scene_cfg.embedding_dim,
        hidden_dim=hidden_dim or settings.hidden_dim,
        image_dim=scene_cfg.image_dim,
        edge_embedding_dim=settings.edge_embedding_dim,
        seed=train_cfg.seed,
    )
    trainer = Trainer(kg, model, train_cfg)
    history = trainer.train(examples)

    config = {"search": search_cfg.model_dump(), "train": train_cfg.model_dump(exclude={"search"})}
    Path(out_path).write_bytes(save_checkpoint(trainer.model, config))
    logger.info("checkpoint written to %s", out_path)

    eval_examples = examples if eval_manifest is None else load_manifest(Path(eval_manifest), kg, scene_cfg, edge_classifier)
    report = evaluate(eval_examples, kg, trainer.model, search_cfg, seed=train_cfg.seed)
    metrics = report.to_metrics(source=eval_manifest or manifest)
    if report_path:
        Path(report_path).write_text(metrics.model_dump_json(indent=2), encoding="utf-8")
    echo_json(
        {
            "checkpoint": out_path,
            "epochs": train_cfg.epochs,
            "final_loss": history.epoch_losses[-1],
            "accuracy": report.accuracy,
            "report": report_path,
        }
    )


@click.command()
@click.argument("detections")
@kg_option
@click.option("--checkpoint", "checkpoint_path", required=True)
@click.option("--explain", is_flag=True, help="Include the per-round search trace")
@seed_option
@search_options
@min_confidence_option
@handle_errors
def infer(
    detections: str,
    kg_path: Optional[str],
    checkpoint_path: str,
    explain: bool,
    seed: Optional[int],
    gamma: Optional[float],
    halt_lambda: Optional[float],
    t_max: Optional[int],
    mode: Optional[str],
    min_confidence: Optional[float],
):
    """Predict the compound concept of one scene."""
    kg = load_knowledge_graph(kg_path)
    model, _ = load_checkpoint(read_file(checkpoint_path, "checkpoint"), kg)
    scene_cfg = scene_config(min_confidence, model.embedding_dim, model.image_dim)
    search_cfg = search_config(gamma, halt_lambda, t_max, mode)
    seed = settings.train_seed if seed is None else seed

    context, records = parse_detection_file(read_file(detections, "detection file"), [n.label for n in kg.nodes])
    scene = build_scene_graph(context, records, scene_cfg, edge_classifier_for(scene_cfg, seed))
    result = run_search(merge(scene, kg), context, model, search_cfg, rng_seed=seed)
    click.echo(result.to_response(explain=explain).model_dump_json(indent=2, exclude_none=True))


@click.command(name="eval")
@click.argument("manifest")
@kg_option
@click.option("--checkpoint", "checkpoint_path", default=None)
@click.option("--baseline", type=click.Choice(["kg"]), default=None, help="Score the symbolic KG baseline instead of a model")
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--balanced-subset", "per_class", type=int, default=None, help="Evaluate on N examples per class")
@click.option("--report", "report_path", default=None)
@seed_option
@search_options
@min_confidence_option
@handle_errors
def evaluate_command(
    manifest: str,
    kg_path: Optional[str],
    checkpoint_path: Optional[str],
    baseline: Optional[str],
    workers: int,
    per_class: Optional[int],
    report_path: Optional[str],
    seed: Optional[int],
    gamma: Optional[float],
    halt_lambda: Optional[float],
    t_max: Optional[int],
    mode: Optional[str],
    min_confidence: Optional[float],
):
    """Top-1 accuracy of a checkpoint (or the KG baseline) on MANIFEST."""
    if (checkpoint_path is None) == (baseline is None):
        raise InputError("give exactly one of --checkpoint or --baseline kg")
    kg = load_knowledge_graph(kg_path)
    seed = settings.train_seed if seed is None else seed

    model = None
    embedding_dim = image_dim = None
    if checkpoint_path is not None:
        model, _ = load_checkpoint(read_file(checkpoint_path, "checkpoint"), kg)
        embedding_dim, image_dim = model.embedding_dim, model.image_dim
    scene_cfg = scene_config(min_confidence, embedding_dim, image_dim)
    examples = load_manifest(Path(manifest), kg, scene_cfg, edge_classifier_for(scene_cfg, seed))
    if per_class is not None:
        examples = balanced_subset(examples, per_class, seed)

    if model is None:
        predictions = [symbolic_predict(kg, e.scene.labels) for e in examples]
        report = evaluate_predictions([e.label for e in examples], predictions, class_labels(kg))
        source = f"baseline:kg:{manifest}"
    else:
        cfg = search_config(gamma, halt_lambda, t_max, mode)
        report = evaluate(examples, kg, model, cfg, seed=seed, workers=max(workers, 1))
        source = manifest

    metrics = report.to_metrics(source=source)
    if report_path:
        Path(report_path).write_text(metrics.model_dump_json(indent=2), encoding="utf-8")
    click.echo(metrics.model_dump_json(indent=2))


@click.command()
@click.argument("out_dir")
@kg_option
@click.option("--count", type=int, default=200, show_default=True)
@click.option("--distractors", type=int, default=0, show_default=True)
@click.option("--sigma", type=float, default=0.0, show_default=True)
@click.option("--background-fraction", type=float, default=0.1, show_default=True)
@seed_option
@handle_errors
def synth(
    out_dir: str,
    kg_path: Optional[str],
    count: int,
    distractors: int,
    sigma: float,
    background_fraction: float,
    seed: Optional[int],
):
    """Write a synthetic dataset (detection files + manifest.jsonl) to OUT_DIR."""
    kg = load_knowledge_graph(kg_path)
    try:
        noise = NoiseConfig(distractors=distractors, sigma=sigma)
    except ValidationError as e:
        raise InputError(f"invalid noise settings: {e.errors()[0]['msg']}") from None
    manifest = write_dataset(
        Path(out_dir),
        kg,
        count,
        noise,
        seed=settings.train_seed if seed is None else seed,
        background_fraction=background_fraction,
        embedding_dim=settings.embedding_dim,
        image_dim=settings.image_dim,
    )
    echo_json({"manifest": str(manifest), "count": count})


COMMANDS = [ingest, train, infer, evaluate_command, synth]
