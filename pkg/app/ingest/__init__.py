"""
Scene ingest: detection files in, scene graphs out.

Usage:
    from app.ingest import parse_detection_file, build_scene_graph

    context, records = parse_detection_file(path.read_bytes())
    scene = build_scene_graph(context, records)
"""

from app.ingest.detections import DetectionRecord, ImageContext, parse_detection_file
from app.ingest.scene_builder import SceneConfig, build_scene_graph, get_default_scene_config, label_embedding
from app.ingest.spatial import EdgeClassifier, geometric_features, spatial_relation

__all__ = [
    "DetectionRecord",
    "ImageContext",
    "parse_detection_file",
    "SceneConfig",
    "build_scene_graph",
    "get_default_scene_config",
    "label_embedding",
    "EdgeClassifier",
    "geometric_features",
    "spatial_relation",
]
