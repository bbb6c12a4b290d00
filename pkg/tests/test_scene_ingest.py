"""
Scene Ingest Tests

Detection file parsing, spatial relations and scene graph construction.
"""

import json

import numpy as np
import pytest

from app.errors import ContractViolation, DetectionValidationError, EmptySceneError, ParseError
from app.graphs.types import SpatialRelation
from app.ingest import (
    DetectionRecord,
    EdgeClassifier,
    ImageContext,
    SceneConfig,
    build_scene_graph,
    geometric_features,
    label_embedding,
    parse_detection_file,
    spatial_relation,
)
from tests.helpers import SMALL_SCENE, random_detections, scene_from

DIAG = 800.0


def _file(detections, width=640, height=480, embedding=None):
    return json.dumps(
        {"image": {"width": width, "height": height, "embedding": embedding}, "detections": detections}
    ).encode("utf-8")


def _det(label, bbox, confidence=0.9, embedding=None):
    return {"label": label, "bbox": bbox, "confidence": confidence, "embedding": embedding}


class TestParseDetectionFile:
    """Detection file parsing and validation."""

    def test_fixture(self, stove_sink_bytes):
        context, records = parse_detection_file(stove_sink_bytes)
        assert (context.width, context.height) == (640, 480)
        assert context.embedding is None
        assert [r.label for r in records] == ["stove", "sink"]
        assert records[0].bbox == (10.0, 10.0, 50.0, 50.0)
        assert records[1].confidence == 0.8

    def test_empty_detections(self):
        context, records = parse_detection_file(_file([]))
        assert records == []
        assert context.diagonal == pytest.approx(DIAG)

    def test_labels_are_canonical(self):
        _, records = parse_detection_file(_file([_det("  Stove ", [0, 0, 5, 5])]))
        assert records[0].label == "stove"

    def test_confidence_out_of_range(self):
        with pytest.raises(DetectionValidationError) as exc:
            parse_detection_file(_file([_det("stove", [0, 0, 5, 5], confidence=1.5)]))
        assert exc.value.record_indices == [0]

    def test_reports_every_bad_record(self):
        data = _file([
            _det("stove", [0, 0, 5, 5]),
            _det("sink", [10, 0, 5, 5]),
            _det("fridge", [0, 0, 5, 5], confidence=-0.1),
        ])
        with pytest.raises(DetectionValidationError) as exc:
            parse_detection_file(data)
        assert exc.value.record_indices == [1, 2]

    def test_malformed_json_offset(self):
        data = b'{"image": {"width": 640,, "height": 480}}'
        with pytest.raises(ParseError) as exc:
            parse_detection_file(data)
        assert exc.value.offset == data.index(b",,") + 1
        assert "byte" in str(exc.value)

    def test_schema_error_path(self):
        data = json.dumps({"image": {"width": 640, "height": 480}, "detections": [{"label": "stove"}]})
        with pytest.raises(ParseError) as exc:
            parse_detection_file(data)
        assert exc.value.path.startswith("detections.0")

    def test_unknown_labels_flagged_and_kept(self):
        data = _file([_det("stove", [0, 0, 5, 5]), _det("unicorn", [10, 0, 15, 5])])
        _, records = parse_detection_file(data, known_labels=["stove", "sink"])
        assert [r.known for r in records] == [True, False]

    def test_non_positive_image_size(self):
        with pytest.raises(DetectionValidationError):
            parse_detection_file(_file([], width=0))


class TestSpatialRelation:
    """Geometric predicate between two boxes."""

    def test_contains_and_inside(self):
        outer, inner = (0, 0, 100, 100), (10, 10, 20, 20)
        assert spatial_relation(outer, inner, DIAG) == SpatialRelation.CONTAINS
        assert spatial_relation(inner, outer, DIAG) == SpatialRelation.INSIDE

    def test_left_of(self):
        assert spatial_relation((0, 0, 10, 10), (20, 0, 30, 10), DIAG) == SpatialRelation.LEFT_OF

    def test_above_in_image_coordinates(self):
        assert spatial_relation((0, 0, 10, 10), (0, 20, 10, 30), DIAG) == SpatialRelation.ABOVE

    def test_overlaps(self):
        assert spatial_relation((0, 0, 10, 10), (5, 5, 15, 15), DIAG) == SpatialRelation.OVERLAPS

    def test_far_apart_gives_no_edge(self):
        assert spatial_relation((0, 0, 10, 10), (600, 400, 610, 410), DIAG) is None

    def test_converse_on_random_boxes(self):
        """rel(b, a) is always the converse of rel(a, b)."""
        rng = np.random.default_rng(1)
        for _ in range(1000):
            boxes = []
            for _ in range(2):
                w, h = rng.uniform(1, 300, size=2)
                x0, y0 = rng.uniform(0, 400), rng.uniform(0, 300)
                boxes.append((x0, y0, x0 + w, y0 + h))
            a, b = boxes
            forward, backward = spatial_relation(a, b, DIAG), spatial_relation(b, a, DIAG)
            if forward is None:
                assert backward is None
            else:
                assert backward == forward.converse

    def test_geometric_features(self):
        features = geometric_features((0, 0, 10, 10), (20, 0, 30, 10), DIAG, 640 * 480)
        assert features.shape == (8,)
        assert features[0] == pytest.approx(20 / DIAG)
        assert features[2] == 0.0


class TestBuildSceneGraph:
    """Scene graph construction."""

    def test_stove_and_sink(self, stove_sink_bytes):
        context, records = parse_detection_file(stove_sink_bytes)
        scene = build_scene_graph(context, records, SMALL_SCENE)
        assert [n.name for n in scene.nodes] == ["stove#0", "sink#1"]
        edges = {(e.src, e.dst, e.relation) for e in scene.edges}
        assert edges == {(0, 1, SpatialRelation.LEFT_OF), (1, 0, SpatialRelation.RIGHT_OF)}

    def test_single_detection(self):
        scene = scene_from([("stove", (10, 10, 50, 50))])
        assert len(scene.nodes) == 1
        assert scene.edges == ()

    def test_min_confidence_empties_scene(self, stove_sink_bytes):
        context, records = parse_detection_file(stove_sink_bytes)
        with pytest.raises(EmptySceneError) as exc:
            build_scene_graph(context, records, SceneConfig(embedding_dim=8, image_dim=4, min_confidence=0.95))
        assert "empty scene" in str(exc.value)

    def test_min_confidence_keeps_survivors(self, stove_sink_bytes):
        context, records = parse_detection_file(stove_sink_bytes)
        scene = build_scene_graph(context, records, SceneConfig(embedding_dim=8, image_dim=4, min_confidence=0.85))
        assert scene.labels == ["stove"]

    def test_missing_embedding_uses_label_embedding(self, stove_sink_bytes):
        context, records = parse_detection_file(stove_sink_bytes)
        scene = build_scene_graph(context, records, SMALL_SCENE)
        np.testing.assert_array_equal(scene.nodes[0].embedding, label_embedding("stove", 8))

    def test_embedding_width_checked(self):
        data = _file([_det("stove", [0, 0, 5, 5], embedding=[0.1, 0.2])])
        context, records = parse_detection_file(data)
        with pytest.raises(DetectionValidationError):
            build_scene_graph(context, records, SMALL_SCENE)

    def test_image_embedding_width_checked(self):
        data = _file([_det("stove", [0, 0, 5, 5])], embedding=[0.0] * 3)
        context, records = parse_detection_file(data)
        with pytest.raises(DetectionValidationError):
            build_scene_graph(context, records, SMALL_SCENE)

    def test_deterministic(self, stove_sink_bytes):
        first = build_scene_graph(*parse_detection_file(stove_sink_bytes), SMALL_SCENE)
        second = build_scene_graph(*parse_detection_file(stove_sink_bytes), SMALL_SCENE)
        assert [e for e in first.edges] == [e for e in second.edges]
        for a, b in zip(first.nodes, second.nodes):
            assert np.array_equal(a.embedding, b.embedding)

    def test_every_close_pair_gets_one_edge_each_way(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            scene = scene_from(random_detections(rng, int(rng.integers(2, 8))))
            per_pair = {}
            for e in scene.edges:
                per_pair[(e.src, e.dst)] = per_pair.get((e.src, e.dst), 0) + 1
            for i, a in enumerate(scene.nodes):
                for j, b in enumerate(scene.nodes):
                    if i == j:
                        continue
                    expected = 0 if spatial_relation(a.bbox, b.bbox, DIAG) is None else 1
                    assert per_pair.get((i, j), 0) == expected

    def test_learned_mode_needs_classifier(self, stove_sink_bytes):
        context, records = parse_detection_file(stove_sink_bytes)
        cfg = SceneConfig(embedding_dim=8, image_dim=4, edge_mode="learned")
        with pytest.raises(ContractViolation):
            build_scene_graph(context, records, cfg)

    def test_learned_mode_is_converse_closed(self):
        rng = np.random.default_rng(4)
        classifier = EdgeClassifier.initialize(rng)
        cfg = SceneConfig(embedding_dim=8, image_dim=4, edge_mode="learned")
        for _ in range(10):
            records = [DetectionRecord(label, bbox, 0.9) for label, bbox in random_detections(rng, 5)]
            scene = build_scene_graph(ImageContext(640, 480), records, cfg, classifier)
            stored = {(e.src, e.dst, e.relation) for e in scene.edges}
            assert all((d, s, r.converse) in stored for s, d, r in stored)


def test_label_embedding_is_stable_unit_vector():
    a, b = label_embedding("stove", 16), label_embedding("stove", 16)
    assert np.array_equal(a, b)
    assert np.linalg.norm(a) == pytest.approx(1.0)
    assert not np.array_equal(a, label_embedding("sink", 16))
