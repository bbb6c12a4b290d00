"""
Search Engine Tests

Propagation, importance scoring, expansion, halting, classification and the
full multi-round search.
"""

import json
from dataclasses import replace

import numpy as np
import pytest
from pydantic import ValidationError

from app.core.merge import merge, seed_active
from app.core.orchestrator import run_search, search_pass
from app.core.search import (
    HaltReason,
    SearchConfig,
    SearchModel,
    classify,
    ensure_states,
    expand,
    forced_expand,
    halt_reason,
    initial_states,
    load_checkpoint,
    masked_scores,
    propagate,
    save_checkpoint,
    score_frontier,
    should_halt,
)
from app.errors import CheckpointMismatchError, ContractViolation, ParseError, ShapeError
from app.graphs.types import ActiveSet
from app.knowledge import default_kg
from app.tensor import Matrix
from tests.helpers import (
    ROW_OF_THREE,
    STOVE_SINK,
    TWO_COMPONENTS,
    context,
    merged_from,
    mini_kg,
    random_detections,
    scene_from,
    small_model,
)


def zero_model(model: SearchModel, message_bias=None, gate_bias: float = 0.0) -> SearchModel:
    """Every parameter zero, except an optional message-net output bias and gate bias."""
    zeroed = model.with_parameters([Matrix.zeros(*p.shape) for p in model.parameters()])
    net = zeroed.message_net
    if message_bias is not None:
        params = net.parameters()
        params[-1] = Matrix(np.asarray(message_bias).reshape(1, -1))
        net = net.with_parameters(params)
    return replace(zeroed, message_net=net, gate_bias=Matrix([[gate_bias]]))


def random_states(node_ids, width, seed=0):
    rng = np.random.default_rng(seed)
    return {v: Matrix(rng.normal(size=(1, width))) for v in node_ids}


def reference_propagate(merged, states, active, model):
    """Straight-line numpy version of one propagation step."""
    (w1, b1), (w2, b2) = [(layer.weight.data, layer.bias.data[0]) for layer in model.message_net.layers]
    edge = model.edge_embeddings.data
    gate_w, gate_b = model.gate_weight.data[:, 0], model.gate_bias.item()
    out = {}
    for v in sorted(active.active | active.frontier):
        h_v = states[v].data[0]
        messages = []
        for u, t in merged.incoming[v]:
            if u in active.active:
                x = np.concatenate([states[u].data[0], h_v, edge[t]])
                messages.append(np.maximum(x @ w1 + b1, 0.0) @ w2 + b2)
        if not messages:
            out[v] = h_v
            continue
        agg = np.mean(messages, axis=0)
        g = 1.0 / (1.0 + np.exp(-(np.concatenate([h_v, agg]) @ gate_w + gate_b)))
        out[v] = h_v + g * (np.tanh(agg) - h_v)
    return out


class TestSearchConfig:
    """Threshold and cap validation."""

    def test_defaults(self):
        cfg = SearchConfig()
        assert cfg.gamma == 0.5
        assert cfg.halt_lambda == 0.75
        assert cfg.round_aggregation == "max"

    def test_lambda_zero_allowed(self):
        assert SearchConfig(halt_lambda=0.0).halt_lambda == 0.0

    @pytest.mark.parametrize("field,value", [("gamma", 0.0), ("gamma", 1.0), ("halt_lambda", 1.0), ("t_max", 0)])
    def test_out_of_range(self, field, value):
        with pytest.raises(ValidationError):
            SearchConfig(**{field: value})


class TestPropagate:
    """Gated message passing into active and frontier nodes."""

    def test_isolated_node_keeps_its_state(self, kg, model):
        merged = merged_from([("unicorn", (10, 10, 50, 50))], kg)
        active = ActiveSet.create(merged, {0})
        states = random_states([0], model.hidden_dim)
        updated = propagate(merged, states, active, model)
        assert updated[0] is states[0]

    def test_zero_weights_blend_toward_tanh_bias(self, kg, model):
        h = model.hidden_dim
        bias = np.linspace(-1.0, 1.0, h)
        zeroed = zero_model(model, message_bias=bias, gate_bias=0.3)
        merged = merged_from(STOVE_SINK, kg)
        active = ActiveSet.create(merged, {0, 1})
        states = random_states(range(4), h, seed=3)
        updated = propagate(merged, states, active, zeroed)
        g = 1.0 / (1.0 + np.exp(-0.3))
        for v in range(4):
            expected = states[v].data[0] + g * (np.tanh(bias) - states[v].data[0])
            np.testing.assert_allclose(updated[v].data[0], expected, atol=1e-12)

    def test_matches_reference(self, kg):
        for seed in range(5):
            model = small_model(kg, seed=seed)
            merged = merged_from(ROW_OF_THREE, kg)
            kg_stove = merged.kg_global(kg.label_index["stove"])
            active = ActiveSet.create(merged, {0, kg_stove})
            states = random_states(active.active | active.frontier, model.hidden_dim, seed=seed)
            updated = propagate(merged, states, active, model)
            expected = reference_propagate(merged, states, active, model)
            for v, row in expected.items():
                np.testing.assert_allclose(updated[v].data[0], row, atol=1e-10)

    def test_missing_state(self, kg, model):
        merged = merged_from(STOVE_SINK, kg)
        active = ActiveSet.create(merged, {0})
        with pytest.raises(ContractViolation):
            propagate(merged, random_states([0], model.hidden_dim), active, model)


class TestScoreFrontier:
    """Importance of frontier nodes."""

    def _setup(self, kg, model, active_ids=(0, 1)):
        merged = merged_from(STOVE_SINK, kg)
        active = ActiveSet.create(merged, set(active_ids))
        init = initial_states(merged, model)
        return merged, active, ensure_states({}, init, active.active | active.frontier)

    def test_zero_weights_give_one_half(self, kg, model):
        zeroed = zero_model(model)
        merged, active, states = self._setup(kg, zeroed)
        scores = score_frontier(merged, states, active, None, zeroed, SearchConfig())
        assert set(scores) == {2, 3}
        assert all(s == 0.5 for s in scores.values())

    def test_empty_frontier(self, kg, model):
        merged = merged_from([("unicorn", (10, 10, 50, 50))], kg)
        active = ActiveSet.create(merged, {0})
        states = ensure_states({}, initial_states(merged, model), {0})
        assert score_frontier(merged, states, active, None, model, SearchConfig()) == {}

    def test_scores_in_unit_interval(self, kg, model):
        merged, active, states = self._setup(kg, model)
        scores = score_frontier(merged, states, active, None, model, SearchConfig())
        assert all(0.0 < s < 1.0 for s in scores.values())

    def test_object_level_ignores_image_embedding(self, kg, model):
        merged, active, states = self._setup(kg, model)
        cfg = SearchConfig(image_conditioning=False)
        embedding = np.array([3.0, -2.0, 1.0, 4.0])
        without = score_frontier(merged, states, active, context(), model, cfg)
        with_image = score_frontier(merged, states, active, context(embedding), model, cfg)
        assert without == with_image

    def test_image_level_uses_image_embedding(self, kg, model):
        merged, active, states = self._setup(kg, model)
        object_level = score_frontier(merged, states, active, None, model, SearchConfig())
        cfg = SearchConfig(image_conditioning=True)
        embedding = np.array([3.0, -2.0, 1.0, 4.0])
        differs = []
        for sign in (1.0, -1.0):
            image_level = score_frontier(merged, states, active, context(sign * embedding), model, cfg)
            differs.append(any(abs(image_level[n] - object_level[n]) > 1e-9 for n in object_level))
        assert any(differs)

    def test_image_level_without_embedding_matches_object_level(self, kg, model):
        merged, active, states = self._setup(kg, model)
        object_level = score_frontier(merged, states, active, context(), model, SearchConfig())
        image_level = score_frontier(merged, states, active, context(), model, SearchConfig(image_conditioning=True))
        assert object_level == image_level

    def test_image_width_checked(self, kg, model):
        merged, active, states = self._setup(kg, model)
        with pytest.raises(ShapeError):
            score_frontier(merged, states, active, context([1.0, 2.0]), model, SearchConfig(image_conditioning=True))


class TestExpansion:
    """Strict-threshold expansion and halting."""

    def setup_method(self):
        self.kg = mini_kg()
        self.merged = merged_from(STOVE_SINK, self.kg)
        self.active = ActiveSet.create(self.merged, {0, 1})

    def test_nothing_above_gamma(self):
        step = expand(self.merged, self.active, {2: 0.3, 3: 0.5}, SearchConfig(gamma=0.5))
        assert step.added == frozenset()
        assert step.active.active == self.active.active
        assert step.active.iteration == 1
        assert step.max_importance == -np.inf

    def test_adds_strictly_above_gamma(self):
        step = expand(self.merged, self.active, {2: 0.6, 3: 0.4}, SearchConfig(gamma=0.5))
        assert step.added == frozenset({2})
        assert step.active.active == frozenset({0, 1, 2})
        assert 8 in step.active.frontier
        assert step.max_importance == 0.6

    def test_forced_expansion_follows_targets(self):
        targets = np.zeros(self.merged.num_nodes, dtype=np.int8)
        targets[3] = 1
        targets[8] = 1
        step = forced_expand(self.merged, self.active, {2: 0.9, 3: 0.1}, targets)
        assert step.added == frozenset({3})
        assert step.max_importance == 0.1

    def test_antitone_in_gamma(self):
        """A higher threshold never adds a node a lower one leaves out."""
        rng = np.random.default_rng(0)
        for _ in range(1000):
            scores = {n: float(rng.random()) for n in self.active.frontier}
            low, high = sorted(rng.uniform(0.01, 0.99, size=2))
            small = expand(self.merged, self.active, scores, SearchConfig(gamma=high)).added
            large = expand(self.merged, self.active, scores, SearchConfig(gamma=low)).added
            assert small <= large

    def test_should_halt(self):
        cfg = SearchConfig()
        assert should_halt(frozenset(), -np.inf, 1, cfg)
        assert not should_halt({2}, 0.8, 1, cfg)
        assert should_halt({2}, 0.7, 1, cfg)
        assert should_halt({2}, 0.8, 10, cfg)

    def test_halt_reasons(self):
        cfg = SearchConfig(t_max=3)
        assert halt_reason(frozenset(), -np.inf, 1, cfg) == HaltReason.NOTHING_ADDED
        assert halt_reason({2}, 0.75, 1, cfg) == HaltReason.BELOW_LAMBDA
        assert halt_reason({2}, 0.9, 3, cfg) == HaltReason.T_MAX
        assert halt_reason({2}, 0.6, 1, cfg, use_lambda=False) is None

    def test_lambda_zero_never_halts_on_importance(self):
        cfg = SearchConfig(halt_lambda=0.0)
        assert halt_reason({2}, 0.51, 1, cfg) is None

    def test_without_early_halting_only_t_max_stops(self):
        cfg = SearchConfig(t_max=4, early_halting=False)
        assert halt_reason(frozenset(), -np.inf, 1, cfg) is None
        assert halt_reason({2}, 0.6, 3, cfg) is None
        assert halt_reason(frozenset(), -np.inf, 4, cfg) == HaltReason.T_MAX
        assert not should_halt(frozenset(), -np.inf, 2, cfg)


class TestClassify:
    """Linear head with compound masking."""

    def test_zero_classifier(self, kg, model):
        zeroed = zero_model(model)
        merged = merged_from(STOVE_SINK, kg)
        active = ActiveSet.create(merged, {0, 1, 2, 3})
        states = ensure_states({}, initial_states(merged, zeroed), active.active)
        logits, allowed = classify(merged, states, active, zeroed)
        assert logits.row_major() == [0.0, 0.0, 0.0]
        assert allowed.tolist() == [True, False, False]
        assert masked_scores(logits, allowed).tolist() == [0.0, -np.inf, -np.inf]

    def test_active_compound_is_allowed(self, kg, model):
        merged = merged_from(STOVE_SINK, kg)
        active = ActiveSet.create(merged, {0, 1, 2, 3, 8})
        states = ensure_states({}, initial_states(merged, model), active.active)
        _, allowed = classify(merged, states, active, model)
        assert allowed.tolist() == [True, True, False]

    def test_matches_straight_line_classifier(self, kg):
        """Mean-pooled linear head and compound masking on random graphs, active sets and states."""
        rng = np.random.default_rng(200)
        for trial in range(200):
            model = small_model(kg, seed=trial % 5)
            merged = merge(scene_from(random_detections(rng, int(rng.integers(1, 6)))), kg)
            size = int(rng.integers(1, merged.num_nodes + 1))
            active = ActiveSet.create(merged, rng.choice(merged.num_nodes, size=size, replace=False).tolist())
            states = random_states(active.active, model.hidden_dim, seed=trial)
            logits, allowed = classify(merged, states, active, model)

            pooled = np.mean([states[v].data[0] for v in sorted(active.active)], axis=0)
            expected = pooled @ model.classifier_weight.data + model.classifier_bias.data[0]
            np.testing.assert_allclose(logits.data[0], expected, rtol=0, atol=1e-10)
            compound_active = [merged.kg_global(node.index) in active.active for node in kg.compounds]
            assert allowed.tolist() == [True] + compound_active
            assert masked_scores(logits, allowed).tolist() == [
                float(s) if ok else -np.inf for s, ok in zip(logits.data[0], allowed)
            ]

    def test_empty_active_set(self, kg, model):
        merged = merged_from(STOVE_SINK, kg)
        with pytest.raises(ContractViolation):
            classify(merged, {}, ActiveSet(frozenset()), model)


class TestRunSearch:
    """Full multi-round search."""

    def test_result_shape(self, kg, model):
        result = run_search(merged_from(STOVE_SINK, kg), context(), model, SearchConfig())
        assert result.classes == ("background", "kitchen", "harbor")
        assert result.scores.shape == (3,)
        assert result.prediction in result.classes
        assert {"sink", "stove"} <= set(result.active_concepts)
        assert result.rounds[0].round == 0

    def test_deterministic(self, kg, model):
        merged = merged_from(TWO_COMPONENTS, kg)
        first = run_search(merged, context(), model, SearchConfig(), rng_seed=5)
        second = run_search(merged, context(), model, SearchConfig(), rng_seed=5)
        assert np.array_equal(first.scores, second.scores)
        assert [r.model_dump() for r in first.export_trace()] == [r.model_dump() for r in second.export_trace()]

    def test_t_max_one(self, kg, model):
        result = run_search(merged_from(ROW_OF_THREE, kg), context(), model, SearchConfig(t_max=1))
        assert all(r.num_iterations == 1 for r in result.rounds)

    def test_rounds_run_to_t_max_without_early_halting(self, kg, model):
        merged = merged_from(TWO_COMPONENTS, kg)
        result = run_search(merged, context(), zero_model(model), SearchConfig(t_max=5, early_halting=False))
        assert len(result.rounds) >= 2
        for r in result.rounds:
            assert r.num_iterations == 5
            assert r.halt_reason == HaltReason.T_MAX

    def test_object_level_invariant_to_image_embedding(self, kg, model):
        merged = merged_from(ROW_OF_THREE, kg)
        cfg = SearchConfig(image_conditioning=False)
        a = run_search(merged, context([1.0, 2.0, 3.0, 4.0]), model, cfg)
        b = run_search(merged, context([4.0, 3.0, 2.0, 1.0]), model, cfg)
        assert np.array_equal(a.scores, b.scores)

    def test_image_level_runs(self, kg, model):
        merged = merged_from(ROW_OF_THREE, kg)
        result = run_search(merged, context([1.0, 0.0, -1.0, 0.5]), model, SearchConfig(image_conditioning=True))
        assert result.prediction in result.classes

    def test_two_components_need_two_rounds(self, kg, model):
        merged = merged_from(TWO_COMPONENTS, kg)
        result = run_search(merged, context(), model, SearchConfig())
        assert len(result.rounds) >= 2
        covered = set()
        for r in result.rounds:
            covered |= {i for i in r.final_active if merged.is_sg(i)}
        assert covered == set(range(6))

    def test_response_masks_inactive_compounds(self, kg, model):
        merged = merged_from([("stove", (10, 10, 50, 50))], kg)
        result = run_search(merged, context(), zero_model(model), SearchConfig())
        response = result.to_response(explain=True)
        assert response.scores["harbor"] is None
        assert response.prediction == "background"
        assert response.trace[0].seed == "stove#0"

    def test_trace_reports_drawn_seed(self, kg, model):
        merged = merged_from(TWO_COMPONENTS, kg)
        for rng_seed in range(10):
            result = run_search(merged, context(), model, SearchConfig(), rng_seed=rng_seed)
            assert result.rounds[0].seed == seed_active(merged, [rng_seed, 0]).seed
            assert result.export_trace()[0].seed == merged.describe(result.rounds[0].seed)

    def test_search_invariants_on_random_scenes(self, kg):
        """Growth, termination, coverage and prediction masking over random graphs."""
        rng = np.random.default_rng(77)
        for trial in range(40):
            model = small_model(kg, seed=trial % 4)
            merged = merge(scene_from(random_detections(rng, int(rng.integers(1, 7)))), kg)
            cfg = SearchConfig(gamma=float(rng.uniform(0.05, 0.95)), t_max=int(rng.integers(1, 6)))
            result = run_search(merged, context(), model, cfg, rng_seed=trial)

            covered = set()
            for r in result.rounds:
                assert 1 <= r.num_iterations <= min(cfg.t_max, merged.num_nodes)
                grown = set(r.initial_active)
                for it in r.iterations:
                    assert not set(it.added) & grown
                    assert all(s > cfg.gamma for s in it.importance)
                    grown |= set(it.added)
                assert grown == set(r.final_active)
                if r.halt_reason == HaltReason.NOTHING_ADDED:
                    assert r.iterations[-1].added == ()
                covered |= {i for i in r.final_active if merged.is_sg(i)}
            assert covered == set(range(merged.num_sg))
            assert len(result.rounds) <= merged.num_sg

            if result.prediction != "background":
                node = merged.kg_global(kg.label_index[result.prediction])
                assert any(node in r.final_active for r in result.rounds)

    def test_first_round_antitone_in_gamma(self, kg):
        rng = np.random.default_rng(13)
        for trial in range(30):
            model = small_model(kg, seed=trial % 3)
            merged = merge(scene_from(random_detections(rng, int(rng.integers(2, 7)))), kg)
            low, high = sorted(rng.uniform(0.05, 0.95, size=2))
            strict = run_search(merged, None, model, SearchConfig(gamma=high, t_max=1), rng_seed=trial)
            loose = run_search(merged, None, model, SearchConfig(gamma=low, t_max=1), rng_seed=trial)
            assert set(strict.rounds[0].final_active) <= set(loose.rounds[0].final_active)

    def test_forced_pass_ignores_lambda(self, kg, model):
        merged = merged_from(STOVE_SINK, kg)
        targets = np.zeros(merged.num_nodes, dtype=np.int8)
        targets[[0, 1, 2, 3, 8]] = 1
        outcome = search_pass(merged, None, model, SearchConfig(), forced_targets=targets)
        final = set(outcome.rounds[0].final_active)
        assert final == {0, 1, 2, 3, 8}
        assert outcome.rounds[0].halt_reason == HaltReason.NOTHING_ADDED
        assert outcome.allowed.tolist() == [True, True, False]


class TestCheckpoint:
    """Model persistence."""

    def test_round_trip(self, kg, model):
        data = save_checkpoint(model, {"note": "unit"})
        loaded, config = load_checkpoint(data, kg)
        assert config == {"note": "unit"}
        for (name, a), (other, b) in zip(model.named_parameters().items(), loaded.named_parameters().items()):
            assert name == other
            assert np.array_equal(a.data, b.data)

    def test_loaded_model_searches_identically(self, kg, model):
        loaded, _ = load_checkpoint(save_checkpoint(model), kg)
        merged = merged_from(ROW_OF_THREE, kg)
        assert np.array_equal(run_search(merged, None, model).scores, run_search(merged, None, loaded).scores)

    def test_other_kg_rejected(self, model):
        with pytest.raises(CheckpointMismatchError) as exc:
            load_checkpoint(save_checkpoint(model), default_kg())
        assert "checkpoint/KG mismatch" in str(exc.value)

    def test_embedding_dim_checked(self, kg, model):
        with pytest.raises(CheckpointMismatchError):
            load_checkpoint(save_checkpoint(model), kg, embedding_dim=32)

    def test_bad_version(self, kg, model):
        raw = json.loads(save_checkpoint(model))
        raw["version"] = "model/0"
        with pytest.raises(ParseError):
            load_checkpoint(json.dumps(raw), kg)

    def test_wrong_parameter_shape(self, kg, model):
        raw = json.loads(save_checkpoint(model))
        raw["parameters"]["gate_bias"] = {"rows": 1, "cols": 2, "data": [0.0, 0.0]}
        with pytest.raises(CheckpointMismatchError):
            load_checkpoint(json.dumps(raw), kg)

    def test_named_parameter_layout(self, model):
        names = list(model.named_parameters())
        assert names[:3] == ["sg_projection", "kg_embeddings", "edge_embeddings"]
        assert "message_net.1.bias" in names
        assert names[-2:] == ["classifier_weight", "classifier_bias"]
        with pytest.raises(ShapeError):
            model.with_parameters(model.parameters()[:-1])
