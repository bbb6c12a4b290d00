"""
Merge Engine Tests

Merged graph construction, seeding and re-seeding.
"""

import numpy as np
import pytest

from app.core.merge import merge, reseed_plan, seed_active
from app.errors import ContractViolation
from tests.helpers import STOVE_SINK, TWO_COMPONENTS, merged_from, random_detections, scene_from


class TestMerge:
    """SG and KG joined under one id space."""

    def test_stove_sink(self, kg):
        merged = merged_from(STOVE_SINK, kg)
        assert merged.num_nodes == 10
        assert merged.link_edges == ((0, kg.label_index["stove"]), (1, kg.label_index["sink"]))

    def test_global_ids(self, kg):
        merged = merged_from(STOVE_SINK, kg)
        assert merged.kg_global(0) == 2
        assert merged.describe(0) == "stove#0"
        assert merged.describe(merged.kg_global(kg.label_index["kitchen"])) == "kg:kitchen"
        assert merged.compound_ids == (8, 9)

    def test_unknown_label_stays_unlinked(self, kg):
        merged = merged_from([("unicorn", (10, 10, 50, 50))], kg)
        assert merged.num_nodes == 9
        assert merged.link_edges == ()
        assert merged.label_of(0) == "unicorn"

    def test_incoming_messages_cover_links(self, kg):
        merged = merged_from(STOVE_SINK, kg)
        kg_stove = merged.kg_global(kg.label_index["stove"])
        sources = {u for u, _ in merged.incoming[kg_stove]}
        assert sources == {0, merged.kg_global(kg.label_index["kitchen"])}


class TestSeeding:
    """Random seeds and coverage-driven re-seeding."""

    def test_single_node(self, kg):
        merged = merged_from([("stove", (10, 10, 50, 50))], kg)
        active = seed_active(merged, 0)
        assert active.active == frozenset({0, 1})
        assert active.iteration == 0

    def test_neighbors_and_links_join(self, kg):
        """Either seed of the stove/sink pair pulls in the other and both KG primitives."""
        merged = merged_from(STOVE_SINK, kg)
        for seed in range(5):
            assert seed_active(merged, seed).active == frozenset({0, 1, 2, 3})

    def test_fully_covered(self, kg):
        merged = merged_from(STOVE_SINK, kg)
        assert seed_active(merged, 0, exclude={0, 1}) is None
        assert reseed_plan(merged, {0, 1}, 0) is None

    def test_reseed_skips_covered(self, kg):
        merged = merged_from(TWO_COMPONENTS, kg)
        for seed in range(10):
            active = reseed_plan(merged, {0, 1, 2}, seed)
            assert active.seed in {3, 4, 5}

    def test_reseed_rejects_kg_ids(self, kg):
        merged = merged_from(STOVE_SINK, kg)
        with pytest.raises(ContractViolation):
            reseed_plan(merged, {merged.kg_global(0)}, 0)

    def test_same_seed_same_start(self, kg):
        merged = merged_from(TWO_COMPONENTS, kg)
        assert seed_active(merged, [3, 1]).active == seed_active(merged, [3, 1]).active

    def test_seeds_reach_every_node(self, kg):
        merged = merged_from(TWO_COMPONENTS, kg)
        picks = {seed_active(merged, s).seed for s in range(200)}
        assert picks == set(range(6))

    def test_seed_is_the_drawn_node(self, kg):
        merged = merged_from(TWO_COMPONENTS, kg)
        for s in range(20):
            active = seed_active(merged, s)
            assert active.seed == int(np.random.default_rng(s).integers(merged.num_sg))
            assert active.seed in active.active
            assert active.grow(merged, active.frontier).seed == active.seed

    def test_two_components_take_two_rounds(self, kg):
        """When each round covers its component, coverage ends after two rounds."""
        merged = merged_from(TWO_COMPONENTS, kg)
        covered = set()
        rounds = 0
        while True:
            active = reseed_plan(merged, covered, [0, rounds])
            if active is None:
                break
            covered |= {i for i in active.active if merged.is_sg(i)}
            rounds += 1
        assert rounds == 2
        assert covered == set(range(6))

    def test_coverage_on_random_scenes(self, kg):
        rng = np.random.default_rng(31)
        for trial in range(30):
            merged = merge(scene_from(random_detections(rng, int(rng.integers(1, 9)))), kg)
            covered = set()
            rounds = 0
            while True:
                active = reseed_plan(merged, covered, [trial, rounds])
                if active is None:
                    break
                assert any(merged.is_sg(i) and i not in covered for i in active.active)
                covered |= {i for i in active.active if merged.is_sg(i)}
                rounds += 1
            assert covered == set(range(merged.num_sg))
            assert 1 <= rounds <= merged.num_sg
