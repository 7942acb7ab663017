"""Maximal achievable subset enumeration tests."""

import itertools

import pytest

from subgoal_align.envs import GridSpec, make_maze
from subgoal_align.mdp import GoalMdp, ModelError
from subgoal_align.subgoals import plan_for_subgoals
from subgoal_align.subsets import (
    AchievabilityChecker,
    find_maximal_achievable_subsets,
)

from _oracles import covering_walk_exists, simple_path_covers
from conftest import (
    chain_mdp,
    diamond_mdp,
    diamond_with_merge_mdp,
    star_revisit_mdp,
)


def brute_force_maximal(mdp, candidates):
    """Per-subset direct decisions (product plan + verification, no
    pretest, no cache, no pruning), then the maximal elements."""
    achievable = [
        frozenset(subset)
        for r in range(len(candidates) + 1)
        for subset in itertools.combinations(sorted(candidates), r)
        if plan_for_subgoals(mdp, subset) is not None
    ]
    return {
        s for s in achievable if not any(s < t for t in achievable)
    }


class TestPathPretest:
    def test_corridor_subset(self, chain):
        checker = AchievabilityChecker(chain, [1])
        assert checker.path_pretest({1}) is True

    def test_parallel_branches_fail(self, diamond):
        checker = AchievabilityChecker(diamond, [1, 2])
        assert checker.path_pretest({1, 2}) is False
        assert checker.path_pretest({1}) is True

    def test_matches_walk_oracle_on_maze_triples(self):
        m = make_maze(GridSpec(width=4, height=4, obstacle_density=0.2, seed=77))
        candidates = [s for s in (1, 2, 5, 6, 9) if s not in m.goal_states]
        checker = AchievabilityChecker(m, candidates)
        for triple in itertools.combinations(candidates, 3):
            assert checker.path_pretest(triple) == covering_walk_exists(m, triple)

    def test_agrees_with_simple_path_enumeration_on_grid(self):
        # on this instance walk coverage and simple-path coverage coincide
        m = make_maze(GridSpec(width=4, height=4, obstacle_density=0.2, seed=77))
        checker = AchievabilityChecker(m, [1, 2, 6])
        for r in range(4):
            for subset in itertools.combinations([1, 2, 6], r):
                assert checker.path_pretest(subset) == simple_path_covers(m, subset)

    def test_walks_beat_simple_paths_when_revisits_needed(self):
        # dead-end arms: a covering walk exists (and the subset is in
        # fact achievable) although no simple path visits both
        m = star_revisit_mdp()
        checker = AchievabilityChecker(m, [1, 2])
        assert checker.path_pretest({1, 2}) is True
        assert not simple_path_covers(m, {1, 2})
        assert plan_for_subgoals(m, {1, 2}) is not None

    def test_rejects_foreign_states(self, chain):
        checker = AchievabilityChecker(chain, [1])
        with pytest.raises(ValueError):
            checker.path_pretest({0})


class TestCheckAchievability:
    def test_empty_set_with_reachable_goal(self, chain):
        checker = AchievabilityChecker(chain, [])
        assert checker.check(frozenset()) is True

    def test_superset_of_unachievable_skips_solver(self, diamond):
        checker = AchievabilityChecker(diamond, [1, 2])
        assert checker.check(frozenset({1, 2})) is False
        before = checker.pretest_calls
        # a (hypothetical) superset resolves from the cached refutation
        assert checker.check(frozenset({1, 2})) is False
        assert checker.pretest_calls == before
        assert checker.product_solves == 0  # deterministic fast path throughout

    def test_diamond_with_merge_cases(self, diamond_with_merge):
        checker = AchievabilityChecker(diamond_with_merge, [1, 2, 3])
        assert checker.check(frozenset({1, 3})) is True
        assert checker.check(frozenset({1, 2})) is False

    def test_stochastic_model_uses_product_solver(self):
        m = make_maze(GridSpec(width=3, height=3, seed=5, slip_probability=0.1))
        checker = AchievabilityChecker(m, [1, 3])
        assert checker.check(frozenset({1})) in (True, False)
        assert checker.product_solves >= 1

    def test_candidate_cap_enforced(self, chain):
        with pytest.raises(ModelError):
            AchievabilityChecker(chain_mdp(length=20), list(range(1, 18)))


class TestFindMaximalAchievableSubsets:
    def test_no_candidates_gives_empty_set_family(self, chain):
        family = find_maximal_achievable_subsets(chain, [])
        assert family.maximal_sets == (frozenset(),)
        assert family.feasible

    def test_single_achievable_singleton(self, chain):
        family = find_maximal_achievable_subsets(chain, [1])
        assert family.maximal_sets == (frozenset({1}),)
        assert family.unachievable_singletons == frozenset()

    def test_diamond_with_merge_family(self, diamond_with_merge):
        family = find_maximal_achievable_subsets(diamond_with_merge, [1, 2, 3])
        assert set(family.maximal_sets) == {frozenset({1, 3}), frozenset({2, 3})}
        assert family.unachievable_singletons == frozenset()
        assert set(family.maximal_sets) == brute_force_maximal(diamond_with_merge, [1, 2, 3])

    def test_infeasible_robot_flagged(self):
        blocked = GoalMdp(
            3, 1, {(0, 0): [(0, 1.0)], (1, 0): [(2, 1.0)], (2, 0): [(2, 1.0)]}, 0, [2]
        )
        family = find_maximal_achievable_subsets(blocked, [1])
        assert not family.feasible
        assert family.maximal_sets == ()
        assert family.unachievable_singletons == frozenset({1})

    def test_matches_brute_force_on_seeded_instances(self):
        hits = 0
        for seed in range(12):
            m = make_maze(GridSpec(width=4, height=4, obstacle_density=0.25, seed=seed))
            candidates = [s for s in (1, 4, 6, 9, 11) if s not in m.goal_states][:5]
            family = find_maximal_achievable_subsets(m, candidates)
            assert set(family.maximal_sets) == brute_force_maximal(m, candidates)
            hits += len(family.maximal_sets)
        assert hits > 0

    def test_antichain_and_coverage_properties(self):
        for seed in (3, 9, 21):
            m = make_maze(GridSpec(width=4, height=4, obstacle_density=0.2, seed=seed))
            candidates = [s for s in (1, 2, 6, 9) if s not in m.goal_states]
            family = find_maximal_achievable_subsets(m, candidates)
            for a in family.maximal_sets:
                assert family.is_achievable(a)
                for b in family.maximal_sets:
                    assert not (a < b)
            # every achievable subset is covered by some maximal set
            for r in range(len(candidates) + 1):
                for subset in itertools.combinations(candidates, r):
                    subset = frozenset(subset)
                    if family.is_achievable(subset):
                        assert family.covered_by_maximal(subset)
                    else:
                        assert not family.covered_by_maximal(subset)

    def test_unachievable_singletons_disjoint_from_maximal(self, diamond):
        family = find_maximal_achievable_subsets(diamond, [1, 2])
        for m in family.maximal_sets:
            assert not (m & family.unachievable_singletons)

    def test_cache_records_decisions_and_values(self, diamond_with_merge):
        family = find_maximal_achievable_subsets(diamond_with_merge, [1, 2, 3])
        value = family.start_value(frozenset({1, 3}))
        cache = family.achievability_cache
        assert cache[frozenset({1, 3})] == (True, value)
        assert cache[frozenset({1, 2})][0] is False

    def test_start_value_fast_path_matches_product_solve(self):
        from subgoal_align.mdp import evaluate_policy
        from subgoal_align.subgoals import build_subgoal_mdp

        for seed in (2, 7, 11):
            m = make_maze(GridSpec(width=4, height=4, obstacle_density=0.2, seed=seed))
            candidates = [s for s in (1, 2, 6) if s not in m.goal_states]
            family = find_maximal_achievable_subsets(m, candidates)
            for subset in family.maximal_sets:
                fast = family.start_value(subset)
                product = build_subgoal_mdp(m, subset)
                policy = plan_for_subgoals(m, subset)
                slow = evaluate_policy(product.base, policy, tolerance=1e-12)[
                    product.start
                ]
                assert fast == pytest.approx(slow, abs=1e-9)

    def test_start_value_with_overlay_reflects_penalties(self):
        base = make_maze(GridSpec(width=3, height=3, seed=4))
        clean = find_maximal_achievable_subsets(base, [1])
        penalized = find_maximal_achievable_subsets(
            base.replace(reward_overlay={1: -0.2}), [1]
        )
        assert penalized.start_value({1}) < clean.start_value({1})
