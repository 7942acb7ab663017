"""Enumeration of the maximal achievable waypoint subsets.

Achievability of a subset means some policy's every successful route
visits all of its members. It is downward closed, so the family of
achievable subsets is fully described by its maximal elements. The
search runs an include/exclude depth-first enumeration with caching,
superset pruning through known-unachievable subsets, and a cheap
necessary pretest: a subset can only be achievable if a single walk
from the start through all of its members to a goal exists in the
support graph. For deterministic robot models that pretest is exact,
which lets whole instances resolve without building any product MDP.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .mdp import (
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_TOLERANCE,
    GoalMdp,
    ModelError,
    Policy,
    evaluate_policy,
    goal_reachable,
)
from .subgoals import MAX_SUBGOALS, _plan_on_product, build_subgoal_mdp

_UNREACHED = -1
_INF_STEPS = 1 << 30


def _bfs_distances(mdp: GoalMdp, origin: int) -> np.ndarray:
    dist = np.full(mdp.n_states, _UNREACHED, dtype=np.int64)
    dist[origin] = 0
    frontier = deque([origin])
    succs = mdp.successor_sets()
    while frontier:
        s = frontier.popleft()
        for t in succs[s]:
            if dist[t] < 0:
                dist[t] = dist[s] + 1
                frontier.append(t)
    return dist


class AchievabilityChecker:
    """Memoized achievability decisions for subsets of a candidate pool.

    Decision procedure per subset: known-unachievable-subset shortcut,
    then the covering-walk pretest, then (for stochastic models) a
    product-MDP plan plus verification. Deterministic models stop at the
    pretest, which is exact for them: a covering walk can be followed
    verbatim by a bitmask-product policy, and any achieving policy's
    successful trace is a covering walk.
    """

    def __init__(
        self,
        robot_mdp: GoalMdp,
        candidates: Iterable[int],
        tolerance: float = DEFAULT_TOLERANCE,
        max_iterations: int = DEFAULT_MAX_ITERATIONS,
    ):
        self.mdp = robot_mdp
        self.candidates = tuple(sorted(set(int(b) for b in candidates)))
        if len(self.candidates) > MAX_SUBGOALS:
            raise ModelError(
                f"at most {MAX_SUBGOALS} candidates supported, got {len(self.candidates)}"
            )
        self._bit = {b: 1 << i for i, b in enumerate(self.candidates)}
        self.tolerance = tolerance
        self.max_iterations = max_iterations
        self.deterministic = robot_mdp.is_deterministic()
        self.pretest_calls = 0
        self.product_solves = 0
        self._decisions: dict[frozenset[int], bool] = {}
        self._values: dict[frozenset[int], float] = {}
        self._unachievable: list[frozenset[int]] = []
        self._dist: Optional[dict] = None
        self._feasible_table: Optional[np.ndarray] = None
        self._cover_steps: Optional[np.ndarray] = None

    # -- reachability tables -------------------------------------------

    def _mask_of(self, subset: frozenset[int]) -> int:
        mask = 0
        for b in subset:
            bit = self._bit.get(b)
            if bit is None:
                raise ValueError(f"state {b} is not one of the candidates")
            mask |= bit
        return mask

    def _distances(self) -> dict:
        if self._dist is None:
            mdp = self.mdp
            goals = sorted(mdp.goal_states)
            from_start = _bfs_distances(mdp, mdp.initial_state)
            from_cand = {b: _bfs_distances(mdp, b) for b in self.candidates}
            k = len(self.candidates)
            to_cand = np.array(
                [from_start[b] for b in self.candidates], dtype=np.int64
            ).reshape(k)
            between = np.zeros((k, k), dtype=np.int64)
            to_goal = np.zeros(k, dtype=np.int64)
            for i, b in enumerate(self.candidates):
                d = from_cand[b]
                for j, c in enumerate(self.candidates):
                    between[i, j] = d[c]
                goal_d = [d[g] for g in goals if d[g] >= 0]
                to_goal[i] = min(goal_d) if goal_d else _UNREACHED
            start_goal = [from_start[g] for g in goals if from_start[g] >= 0]
            self._dist = {
                "start_to_cand": to_cand,
                "between": between,
                "cand_to_goal": to_goal,
                "start_to_goal": min(start_goal) if start_goal else _UNREACHED,
            }
        return self._dist

    def _cover_tables(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-mask covering-walk feasibility and minimal walk length.

        ``steps[mask]`` is the fewest transitions of any walk from the
        start to a goal that visits every candidate in ``mask`` (masks
        without such a walk hold a large sentinel).
        """
        if self._feasible_table is not None:
            return self._feasible_table, self._cover_steps
        d = self._distances()
        k = len(self.candidates)
        n_masks = 1 << k
        start_to_cand = np.where(d["start_to_cand"] >= 0, d["start_to_cand"], _INF_STEPS)
        between = np.where(d["between"] >= 0, d["between"], _INF_STEPS)
        cand_to_goal = np.where(d["cand_to_goal"] >= 0, d["cand_to_goal"], _INF_STEPS)
        best = np.full((n_masks, k) if k else (1, 1), _INF_STEPS, dtype=np.int64)
        if k:
            masks = np.arange(n_masks, dtype=np.int64)
            popcnt = np.bitwise_count(masks.astype(np.uint64)).astype(np.int64)
            for j in range(k):
                best[1 << j, j] = start_to_cand[j]
            for level in range(2, k + 1):
                level_masks = masks[popcnt == level]
                if not len(level_masks):
                    continue
                for j in range(k):
                    bit = 1 << j
                    sel = level_masks[(level_masks & bit) != 0]
                    if not len(sel):
                        continue
                    prev = best[sel ^ bit]  # rows restricted to mask\{j} by INF fill
                    best[sel, j] = np.min(
                        np.minimum(prev + between[:, j][None, :], _INF_STEPS), axis=1
                    )
            steps = np.min(np.minimum(best + cand_to_goal[None, :], _INF_STEPS), axis=1)
        else:
            steps = np.full(1, _INF_STEPS, dtype=np.int64)
        start_goal = d["start_to_goal"]
        steps[0] = start_goal if start_goal >= 0 else _INF_STEPS
        self._feasible_table = steps < _INF_STEPS
        self._cover_steps = steps
        return self._feasible_table, self._cover_steps

    # -- decisions ------------------------------------------------------

    def path_pretest(self, subset: Iterable[int]) -> bool:
        """Does some start-to-goal walk in the support graph visit every
        member of ``subset``? (Necessary for achievability; exact for
        deterministic models.)"""
        subset = frozenset(subset)
        self.pretest_calls += 1
        feasible, _steps = self._cover_tables()
        return bool(feasible[self._mask_of(subset)])

    def check(self, subset: Iterable[int]) -> bool:
        """Memoized achievability decision for ``subset``."""
        subset = frozenset(subset)
        hit = self._decisions.get(subset)
        if hit is not None:
            return hit
        result = self._decide(subset)
        self._decisions[subset] = result
        if not result:
            self._unachievable.append(subset)
        return result

    def _decide(self, subset: frozenset[int]) -> bool:
        for known in self._unachievable:
            if known <= subset:  # supersets of unachievable sets stay unachievable
                return False
        if not self.path_pretest(subset):
            return False
        if self.deterministic:
            return True
        return self.plan(subset) is not None

    def plan(self, subset: Iterable[int]) -> Optional[Policy]:
        """Certified product policy for ``subset`` (not memoized; the
        product is rebuilt on each call)."""
        product = build_subgoal_mdp(self.mdp, frozenset(subset))
        self.product_solves += 1
        return _plan_on_product(
            product, tolerance=self.tolerance, max_iterations=self.max_iterations
        )

    def start_value(self, subset: Iterable[int]) -> float:
        """Start value of the optimal certified product policy, with the
        model's reward overlay applied.

        Only defined for achievable subsets. Deterministic overlay-free
        models shortcut to ``gamma ** (L - 1)`` for the minimal covering
        walk length ``L``, which equals the product optimum exactly.
        """
        subset = frozenset(subset)
        cached = self._values.get(subset)
        if cached is not None:
            return cached
        if not self.check(subset):
            raise ValueError(f"subset {sorted(subset)} is not achievable")
        if self.mdp.initial_state in self.mdp.goal_states:
            value = 0.0
        elif self.deterministic and not self.mdp.reward_overlay:
            _feasible, steps = self._cover_tables()
            value = self.mdp.gamma ** (int(steps[self._mask_of(subset)]) - 1)
        else:
            product = build_subgoal_mdp(self.mdp, subset)
            self.product_solves += 1
            policy = _plan_on_product(
                product, tolerance=self.tolerance, max_iterations=self.max_iterations
            )
            if policy is None:
                raise ValueError(f"subset {sorted(subset)} has no certified policy")
            values = evaluate_policy(product.base, policy, tolerance=self.tolerance)
            value = float(values[product.start])
        self._values[subset] = value
        return value

    @property
    def achievability_cache(self) -> dict[frozenset[int], tuple[bool, Optional[float]]]:
        return {
            subset: (ok, self._values.get(subset))
            for subset, ok in self._decisions.items()
        }


@dataclass
class AchievableFamily:
    """Maximal achievable subsets of the candidate pool, with the
    decision cache and the separated-out unachievable singletons."""

    candidates: tuple[int, ...]
    maximal_sets: tuple[frozenset[int], ...]
    unachievable_singletons: frozenset[int]
    feasible: bool
    checker: AchievabilityChecker = field(repr=False)

    @property
    def achievable_candidates(self) -> tuple[int, ...]:
        return tuple(b for b in self.candidates if b not in self.unachievable_singletons)

    @property
    def achievability_cache(self):
        return self.checker.achievability_cache

    def is_achievable(self, subset: Iterable[int]) -> bool:
        return self.checker.check(subset)

    def covered_by_maximal(self, subset: Iterable[int]) -> bool:
        subset = frozenset(subset)
        return any(subset <= m for m in self.maximal_sets)

    def start_value(self, subset: Iterable[int]) -> float:
        return self.checker.start_value(subset)

    def plan(self, subset: Iterable[int]) -> Optional[Policy]:
        return self.checker.plan(subset)


def find_maximal_achievable_subsets(
    robot_mdp: GoalMdp,
    candidates: Iterable[int],
    checker: Optional[AchievabilityChecker] = None,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> AchievableFamily:
    """Depth-first include/exclude enumeration of the maximal achievable
    subsets.

    Unachievable singletons are separated first (no superset of one can
    be achievable); the DFS then extends only achievable prefixes, and
    each leaf is confirmed maximal against every remaining element. The
    result is an antichain that covers every achievable subset.
    """
    cands = tuple(sorted(set(int(b) for b in candidates)))
    if checker is None:
        checker = AchievabilityChecker(
            robot_mdp, cands, tolerance=tolerance, max_iterations=max_iterations
        )
    elif tuple(checker.candidates) != cands:
        raise ValueError("checker was built for a different candidate pool")
    if not goal_reachable(robot_mdp):
        return AchievableFamily(
            candidates=cands,
            maximal_sets=(),
            unachievable_singletons=frozenset(cands),
            feasible=False,
            checker=checker,
        )
    b_empty = frozenset(b for b in cands if not checker.check(frozenset({b})))
    live = [b for b in cands if b not in b_empty]
    found: list[frozenset[int]] = []

    def dfs(index: int, current: frozenset[int]) -> None:
        if index == len(live):
            if all(
                not checker.check(current | {e}) for e in live if e not in current
            ):
                found.append(current)
            return
        extended = current | {live[index]}
        if checker.check(extended):
            dfs(index + 1, extended)
        dfs(index + 1, current)

    dfs(0, frozenset())
    unique = sorted(set(found), key=lambda s: tuple(sorted(s)))
    maximal = tuple(s for s in unique if not any(s < t for t in unique))
    return AchievableFamily(
        candidates=cands,
        maximal_sets=maximal,
        unachievable_singletons=b_empty,
        feasible=True,
        checker=checker,
    )
