"""Waypoint (bottleneck) analysis.

A state is a bottleneck of a model when every nonzero-probability
goal-reaching trajectory from the initial state visits it. Two
equivalent tests are provided: a graph test (delete the state, check
whether the goal is still reachable) and a reward-shaping test on the
determinized model (penalize the state heavily, reward the goal a
little, and look at the sign of the optimal start value). The graph
test is the production path; the reward test is kept and cross-checked.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .determinize import DeterminizedMdp, determinize, determinize_model_set
from .mdp import (
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_TOLERANCE,
    GoalMdp,
    goal_reachable,
    value_iteration,
)

DEFAULT_PENALTY = -1e6
DEFAULT_GOAL_REWARD = 1.0
POSITIVE_VALUE_MARGIN = 1e-9


class InfeasibleModelError(ValueError):
    """Raised when a test needs a goal-reaching path that does not exist."""


def _as_mdp(model: Union[GoalMdp, DeterminizedMdp]) -> GoalMdp:
    return model.base if isinstance(model, DeterminizedMdp) else model


def _trivial_states(mdp: GoalMdp) -> frozenset[int]:
    return frozenset({mdp.initial_state}) | mdp.goal_states


def is_bottleneck_graph_oracle(model: Union[GoalMdp, DeterminizedMdp], target: int) -> bool:
    """True iff deleting ``target`` disconnects the initial state from
    every goal in the support graph.

    Accepts either a determinized model or a raw one (the support graphs
    coincide, so the answer is the same).
    """
    mdp = _as_mdp(model)
    if target in _trivial_states(mdp):
        raise ValueError(f"state {target} is trivially on every route")
    succs = mdp.successor_sets()
    seen = {mdp.initial_state}
    frontier = deque([mdp.initial_state])
    while frontier:
        s = frontier.popleft()
        if s in mdp.goal_states:
            return False
        for t in succs[s]:
            if t != target and t not in seen:
                seen.add(t)
                frontier.append(t)
    return True


def is_bottleneck_avoid_test(
    dmdp: DeterminizedMdp,
    target: int,
    penalty: float = DEFAULT_PENALTY,
    reward: float = DEFAULT_GOAL_REWARD,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> bool:
    """Reward-shaping bottleneck test on a determinized model.

    Solves the model with entry rewards ``penalty`` at the target and
    ``reward`` at goals (everything else zero, overlay ignored). A route
    that skips the target yields a positive start value, so the target
    is a bottleneck iff the optimal start value is not positive.
    """
    if not penalty < 0 < reward:
        raise ValueError("need penalty < 0 < reward")
    if abs(penalty) < 1e3 * reward:
        raise ValueError("penalty magnitude must dominate the goal reward")
    mdp = dmdp.base
    if target in _trivial_states(mdp):
        raise ValueError(f"state {target} is trivially on every route")
    if not goal_reachable(mdp):
        raise InfeasibleModelError("no goal-reaching path from the initial state")
    entry = np.zeros(mdp.n_states, dtype=np.float64)
    entry[target] = penalty
    for g in mdp.goal_states:
        entry[g] = reward
    policy = value_iteration(
        mdp, tolerance=tolerance, max_iterations=max_iterations, entry_rewards=entry
    )
    return bool(policy.values[mdp.initial_state] <= POSITIVE_VALUE_MARGIN)


@dataclass(frozen=True)
class BottleneckResult:
    """Bottleneck states of one model; ``feasible`` is False when the
    goal is unreachable (such a model contributes no usable evidence)."""

    states: frozenset[int]
    feasible: bool

    def candidates(self, mdp: GoalMdp) -> frozenset[int]:
        return self.states - _trivial_states(mdp)


def find_bottlenecks(model: GoalMdp, method: str = "graph") -> BottleneckResult:
    """All bottleneck states of a model: the tested nontrivial ones plus
    the initial state and the reachable goals.

    Runs on the determinized model (the answer is invariant under
    determinization). ``method`` picks the per-state test: ``graph``
    (default) or ``avoid``.
    """
    dmdp = determinize(model)
    return find_bottlenecks_determinized(dmdp, method=method)


def find_bottlenecks_determinized(
    dmdp: DeterminizedMdp, method: str = "graph"
) -> BottleneckResult:
    if method not in ("graph", "avoid"):
        raise ValueError(f"unknown method {method!r}")
    mdp = dmdp.base
    if not goal_reachable(mdp):
        return BottleneckResult(states=frozenset(), feasible=False)
    from .mdp import reachable_states

    reachable = reachable_states(mdp)
    found = {mdp.initial_state} | (mdp.goal_states & reachable)
    trivial = _trivial_states(mdp)
    for s in sorted(reachable - trivial):
        if method == "graph":
            hit = is_bottleneck_graph_oracle(dmdp, s)
        else:
            hit = is_bottleneck_avoid_test(dmdp, s)
        if hit:
            found.add(s)
    return BottleneckResult(states=frozenset(found), feasible=True)


@dataclass(frozen=True)
class BottleneckHypothesis:
    """Bottlenecks per candidate human model and their union.

    ``candidates`` strips the initial state and the goals from the
    union: those are visited by every successful route by definition,
    so asking about them is wasted cost. ``infeasible_models`` lists
    input indices whose goal was unreachable.
    """

    per_model: dict[int, frozenset[int]]
    union_set: frozenset[int]
    candidates: frozenset[int]
    infeasible_models: tuple[int, ...]


def build_hypothesis_set(human_models: Sequence[GoalMdp]) -> BottleneckHypothesis:
    """Union the bottlenecks of every candidate human model.

    Models are determinized and structurally deduplicated first, so each
    distinct support graph is analyzed once.
    """
    if not human_models:
        raise ValueError("need at least one human model")
    unique = determinize_model_set(human_models)
    by_edges: dict[frozenset, BottleneckResult] = {}
    for dm in unique:
        by_edges[dm.base.support_edges()] = find_bottlenecks_determinized(dm)
    per_model: dict[int, frozenset[int]] = {}
    infeasible = []
    for i, model in enumerate(human_models):
        result = by_edges[model.support_edges()]
        per_model[i] = result.states if result.feasible else frozenset()
        if not result.feasible:
            infeasible.append(i)
    union: frozenset[int] = frozenset().union(*per_model.values())
    candidates = union - _trivial_states(human_models[0])
    if len(infeasible) == len(human_models):
        warnings.warn(
            "every candidate human model is infeasible; no hypotheses collected",
            stacklevel=2,
        )
    return BottleneckHypothesis(
        per_model=per_model,
        union_set=union,
        candidates=candidates,
        infeasible_models=tuple(infeasible),
    )
