"""Planning for waypoint subgoals via a visitation-bitmask product.

The product augments each base state with one bit per subgoal; a bit is
set whenever its state is moved into, and bits never clear. Only goal
copies whose bits are all set count as goals; entering any other goal
copy is penalized. A policy over the product therefore earns positive
value only along routes that collect every subgoal before finishing,
and a reachability check over its restricted support graph certifies
that no successful route can skip one.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional

from .mdp import (
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_TOLERANCE,
    GoalMdp,
    ModelError,
    Policy,
    value_iteration,
)

MAX_SUBGOALS = 16
INCOMPLETE_GOAL_PENALTY = -1.0
POSITIVE_VALUE_MARGIN = 1e-9


@dataclass(frozen=True)
class SubgoalMdp:
    """Product of a goal MDP with a subgoal-visitation bitmask.

    ``base`` carries the product structure and the combined overlay
    (inherited per-state overlay plus the incomplete-goal penalty);
    ``planning_mdp`` strips the inherited part so plan extraction cannot
    be distracted by unrelated rewards.
    """

    base: GoalMdp
    subgoals: tuple[int, ...]
    n_base_states: int
    source: GoalMdp

    @property
    def full_mask(self) -> int:
        return (1 << len(self.subgoals)) - 1

    def encode(self, state: int, mask: int) -> int:
        return mask * self.n_base_states + state

    def decode(self, aug: int) -> tuple[int, int]:
        return aug % self.n_base_states, aug // self.n_base_states

    @property
    def start(self) -> int:
        return self.base.initial_state

    def planning_mdp(self) -> GoalMdp:
        overlay = {
            aug: INCOMPLETE_GOAL_PENALTY for aug in self._incomplete_goal_copies()
        }
        return self.base.replace(reward_overlay=overlay)

    def _incomplete_goal_copies(self) -> Iterable[int]:
        for g in self.source.goal_states:
            for mask in range(self.full_mask):
                yield self.encode(g, mask)


def _entry_mask(subgoal_bit: dict[int, int], state: int, mask: int) -> int:
    bit = subgoal_bit.get(state)
    return mask if bit is None else mask | bit


def build_subgoal_mdp(mdp: GoalMdp, subgoals: Iterable[int]) -> SubgoalMdp:
    """Construct the bitmask product for ``subgoals``.

    Bits are set on entry; the start state's own bit (if it is a
    subgoal) is pre-set. Only transitions reachable from the augmented
    start are materialized, which keeps the product far below its
    nominal ``|S| * 2**k`` size in practice.
    """
    ordered = tuple(sorted(set(int(s) for s in subgoals)))
    for s in ordered:
        if not 0 <= s < mdp.n_states:
            raise ModelError(f"subgoal {s} is not a state of the model")
        if s in mdp.goal_states:
            raise ModelError(f"subgoal {s} is a goal state")
    if len(ordered) > MAX_SUBGOALS:
        raise ModelError(f"at most {MAX_SUBGOALS} subgoals supported, got {len(ordered)}")
    subgoal_bit = {s: 1 << i for i, s in enumerate(ordered)}
    n = mdp.n_states
    n_masks = 1 << len(ordered)

    def encode(state: int, mask: int) -> int:
        return mask * n + state

    start_mask = _entry_mask(subgoal_bit, mdp.initial_state, 0)
    start = encode(mdp.initial_state, start_mask)
    transitions: dict[tuple[int, int], list[tuple[int, float]]] = {}
    seen = {start}
    frontier = deque([start])
    while frontier:
        aug = frontier.popleft()
        state, mask = aug % n, aug // n
        for a in mdp.available_actions(state):
            outcomes = []
            for t, p in mdp.outcomes(state, a):
                t_aug = encode(t, _entry_mask(subgoal_bit, t, mask))
                outcomes.append((t_aug, p))
                if t_aug not in seen:
                    seen.add(t_aug)
                    frontier.append(t_aug)
            transitions[(aug, a)] = outcomes
    full = n_masks - 1
    goal_states = [encode(g, full) for g in sorted(mdp.goal_states)]
    overlay: dict[int, float] = {}
    for s, v in mdp.reward_overlay.items():
        for mask in range(n_masks):
            overlay[encode(s, mask)] = v
    for g in mdp.goal_states:
        for mask in range(full):
            aug = encode(g, mask)
            overlay[aug] = overlay.get(aug, 0.0) + INCOMPLETE_GOAL_PENALTY
    base = GoalMdp(
        n_states=n * n_masks,
        n_actions=mdp.n_actions,
        transitions=transitions,
        initial_state=start,
        goal_states=goal_states,
        gamma=mdp.gamma,
        reward_overlay=overlay,
    )
    return SubgoalMdp(base=base, subgoals=ordered, n_base_states=n, source=mdp)


def _verify_on_product(
    product: SubgoalMdp, policy: Policy, required_mask: Optional[int] = None
) -> bool:
    """Reachability check over the policy-restricted product support.

    True iff no reachable goal copy misses a required bit and some goal
    copy is reachable at all. ``required_mask`` defaults to all bits.
    Branches where the policy is undefined are treated as stuck: they
    produce no successful route, so they cannot violate the guarantee.
    """
    base = product.base
    source = product.source
    need = product.full_mask if required_mask is None else required_mask
    reached_goal = False
    seen = {product.start}
    frontier = deque([product.start])
    while frontier:
        aug = frontier.popleft()
        state, mask = product.decode(aug)
        if state in source.goal_states:
            if mask & need != need:
                return False
            reached_goal = True
            continue
        if not policy.is_defined_at(aug):
            continue
        for t, _p in base.outcomes(aug, int(policy.actions[aug])):
            if t not in seen:
                seen.add(t)
                frontier.append(t)
    return reached_goal


def verify_achievement(
    mdp: GoalMdp,
    policy: Policy,
    subgoals: Iterable[int],
    required: Optional[Iterable[int]] = None,
) -> bool:
    """Does every successful route of ``policy`` collect the required
    subgoals?

    ``policy`` must be a policy over the product built from ``mdp`` and
    ``subgoals`` (they are recombined here). ``required`` defaults to
    all of ``subgoals``; passing a subset checks the weaker guarantee
    for just those states. Equivalent to requiring that every
    goal-reaching trajectory passes through every required state, and
    that at least one goal-reaching trajectory exists.
    """
    product = build_subgoal_mdp(mdp, subgoals)
    required_mask = None
    if required is not None:
        required_states = frozenset(required)
        if not required_states <= frozenset(product.subgoals):
            raise ModelError("required states must be among the product's subgoals")
        bit = {s: 1 << i for i, s in enumerate(product.subgoals)}
        required_mask = 0
        for s in required_states:
            required_mask |= bit[s]
    return _verify_on_product(product, policy, required_mask)


def _plan_on_product(
    product: SubgoalMdp,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> Optional[Policy]:
    policy = value_iteration(
        product.planning_mdp(), tolerance=tolerance, max_iterations=max_iterations
    )
    if policy.values[product.start] <= POSITIVE_VALUE_MARGIN:
        return None
    if not _verify_on_product(product, policy):
        return None
    return policy


def plan_for_subgoals(
    mdp: GoalMdp,
    subgoals: Iterable[int],
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> Optional[Policy]:
    """Optimal product policy collecting all subgoals, or ``None``.

    Returns the policy when its start value is positive and the
    restricted-reachability check certifies it; absence is the signal
    that no certified policy was found for this subgoal set.
    """
    product = build_subgoal_mdp(mdp, subgoals)
    return _plan_on_product(product, tolerance=tolerance, max_iterations=max_iterations)
