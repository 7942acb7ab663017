"""All-outcome determinization of a goal MDP.

Each stochastic outcome of each source action becomes its own
deterministic action, so the result has only probability-1 transitions
while covering exactly the support of the source model. Waypoint
analysis is invariant under this rewrite, which is what lets a finite
(deduplicated) family stand in for an arbitrarily large set of candidate
models.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .mdp import GoalMdp, ModelError, Trace


@dataclass(frozen=True)
class DeterminizedMdp:
    """A deterministic goal MDP plus provenance for its derived actions.

    ``provenance[a']`` gives ``(source_action, outcome_rank)`` where the
    rank orders a source action's outcomes by successor index.
    """

    base: GoalMdp
    provenance: tuple[tuple[int, int], ...]
    action_offsets: tuple[int, ...]  # start of each source action's derived block

    def source_of(self, action: int) -> tuple[int, int]:
        return self.provenance[action]

    def lift_action(self, state: int, action: int, successor: int) -> int:
        """Derived action realizing the source triple (state, action, successor)."""
        new = self.action_offsets[action]
        while new < len(self.provenance) and self.provenance[new][0] == action:
            outcome = self.base.transitions.get((state, new))
            if outcome and outcome[0][0] == successor:
                return new
            new += 1
        raise ModelError(f"no support for {state} --{action}--> {successor}")

    def lift_trace(self, trace: Trace, source: GoalMdp) -> Trace:
        """Rewrite a trace of the source model into derived actions."""
        actions = []
        for i, (s, a) in enumerate(trace.steps):
            actions.append(self.lift_action(s, a, trace.states[i + 1]))
        lifted = Trace(states=trace.states, actions=tuple(actions))
        lifted.validate(self.base)
        return lifted

    def project_trace(self, trace: Trace) -> Trace:
        """Rewrite a trace of the determinized model into source actions."""
        actions = tuple(self.provenance[a][0] for a in trace.actions)
        return Trace(states=trace.states, actions=actions)


def determinize(mdp: GoalMdp) -> DeterminizedMdp:
    """Split every stochastic outcome into its own deterministic action.

    States, initial state, discount, and goals are unchanged; derived
    action ids are laid out per source action in outcome-rank order.
    """
    max_outcomes = [0] * mdp.n_actions
    for (_s, a), outcomes in mdp.transitions.items():
        max_outcomes[a] = max(max_outcomes[a], len(outcomes))
    offsets = [0] * mdp.n_actions
    total = 0
    provenance: list[tuple[int, int]] = []
    for a in range(mdp.n_actions):
        offsets[a] = total
        total += max_outcomes[a]
        provenance.extend((a, k) for k in range(max_outcomes[a]))
    transitions: dict[tuple[int, int], list[tuple[int, float]]] = {}
    for (s, a), outcomes in mdp.transitions.items():
        for rank, (t, _p) in enumerate(outcomes):  # outcomes already successor-sorted
            transitions[(s, offsets[a] + rank)] = [(t, 1.0)]
    base = GoalMdp(
        n_states=mdp.n_states,
        n_actions=max(total, 1),
        transitions=transitions,
        initial_state=mdp.initial_state,
        goal_states=mdp.goal_states,
        gamma=mdp.gamma,
        reward_overlay=mdp.reward_overlay,
        state_labels=mdp.state_labels,
        meta=mdp.meta,
    )
    return DeterminizedMdp(
        base=base, provenance=tuple(provenance), action_offsets=tuple(offsets)
    )


def determinize_model_set(models: Sequence[GoalMdp]) -> list[DeterminizedMdp]:
    """Determinize a family of models and merge structural duplicates.

    Models must share the state/action skeleton, the initial state, and
    the goal set. Two determinized models are duplicates when their
    deterministic (state, successor) edge sets coincide; the first
    occurrence is kept, so the output order is deterministic.
    """
    if not models:
        return []
    head = models[0]
    for i, m in enumerate(models[1:], start=1):
        if (
            m.n_states != head.n_states
            or m.n_actions != head.n_actions
            or m.initial_state != head.initial_state
            or m.goal_states != head.goal_states
        ):
            raise ModelError(f"model {i} does not share the common skeleton")
    unique: list[DeterminizedMdp] = []
    seen: set[frozenset[tuple[int, int]]] = set()
    for m in models:
        dm = determinize(m)
        key = dm.base.support_edges()
        if key not in seen:
            seen.add(key)
            unique.append(dm)
    return unique
