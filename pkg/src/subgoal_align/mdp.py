"""Finite goal-based MDPs: representation, solvers, and reachability.

A :class:`GoalMdp` is a finite tabular MDP whose objective is absorption
in a designated set of goal states. Reward is earned once, on the
transition that moves into a goal state; an optional per-state overlay
adds extra reward (or penalty) each time a state is moved into. Solvers
delegate their inner sweeps to the selected kernel backend.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import _backend

PROBABILITY_FLOOR = 1e-12
PROBABILITY_SUM_TOL = 1e-9
DEFAULT_GAMMA = 0.95
DEFAULT_TOLERANCE = 1e-8
DEFAULT_MAX_ITERATIONS = 100_000
REACH_TOLERANCE = 1e-12
REACH_MAX_ITERATIONS = 1_000_000
GOAL_ENTRY_REWARD = 1.0


class ModelError(ValueError):
    """An MDP definition (or a query against one) violates a structural
    constraint."""


class ConvergenceError(RuntimeError):
    """An iterative solver exhausted its sweep budget."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class _PackedMdp:
    """Flat array layout consumed by the kernels.

    Choice rows (one per available state/action pair) are grouped by
    state; transition entries are grouped by row. States without any
    action get a single virtual self-loop row carrying action -1, so
    every state has at least one row and every row at least one entry.
    """

    state_ptr: np.ndarray
    row_ptr: np.ndarray
    row_state: np.ndarray
    row_action: np.ndarray
    succ: np.ndarray
    prob: np.ndarray
    goal_mask: np.ndarray
    entry_eligible: np.ndarray  # per entry: source not a goal and not a self-loop

    def row_of(self, state: int, action: int) -> int:
        lo, hi = self.state_ptr[state], self.state_ptr[state + 1]
        for r in range(lo, hi):
            if self.row_action[r] == action:
                return r
        raise ModelError(f"action {action} not available in state {state}")


class GoalMdp:
    """Finite goal MDP ``(S, A, T, s0, gamma, S_G)`` with an optional
    per-state reward overlay.

    ``transitions`` maps ``(state, action)`` to a sequence of
    ``(successor, probability)`` pairs. Instances are immutable after
    construction and safe to share across workers.
    """

    __slots__ = (
        "n_states",
        "n_actions",
        "transitions",
        "initial_state",
        "gamma",
        "goal_states",
        "reward_overlay",
        "state_labels",
        "meta",
        "_packed",
        "_successors",
    )

    def __init__(
        self,
        n_states: int,
        n_actions: int,
        transitions: Mapping[tuple[int, int], Sequence[tuple[int, float]]],
        initial_state: int,
        goal_states: Iterable[int],
        gamma: float = DEFAULT_GAMMA,
        reward_overlay: Optional[Mapping[int, float]] = None,
        state_labels: Optional[Sequence[str]] = None,
        meta: Optional[Mapping] = None,
    ):
        self.n_states = int(n_states)
        self.n_actions = int(n_actions)
        self.initial_state = int(initial_state)
        self.gamma = float(gamma)
        self.goal_states = frozenset(int(g) for g in goal_states)
        self.reward_overlay = (
            {int(s): float(v) for s, v in reward_overlay.items()} if reward_overlay else {}
        )
        self.state_labels = tuple(state_labels) if state_labels is not None else None
        self.meta = dict(meta) if meta else {}
        cleaned: dict[tuple[int, int], tuple[tuple[int, float], ...]] = {}
        for key, outcomes in transitions.items():
            s, a = int(key[0]), int(key[1])
            entry = tuple(sorted(((int(t), float(p)) for t, p in outcomes)))
            if entry:
                cleaned[(s, a)] = entry
        self.transitions = cleaned
        self._packed = None
        self._successors = None
        self._validate()

    def _validate(self):
        if self.n_states <= 0:
            raise ModelError("model needs at least one state")
        if not 0.0 <= self.gamma < 1.0:
            raise ModelError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not 0 <= self.initial_state < self.n_states:
            raise ModelError(f"initial state {self.initial_state} out of range")
        if not self.goal_states:
            raise ModelError("goal state set is empty")
        for g in self.goal_states:
            if not 0 <= g < self.n_states:
                raise ModelError(f"goal state {g} out of range")
        if self.state_labels is not None and len(self.state_labels) != self.n_states:
            raise ModelError("state_labels length does not match n_states")
        for s in self.reward_overlay:
            if not 0 <= s < self.n_states:
                raise ModelError(f"overlay state {s} out of range")
        for (s, a), outcomes in self.transitions.items():
            if not 0 <= s < self.n_states:
                raise ModelError(f"transition source {s} out of range")
            if not 0 <= a < self.n_actions:
                raise ModelError(f"action {a} out of range at state {s}")
            total = 0.0
            seen = set()
            for t, p in outcomes:
                if not 0 <= t < self.n_states:
                    raise ModelError(f"successor {t} out of range for ({s}, {a})")
                if t in seen:
                    raise ModelError(f"duplicate successor {t} for ({s}, {a})")
                seen.add(t)
                if p < PROBABILITY_FLOOR:
                    raise ModelError(
                        f"probability {p:.3e} below floor {PROBABILITY_FLOOR:.0e} for ({s}, {a})"
                    )
                total += p
            if abs(total - 1.0) > PROBABILITY_SUM_TOL:
                raise ModelError(f"probabilities for ({s}, {a}) sum to {total!r}, not 1")
            if s in self.goal_states and outcomes != ((s, 1.0),):
                raise ModelError(f"goal state {s} is not absorbing under action {a}")

    # -- structure ---------------------------------------------------------

    def available_actions(self, state: int) -> tuple[int, ...]:
        packed = self.packed()
        lo, hi = packed.state_ptr[state], packed.state_ptr[state + 1]
        return tuple(int(a) for a in packed.row_action[lo:hi] if a >= 0)

    def outcomes(self, state: int, action: int) -> tuple[tuple[int, float], ...]:
        return self.transitions.get((state, action), ())

    def is_deterministic(self) -> bool:
        """True when every available action has a single outcome."""
        return all(len(o) == 1 for o in self.transitions.values())

    def successor_sets(self) -> list[set[int]]:
        """Support successors per state (any action, nonzero probability)."""
        if self._successors is None:
            succs: list[set[int]] = [set() for _ in range(self.n_states)]
            for (s, _a), outcomes in self.transitions.items():
                for t, _p in outcomes:
                    succs[s].add(t)
            self._successors = succs
        return self._successors

    def support_edges(self) -> frozenset[tuple[int, int]]:
        return frozenset(
            (s, t) for s, succs in enumerate(self.successor_sets()) for t in succs
        )

    def replace(self, **changes) -> "GoalMdp":
        kwargs = dict(
            n_states=self.n_states,
            n_actions=self.n_actions,
            transitions=self.transitions,
            initial_state=self.initial_state,
            goal_states=self.goal_states,
            gamma=self.gamma,
            reward_overlay=self.reward_overlay,
            state_labels=self.state_labels,
            meta=self.meta,
        )
        kwargs.update(changes)
        return GoalMdp(**kwargs)

    def packed(self) -> _PackedMdp:
        if self._packed is not None:
            return self._packed
        rows = []  # (state, action, outcomes)
        for (s, a) in sorted(self.transitions):
            rows_for = self.transitions[(s, a)]
            rows.append((s, a, rows_for))
        per_state: list[list[tuple[int, tuple]]] = [[] for _ in range(self.n_states)]
        for s, a, outcomes in rows:
            per_state[s].append((a, outcomes))
        state_ptr = np.zeros(self.n_states + 1, dtype=np.intp)
        row_state, row_action, row_lengths = [], [], []
        succ, prob = [], []
        for s in range(self.n_states):
            entries = per_state[s] or [(-1, ((s, 1.0),))]
            state_ptr[s + 1] = state_ptr[s] + len(entries)
            for a, outcomes in entries:
                row_state.append(s)
                row_action.append(a)
                row_lengths.append(len(outcomes))
                for t, p in outcomes:
                    succ.append(t)
                    prob.append(p)
        row_ptr = np.zeros(len(row_state) + 1, dtype=np.intp)
        np.cumsum(row_lengths, out=row_ptr[1:])
        succ_arr = np.asarray(succ, dtype=np.intp)
        row_state_arr = np.asarray(row_state, dtype=np.intp)
        goal_mask = np.zeros(self.n_states, dtype=bool)
        goal_mask[list(self.goal_states)] = True
        entry_state = np.repeat(row_state_arr, row_lengths)
        entry_eligible = ~goal_mask[entry_state] & (succ_arr != entry_state)
        self._packed = _PackedMdp(
            state_ptr=state_ptr,
            row_ptr=row_ptr,
            row_state=row_state_arr,
            row_action=np.asarray(row_action, dtype=np.intp),
            succ=succ_arr,
            prob=np.asarray(prob, dtype=np.float64),
            goal_mask=goal_mask,
            entry_eligible=entry_eligible,
        )
        return self._packed

    def entry_reward_vector(self) -> np.ndarray:
        """Default per-state entry rewards: 1 for goals plus the overlay."""
        entry = np.zeros(self.n_states, dtype=np.float64)
        entry[list(self.goal_states)] = GOAL_ENTRY_REWARD
        for s, v in self.reward_overlay.items():
            entry[s] += v
        return entry

    def __repr__(self):
        return (
            f"GoalMdp(n_states={self.n_states}, n_actions={self.n_actions}, "
            f"s0={self.initial_state}, goals={sorted(self.goal_states)}, "
            f"gamma={self.gamma})"
        )


@dataclass(frozen=True)
class Policy:
    """Deterministic stationary policy plus its value function.

    ``actions[s]`` is -1 where the policy is undefined (states that are
    unreachable under it).
    """

    actions: np.ndarray
    values: np.ndarray

    def action_for(self, state: int) -> int:
        a = int(self.actions[state])
        if a < 0:
            raise ModelError(f"policy undefined at state {state}")
        return a

    def is_defined_at(self, state: int) -> bool:
        return int(self.actions[state]) >= 0

    def value(self, state: int) -> float:
        return float(self.values[state])


@dataclass(frozen=True)
class Trace:
    """A finite state/action trajectory (one more state than actions)."""

    states: tuple[int, ...]
    actions: tuple[int, ...]

    def __post_init__(self):
        if len(self.states) != len(self.actions) + 1:
            raise ModelError("trace needs exactly one more state than actions")

    @property
    def steps(self) -> tuple[tuple[int, int], ...]:
        return tuple(zip(self.states[:-1], self.actions))

    def validate(self, mdp: GoalMdp) -> None:
        for i, (s, a) in enumerate(self.steps):
            nxt = self.states[i + 1]
            if not any(t == nxt for t, _ in mdp.outcomes(s, a)):
                raise ModelError(f"step {i}: no support for {s} --{a}--> {nxt}")

    def is_goal_reaching(self, mdp: GoalMdp) -> bool:
        return self.states[-1] in mdp.goal_states

    def probability(self, mdp: GoalMdp) -> float:
        p = 1.0
        for i, (s, a) in enumerate(self.steps):
            nxt = self.states[i + 1]
            step = dict(mdp.outcomes(s, a)).get(nxt, 0.0)
            p *= step
        return p


# -- solvers ---------------------------------------------------------------


def _transition_rewards(mdp: GoalMdp, entry_rewards: Optional[np.ndarray]) -> np.ndarray:
    packed = mdp.packed()
    entry = mdp.entry_reward_vector() if entry_rewards is None else np.asarray(
        entry_rewards, dtype=np.float64
    )
    return np.where(packed.entry_eligible, entry[packed.succ], 0.0)


def value_iteration(
    mdp: GoalMdp,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    entry_rewards: Optional[np.ndarray] = None,
) -> Policy:
    """Optimal values and greedy policy for the goal-entry reward convention.

    ``entry_rewards`` replaces the default per-state entry rewards (goal
    bonus plus overlay); rewards are never granted on self-loops or out of
    goal states. Ties in the greedy extraction break toward the lowest
    action index. Raises :class:`ConvergenceError` when the sweep budget
    runs out before the residual drops below ``tolerance``.
    """
    if tolerance <= 0:
        raise ModelError("tolerance must be positive")
    packed = mdp.packed()
    rewards = _transition_rewards(mdp, entry_rewards)
    v0 = np.zeros(mdp.n_states, dtype=np.float64)
    values, sweeps, residual = _backend.value_sweeps(
        packed.state_ptr,
        packed.row_ptr,
        packed.succ,
        packed.prob,
        rewards,
        mdp.gamma,
        tolerance,
        int(max_iterations),
        v0,
    )
    if residual >= tolerance:
        raise ConvergenceError(
            f"value iteration did not converge within {sweeps} sweeps", residual
        )
    rows = _backend.greedy_rows(
        packed.state_ptr, packed.row_ptr, packed.succ, packed.prob, rewards, mdp.gamma, values
    )
    actions = packed.row_action[rows]
    return Policy(actions=actions, values=values)


def _chosen_rows(mdp: GoalMdp, policy: Policy) -> np.ndarray:
    packed = mdp.packed()
    rows = np.full(mdp.n_states, -1, dtype=np.intp)
    for s in range(mdp.n_states):
        a = int(policy.actions[s])
        if a < 0:
            continue
        rows[s] = packed.row_of(s, a)
    return rows


def _check_policy_covers(mdp: GoalMdp, policy: Policy, start: int) -> None:
    for s in reachable_states(mdp, policy, start=start):
        if not policy.is_defined_at(s) and mdp.available_actions(s):
            raise ModelError(f"policy undefined at reachable state {s}")


def evaluate_policy(
    mdp: GoalMdp,
    policy: Policy,
    tolerance: float = DEFAULT_TOLERANCE,
    entry_rewards: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Fixed point of the policy-restricted Bellman operator.

    Returns a value per state; states where the policy is undefined are
    held at 0. Raises if the policy is undefined at a state reachable
    from the initial state.
    """
    if tolerance <= 0:
        raise ModelError("tolerance must be positive")
    _check_policy_covers(mdp, policy, mdp.initial_state)
    packed = mdp.packed()
    rewards = _transition_rewards(mdp, entry_rewards)
    rows = _chosen_rows(mdp, policy)
    fixed = np.zeros(mdp.n_states, dtype=np.float64)
    v0 = np.zeros(mdp.n_states, dtype=np.float64)
    values, sweeps, residual = _backend.eval_sweeps(
        rows,
        fixed,
        packed.row_ptr,
        packed.succ,
        packed.prob,
        rewards,
        mdp.gamma,
        tolerance,
        DEFAULT_MAX_ITERATIONS,
        v0,
    )
    if residual >= tolerance:
        raise ConvergenceError(
            f"policy evaluation did not converge within {sweeps} sweeps", residual
        )
    return values


def goal_reach_probabilities(mdp: GoalMdp, policy: Policy) -> np.ndarray:
    """Undiscounted probability, per state, of absorption in the goal set
    under the policy."""
    packed = mdp.packed()
    rows = _chosen_rows(mdp, policy)
    fixed = np.zeros(mdp.n_states, dtype=np.float64)
    for g in mdp.goal_states:
        rows[g] = -1
        fixed[g] = 1.0
    zero_rewards = np.zeros(len(packed.succ), dtype=np.float64)
    v0 = fixed.copy()
    values, sweeps, residual = _backend.eval_sweeps(
        rows,
        fixed,
        packed.row_ptr,
        packed.succ,
        packed.prob,
        zero_rewards,
        1.0,
        REACH_TOLERANCE,
        REACH_MAX_ITERATIONS,
        v0,
    )
    if residual >= REACH_TOLERANCE:
        raise ConvergenceError(
            f"reach-probability solve did not converge within {sweeps} sweeps", residual
        )
    return np.clip(values, 0.0, 1.0)


def goal_reach_probability(mdp: GoalMdp, policy: Policy, state: int) -> float:
    """Probability that a trajectory under ``policy`` from ``state`` is
    absorbed in the goal set."""
    _check_policy_covers(mdp, policy, state)
    return float(goal_reach_probabilities(mdp, policy)[state])


def reachable_states(
    mdp: GoalMdp, policy: Optional[Policy] = None, start: Optional[int] = None
) -> frozenset[int]:
    """States reachable from the initial state (or ``start``) through
    nonzero-probability transitions, restricted to the policy's actions
    when one is given."""
    origin = mdp.initial_state if start is None else int(start)
    seen = {origin}
    frontier = deque([origin])
    succs = mdp.successor_sets()
    while frontier:
        s = frontier.popleft()
        if policy is None:
            nxt = succs[s]
        elif policy.is_defined_at(s):
            nxt = {t for t, _ in mdp.outcomes(s, policy.actions[s])}
        else:
            nxt = ()
        for t in nxt:
            if t not in seen:
                seen.add(t)
                frontier.append(t)
    return frozenset(seen)


def goal_reachable(mdp: GoalMdp, start: Optional[int] = None) -> bool:
    return bool(mdp.goal_states & reachable_states(mdp, start=start))


# -- serialization ---------------------------------------------------------


def to_document(mdp: GoalMdp) -> dict:
    """JSON-compatible document with the full model structure."""
    doc = {
        "n_states": mdp.n_states,
        "n_actions": mdp.n_actions,
        "initial_state": mdp.initial_state,
        "gamma": mdp.gamma,
        "goal_states": sorted(mdp.goal_states),
        "transitions": [
            [s, a, t, p]
            for (s, a) in sorted(mdp.transitions)
            for t, p in mdp.transitions[(s, a)]
        ],
    }
    if mdp.reward_overlay:
        doc["reward_overlay"] = {str(s): v for s, v in sorted(mdp.reward_overlay.items())}
    if mdp.state_labels is not None:
        doc["state_labels"] = list(mdp.state_labels)
    if mdp.meta:
        doc["meta"] = mdp.meta
    return doc


def from_document(doc: Mapping) -> GoalMdp:
    transitions: dict[tuple[int, int], list[tuple[int, float]]] = {}
    for s, a, t, p in doc["transitions"]:
        transitions.setdefault((int(s), int(a)), []).append((int(t), float(p)))
    overlay = doc.get("reward_overlay")
    return GoalMdp(
        n_states=doc["n_states"],
        n_actions=doc["n_actions"],
        transitions=transitions,
        initial_state=doc["initial_state"],
        goal_states=doc["goal_states"],
        gamma=doc.get("gamma", DEFAULT_GAMMA),
        reward_overlay={int(s): float(v) for s, v in overlay.items()} if overlay else None,
        state_labels=doc.get("state_labels"),
        meta=doc.get("meta"),
    )


def dump_model(mdp: GoalMdp, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_document(mdp), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> GoalMdp:
    with open(path, "r", encoding="utf-8") as fh:
        return from_document(json.load(fh))
