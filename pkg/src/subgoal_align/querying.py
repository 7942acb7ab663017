"""Optimal query strategies for classifying waypoint candidates.

A query session holds a pair of disjoint sets: candidates known to be
required and candidates known not to be. Sessions end when either the
still-possibly-required set fits inside some maximal achievable subset
(a compliant plan exists) or the known-required set escapes every
maximal achievable subset (no plan can exist). The session dynamics
form a finite MDP over those classification states; its exact solution
minimizes the expected number of queries, with the value of the
eventual plan as a strict tie-break. A meta strategy that front-loads
queries about robot-unachievable candidates and defers the rest to the
MDP solved over the remaining pool achieves the same expected cost on
an exponentially smaller state space.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .mdp import GoalMdp, Policy
from .subsets import AchievableFamily

DEFAULT_QUERY_COST = -1000.0
DEFAULT_PRIOR = 0.5
DEFAULT_QUERY_GAMMA = 0.99
DEFAULT_QUERY_BUDGET = 1000
_TIE_TOL = 1e-12

Strategy = Callable[["QueryState"], Optional[int]]


@dataclass(frozen=True)
class QueryState:
    """Disjoint sets of candidates classified as required / not required."""

    known_in: frozenset[int]
    known_out: frozenset[int]

    def __post_init__(self):
        if self.known_in & self.known_out:
            raise ValueError("known_in and known_out must be disjoint")

    def classified(self) -> frozenset[int]:
        return self.known_in | self.known_out

    def with_answer(self, state: int, required: bool) -> "QueryState":
        if required:
            return QueryState(self.known_in | {state}, self.known_out)
        return QueryState(self.known_in, self.known_out | {state})


START_STATE = QueryState(frozenset(), frozenset())


class QueryMdp:
    """Classification-state MDP over a candidate pool.

    One action per candidate; querying an unclassified candidate
    branches to "required" with probability ``prior`` and to "not
    required" otherwise, while querying a classified one changes
    nothing. Non-absorbing steps cost ``query_cost``; achievable
    absorbing states pay a positive terminal reward that preserves the
    order of the corresponding plan values and stays below half the
    query cost's magnitude.
    """

    def __init__(
        self,
        candidates: tuple[int, ...],
        achievable_sets: tuple[frozenset[int], ...],
        query_cost: float,
        prior: float,
        gamma: float,
        value_provider: Callable[[frozenset[int]], float],
        value_bounds: tuple[float, float],
    ):
        self.candidates = candidates
        self.achievable_sets = achievable_sets
        self.query_cost = float(query_cost)
        self.prior = float(prior)
        self.gamma = float(gamma)
        self._value_provider = value_provider
        self._value_bounds = value_bounds
        self._bit = {b: 1 << i for i, b in enumerate(candidates)}
        self._full = (1 << len(candidates)) - 1
        self._i_masks = tuple(self._mask_of(s) for s in achievable_sets)
        self._terminal_cache: dict[int, float] = {}

    # -- bitmask plumbing -------------------------------------------------

    def _mask_of(self, subset: Iterable[int]) -> int:
        mask = 0
        for b in subset:
            bit = self._bit.get(b)
            if bit is None:
                raise ValueError(f"state {b} is not one of this MDP's candidates")
            mask |= bit
        return mask

    def _set_of(self, mask: int) -> frozenset[int]:
        return frozenset(b for b in self.candidates if self._bit[b] & mask)

    def encode(self, qs: QueryState) -> tuple[int, int]:
        return self._mask_of(qs.known_in), self._mask_of(qs.known_out)

    def decode(self, in_mask: int, out_mask: int) -> QueryState:
        return QueryState(self._set_of(in_mask), self._set_of(out_mask))

    # -- structure ---------------------------------------------------------

    def potential_set(self, qs: QueryState) -> frozenset[int]:
        """Candidates still possibly required: known_in plus the unclassified."""
        return qs.known_in | (frozenset(self.candidates) - qs.known_out)

    def _absorbing_kind_masks(self, in_mask: int, out_mask: int) -> Optional[str]:
        potential = in_mask | (self._full & ~out_mask)
        for i_mask in self._i_masks:
            if potential & ~i_mask == 0:
                return "achievable"
        if all(in_mask & ~i_mask for i_mask in self._i_masks):
            return "unachievable"
        return None

    def absorbing_kind(self, qs: QueryState) -> Optional[str]:
        """'achievable', 'unachievable', or None for ongoing states."""
        return self._absorbing_kind_masks(*self.encode(qs))

    def actions(self, qs: QueryState) -> tuple[int, ...]:
        return self.candidates

    def successors(self, qs: QueryState, action: int) -> tuple[tuple[QueryState, float], ...]:
        if action not in self._bit:
            raise ValueError(f"state {action} is not one of this MDP's candidates")
        if self.absorbing_kind(qs) is not None or action in qs.classified():
            return ((qs, 1.0),)
        return (
            (qs.with_answer(action, True), self.prior),
            (qs.with_answer(action, False), 1.0 - self.prior),
        )

    def step_reward(self, qs: QueryState) -> float:
        return 0.0 if self.absorbing_kind(qs) else self.query_cost

    def terminal_reward(self, qs: QueryState) -> float:
        kind = self.absorbing_kind(qs)
        if kind == "achievable":
            return self._terminal_for_mask(self.encode(qs)[0] | (self._full & ~self.encode(qs)[1]))
        return 0.0

    def _terminal_for_mask(self, potential_mask: int) -> float:
        cached = self._terminal_cache.get(potential_mask)
        if cached is not None:
            return cached
        raw = self._value_provider(self._set_of(potential_mask))
        lo, hi = self._value_bounds
        fraction = (raw - lo) / (hi - lo) if hi > lo else 1.0
        fraction = min(max(fraction, 1e-9), 1.0)
        reward = 0.5 * abs(self.query_cost) * fraction
        self._terminal_cache[potential_mask] = reward
        return reward

    def reachable_states(self) -> list[QueryState]:
        """All states reachable from the empty start; absorbing states
        are frontier nodes and are not expanded."""
        seen = {(0, 0)}
        order = [(0, 0)]
        stack = [(0, 0)]
        while stack:
            in_mask, out_mask = stack.pop()
            if self._absorbing_kind_masks(in_mask, out_mask) is not None:
                continue
            unclassified = self._full & ~(in_mask | out_mask)
            for b, bit in self._bit.items():
                if not (unclassified & bit):
                    continue
                for child in ((in_mask | bit, out_mask), (in_mask, out_mask | bit)):
                    if child not in seen:
                        seen.add(child)
                        order.append(child)
                        stack.append(child)
        return [self.decode(*pair) for pair in order]


def _default_value_bounds(family) -> tuple[float, float]:
    checker = getattr(family, "checker", None)
    if checker is None:
        return (-1.0, 2.0)
    mdp: GoalMdp = checker.mdp
    overlay = mdp.reward_overlay
    max_pos = max((v for v in overlay.values() if v > 0), default=0.0)
    max_neg = max((-v for v in overlay.values() if v < 0), default=0.0)
    horizon = 1.0 / (1.0 - mdp.gamma)
    return (-max_neg * horizon - 1.0, 1.0 + max_pos * horizon)


def build_query_mdp(
    candidates: Iterable[int],
    family: AchievableFamily,
    query_cost: float = DEFAULT_QUERY_COST,
    prior: float = DEFAULT_PRIOR,
    gamma: float = DEFAULT_QUERY_GAMMA,
    value_bounds: Optional[tuple[float, float]] = None,
) -> QueryMdp:
    """Query MDP over ``candidates`` with the family's maximal sets as
    the achievable absorbers.

    Works for the full pool and for the pruned pool (achievable
    candidates only): the maximal sets never touch unachievable
    singletons, so they stay valid absorbers either way.
    """
    if query_cost >= 0:
        raise ValueError("query_cost must be negative")
    if not 0.0 < prior < 1.0:
        raise ValueError("prior must lie strictly between 0 and 1")
    pool = tuple(sorted(set(int(b) for b in candidates)))
    pool_set = frozenset(pool)
    for subset in family.maximal_sets:
        if not subset <= pool_set:
            raise ValueError("achievable sets must be subsets of the candidate pool")
    return QueryMdp(
        candidates=pool,
        achievable_sets=tuple(family.maximal_sets),
        query_cost=query_cost,
        prior=prior,
        gamma=gamma,
        value_provider=family.start_value,
        value_bounds=value_bounds or _default_value_bounds(family),
    )


class _QuerySolver:
    """Exact solver over the classification DAG.

    Primary objective: minimize the expected number of queries (every
    query strictly grows the classified set, so backward induction is
    exact and no discounting is needed for the ordering). Secondary:
    among count-optimal actions, maximize the expected terminal reward;
    remaining ties break toward the lowest candidate index.
    """

    def __init__(self, qmdp: QueryMdp):
        self.qmdp = qmdp
        self._count: dict[tuple[int, int], float] = {}
        self._choice: dict[tuple[int, int], Optional[int]] = {}
        self._secondary: dict[tuple[int, int], float] = {}

    def expected_count(self, in_mask: int, out_mask: int) -> float:
        key = (in_mask, out_mask)
        hit = self._count.get(key)
        if hit is not None:
            return hit
        qmdp = self.qmdp
        if qmdp._absorbing_kind_masks(in_mask, out_mask) is not None:
            value = 0.0
        else:
            value = min(
                cost for _bit, cost in self._action_costs(in_mask, out_mask)
            )
        self._count[key] = value
        return value

    def _action_costs(self, in_mask, out_mask):
        qmdp = self.qmdp
        unclassified = qmdp._full & ~(in_mask | out_mask)
        p_in = qmdp.prior
        for b in qmdp.candidates:
            bit = qmdp._bit[b]
            if not (unclassified & bit):
                continue
            cost = (
                1.0
                + p_in * self.expected_count(in_mask | bit, out_mask)
                + (1.0 - p_in) * self.expected_count(in_mask, out_mask | bit)
            )
            yield bit, cost

    def best_action(self, in_mask: int, out_mask: int) -> Optional[int]:
        key = (in_mask, out_mask)
        if key in self._choice:
            return self._choice[key]
        qmdp = self.qmdp
        choice: Optional[int] = None
        if qmdp._absorbing_kind_masks(in_mask, out_mask) is None:
            costs = list(self._action_costs(in_mask, out_mask))
            floor = min(cost for _bit, cost in costs)
            tied = [bit for bit, cost in costs if cost <= floor + _TIE_TOL]
            if len(tied) > 1:
                best_secondary = -float("inf")
                kept = []
                for bit in tied:
                    secondary = (
                        qmdp.prior * self.secondary(in_mask | bit, out_mask)
                        + (1.0 - qmdp.prior) * self.secondary(in_mask, out_mask | bit)
                    )
                    if secondary > best_secondary + _TIE_TOL:
                        best_secondary = secondary
                        kept = [bit]
                    elif secondary >= best_secondary - _TIE_TOL:
                        kept.append(bit)
                tied = kept
            choice = min(tied)
        self._choice[key] = choice
        return choice

    def secondary(self, in_mask: int, out_mask: int) -> float:
        """Expected terminal reward under the chosen policy."""
        key = (in_mask, out_mask)
        hit = self._secondary.get(key)
        if hit is not None:
            return hit
        qmdp = self.qmdp
        kind = qmdp._absorbing_kind_masks(in_mask, out_mask)
        if kind == "achievable":
            value = qmdp._terminal_for_mask(in_mask | (qmdp._full & ~out_mask))
        elif kind == "unachievable":
            value = 0.0
        else:
            bit = self.best_action(in_mask, out_mask)
            value = qmdp.prior * self.secondary(in_mask | bit, out_mask) + (
                1.0 - qmdp.prior
            ) * self.secondary(in_mask, out_mask | bit)
        self._secondary[key] = value
        return value

    def value(self, in_mask: int, out_mask: int) -> float:
        return self.qmdp.query_cost * self.expected_count(in_mask, out_mask) + self.secondary(
            in_mask, out_mask
        )


@dataclass
class QueryPolicy:
    """Policy over classification states with its value function.

    ``values`` accounts the query penalty per expected query plus the
    expected terminal reward. Lookups outside the materialized tree fall
    through to the solver, so the policy stays total over everything
    reachable under it.
    """

    action_for: dict[QueryState, Optional[int]]
    values: dict[QueryState, float]
    expected_queries: dict[QueryState, float]
    _solver: _QuerySolver = field(repr=False)

    def query_at(self, qs: QueryState) -> Optional[int]:
        if qs in self.action_for:
            return self.action_for[qs]
        qmdp = self._solver.qmdp
        in_mask, out_mask = qmdp.encode(qs)
        bit = self._solver.best_action(in_mask, out_mask)
        action = None if bit is None else next(iter(qmdp._set_of(bit)))
        self.action_for[qs] = action
        self.values[qs] = self._solver.value(in_mask, out_mask)
        self.expected_queries[qs] = self._solver.expected_count(in_mask, out_mask)
        return action

    def value_at(self, qs: QueryState) -> float:
        self.query_at(qs)
        return self.values[qs]

    def as_strategy(self) -> Strategy:
        return self.query_at


def solve_query_mdp(qmdp: QueryMdp) -> QueryPolicy:
    """Exact optimal policy of the query MDP (see ``_QuerySolver`` for
    the objective ordering), materialized over the states its own
    choices can reach from the empty start."""
    recursion_floor = len(qmdp.candidates) * 4 + 100
    if sys.getrecursionlimit() < recursion_floor:
        sys.setrecursionlimit(recursion_floor)
    solver = _QuerySolver(qmdp)
    policy = QueryPolicy(action_for={}, values={}, expected_queries={}, _solver=solver)
    frontier = [START_STATE]
    seen = {START_STATE}
    while frontier:
        qs = frontier.pop()
        action = policy.query_at(qs)
        if action is None:
            continue
        for child, _prob in qmdp.successors(qs, action):
            if child not in seen:
                seen.add(child)
                frontier.append(child)
    return policy


def query_all_baseline(
    candidates: Iterable[int], family: Optional[AchievableFamily] = None
) -> Strategy:
    """Query every candidate in index order regardless of what is known.

    Stops only when every candidate is classified or (when the family is
    supplied) the known-required set already escapes every achievable
    set.
    """
    order = tuple(sorted(set(int(b) for b in candidates)))

    def strategy(qs: QueryState) -> Optional[int]:
        if family is not None and not any(
            qs.known_in <= m for m in family.maximal_sets
        ):
            return None
        for b in order:
            if b not in qs.known_in and b not in qs.known_out:
                return b
        return None

    return strategy


def build_meta_policy(
    candidates: Iterable[int],
    family: AchievableFamily,
    qmdp_pruned_policy: Optional[QueryPolicy] = None,
    query_cost: float = DEFAULT_QUERY_COST,
    prior: float = DEFAULT_PRIOR,
) -> Strategy:
    """Strategy that asks about unachievable candidates first (in index
    order), then follows the optimal policy of the query MDP built over
    the achievable pool, projected onto it.

    Stops as soon as the full-pool state is absorbing, so a "required"
    answer about an unachievable candidate ends the session immediately.
    """
    pool = tuple(sorted(set(int(b) for b in candidates)))
    blocked = tuple(sorted(family.unachievable_singletons))
    blocked_set = frozenset(blocked)
    if qmdp_pruned_policy is None:
        pruned_mdp = build_query_mdp(
            family.achievable_candidates, family, query_cost=query_cost, prior=prior
        )
        qmdp_pruned_policy = solve_query_mdp(pruned_mdp)
    full_mdp = build_query_mdp(pool, family, query_cost=query_cost, prior=prior)

    def strategy(qs: QueryState) -> Optional[int]:
        if full_mdp.absorbing_kind(qs) is not None:
            return None
        classified = qs.classified()
        for b in blocked:
            if b not in classified:
                return b
        projected = QueryState(qs.known_in - blocked_set, qs.known_out - blocked_set)
        action = qmdp_pruned_policy.query_at(projected)
        if action is None:
            raise RuntimeError(
                "pruned policy stopped although the full state is not absorbing"
            )
        return action

    return strategy


def expected_query_cost(strategy: Strategy, qmdp: QueryMdp) -> float:
    """Exact expected number of queries of ``strategy`` under the MDP's
    answer model, by backward induction over its reachable tree."""
    memo: dict[QueryState, float] = {}

    def cost(qs: QueryState) -> float:
        hit = memo.get(qs)
        if hit is not None:
            return hit
        target = strategy(qs)
        if target is None:
            value = 0.0
        else:
            if target in qs.classified():
                raise ValueError(f"strategy re-queried classified state {target}")
            value = (
                1.0
                + qmdp.prior * cost(qs.with_answer(target, True))
                + (1.0 - qmdp.prior) * cost(qs.with_answer(target, False))
            )
        memo[qs] = value
        return value

    return cost(START_STATE)


# -- oracles & sessions ------------------------------------------------------


class QueryBudgetExceeded(RuntimeError):
    """The oracle's query budget ran out mid-session."""


class Oracle:
    """Answers whether a state belongs to the user's required set.

    Tracks the number of queries asked and enforces an optional budget.
    """

    def __init__(self, budget: Optional[int] = None):
        self.budget = budget
        self.query_count = 0

    def answer(self, state: int) -> bool:
        if self.budget is not None and self.query_count >= self.budget:
            raise QueryBudgetExceeded(f"query budget of {self.budget} exhausted")
        self.query_count += 1
        return self._respond(state)

    def _respond(self, state: int) -> bool:
        raise NotImplementedError


class SimulatedOracle(Oracle):
    """Deterministic oracle backed by a known ground-truth required set."""

    def __init__(self, truth: Iterable[int], budget: Optional[int] = None):
        super().__init__(budget=budget)
        self.truth = frozenset(int(s) for s in truth)

    def _respond(self, state: int) -> bool:
        return state in self.truth


class InteractiveOracle(Oracle):
    """Terminal oracle that asks the user to classify each state."""

    def __init__(
        self,
        label_fn: Callable[[int], str] = str,
        budget: Optional[int] = None,
        input_fn: Optional[Callable[[str], str]] = None,
        output_fn: Optional[Callable[[str], None]] = None,
    ):
        super().__init__(budget=budget)
        self.label_fn = label_fn
        self._input = input_fn
        self._output = output_fn or (lambda line: print(line, end=""))

    def _respond(self, state: int) -> bool:
        ask = self._input if self._input is not None else input
        prompt = f"Is state {self.label_fn(state)} one of your required waypoints? [y/n] "
        while True:
            reply = ask(prompt).strip().lower()
            if reply in ("y", "yes"):
                return True
            if reply in ("n", "no"):
                return False
            self._output("Please answer y or n.\n")


@dataclass(frozen=True)
class SessionOutcome:
    """Result of driving a query strategy against an oracle.

    ``final_required`` is the conservative requirement the returned
    policy was planned for (known-required plus everything never ruled
    out); ``certified_for`` is the possibly larger set the policy's
    certificate covers.
    """

    result: str  # "policy_found" | "proven_infeasible" | "budget_exceeded"
    queries_asked: int
    transcript: tuple[tuple[int, bool], ...]
    policy: Optional[Policy] = None
    final_required: Optional[frozenset[int]] = None
    certified_for: Optional[frozenset[int]] = None


def run_session(
    strategy: Strategy,
    oracle: Oracle,
    robot_mdp: GoalMdp,
    family: AchievableFamily,
) -> SessionOutcome:
    """Drive ``strategy`` against ``oracle`` until it stops, then either
    plan for the remaining requirement or report that none can exist."""
    qs = START_STATE
    transcript: list[tuple[int, bool]] = []
    while True:
        target = strategy(qs)
        if target is None:
            break
        if target in qs.classified():
            raise ValueError(f"strategy re-queried classified state {target}")
        try:
            required = bool(oracle.answer(target))
        except QueryBudgetExceeded:
            return SessionOutcome(
                result="budget_exceeded",
                queries_asked=len(transcript),
                transcript=tuple(transcript),
            )
        transcript.append((target, required))
        qs = qs.with_answer(target, required)
    potential = qs.known_in | (frozenset(family.candidates) - qs.known_out)
    containing = [m for m in family.maximal_sets if potential <= m]
    if containing:
        policy = family.plan(potential)
        certified = potential
        if policy is None:
            # stochastic-extraction gap: fall back to the certified
            # superset's policy, which covers the requirement a fortiori
            certified = min(containing, key=lambda m: tuple(sorted(m)))
            policy = family.plan(certified)
        if policy is None:
            raise RuntimeError("achievable absorbing state without a certified plan")
        return SessionOutcome(
            result="policy_found",
            queries_asked=len(transcript),
            transcript=tuple(transcript),
            policy=policy,
            final_required=potential,
            certified_for=certified,
        )
    if not any(qs.known_in <= m for m in family.maximal_sets):
        return SessionOutcome(
            result="proven_infeasible",
            queries_asked=len(transcript),
            transcript=tuple(transcript),
            final_required=qs.known_in,
        )
    raise RuntimeError("strategy stopped on a non-absorbing state")
