"""Goal-MDP planning with unstated-waypoint inference and optimal querying.

The pipeline: hypothesize waypoint candidates as bottleneck states of
candidate human world models (computed on determinized models), find the
maximal candidate subsets the robot can guarantee, then drive a
minimal-expected-cost query session that ends with either a certified
policy or a proof that none exists.
"""

from ._backend import backend_name
from .bottlenecks import (
    BottleneckHypothesis,
    BottleneckResult,
    InfeasibleModelError,
    build_hypothesis_set,
    find_bottlenecks,
    is_bottleneck_avoid_test,
    is_bottleneck_graph_oracle,
)
from .determinize import DeterminizedMdp, determinize, determinize_model_set
from .envs import (
    EnsembleSpec,
    GenerationError,
    GridSpec,
    make_ensemble,
    make_four_rooms,
    make_maze,
    make_puddle_world,
    make_rock_world,
    model_digest,
    render_map,
)
from .mdp import (
    ConvergenceError,
    GoalMdp,
    ModelError,
    Policy,
    Trace,
    dump_model,
    evaluate_policy,
    from_document,
    goal_reach_probability,
    load_model,
    reachable_states,
    to_document,
    value_iteration,
)
from .querying import (
    InteractiveOracle,
    Oracle,
    QueryBudgetExceeded,
    QueryMdp,
    QueryPolicy,
    QueryState,
    SessionOutcome,
    SimulatedOracle,
    build_meta_policy,
    build_query_mdp,
    expected_query_cost,
    query_all_baseline,
    run_session,
    solve_query_mdp,
)
from .subgoals import SubgoalMdp, build_subgoal_mdp, plan_for_subgoals, verify_achievement
from .subsets import (
    AchievabilityChecker,
    AchievableFamily,
    find_maximal_achievable_subsets,
)

__version__ = "0.1.0"

__all__ = [
    "AchievabilityChecker",
    "AchievableFamily",
    "BottleneckHypothesis",
    "BottleneckResult",
    "ConvergenceError",
    "DeterminizedMdp",
    "EnsembleSpec",
    "GenerationError",
    "GoalMdp",
    "GridSpec",
    "InfeasibleModelError",
    "InteractiveOracle",
    "ModelError",
    "Oracle",
    "Policy",
    "QueryBudgetExceeded",
    "QueryMdp",
    "QueryPolicy",
    "QueryState",
    "SessionOutcome",
    "SimulatedOracle",
    "SubgoalMdp",
    "Trace",
    "backend_name",
    "build_hypothesis_set",
    "build_meta_policy",
    "build_query_mdp",
    "build_subgoal_mdp",
    "determinize",
    "determinize_model_set",
    "dump_model",
    "evaluate_policy",
    "expected_query_cost",
    "find_bottlenecks",
    "find_maximal_achievable_subsets",
    "from_document",
    "goal_reach_probability",
    "is_bottleneck_avoid_test",
    "is_bottleneck_graph_oracle",
    "load_model",
    "make_ensemble",
    "make_four_rooms",
    "make_maze",
    "make_puddle_world",
    "make_rock_world",
    "model_digest",
    "plan_for_subgoals",
    "query_all_baseline",
    "reachable_states",
    "render_map",
    "run_session",
    "solve_query_mdp",
    "to_document",
    "value_iteration",
    "verify_achievement",
]
