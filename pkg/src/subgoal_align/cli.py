"""Command-line interface.

Subcommands:

* ``solve``          — solve a serialized model, print values and policy
* ``bottlenecks``    — report waypoint states and query candidates
* ``experiment``     — run a benchmark sweep, write CSV/JSON plus summary
* ``query-session``  — run one query session, simulated or interactive
"""

from __future__ import annotations

import argparse
import os
import sys

from .bench import (
    ENV_PREFIX,
    config_from_sources,
    run_experiment,
    write_results,
)
from .bottlenecks import build_hypothesis_set, find_bottlenecks
from .envs import DOMAINS, EnsembleSpec, GridSpec, make_ensemble, render_map
from .mdp import (
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_TOLERANCE,
    goal_reach_probability,
    load_model,
    value_iteration,
)
from .querying import (
    InteractiveOracle,
    SimulatedOracle,
    build_meta_policy,
    query_all_baseline,
    run_session,
)
from .subsets import find_maximal_achievable_subsets

ACTION_NAMES = ("up", "right", "down", "left")


def _label(mdp, state: int) -> str:
    if mdp.state_labels is not None:
        return f"({mdp.state_labels[state]})"
    return str(state)


def _cmd_solve(args) -> int:
    mdp = load_model(args.model)
    policy = value_iteration(
        mdp, tolerance=args.tolerance, max_iterations=args.max_iterations
    )
    reach = goal_reach_probability(mdp, policy, mdp.initial_state)
    print(f"start value        {policy.values[mdp.initial_state]:.6f}")
    print(f"goal reach prob    {reach:.6f}")
    print("state  action  value")
    for s in range(mdp.n_states):
        action = policy.actions[s]
        name = "-" if action < 0 else (
            ACTION_NAMES[action] if mdp.n_actions == 4 else str(action)
        )
        print(f"{_label(mdp, s):>8}  {name:>6}  {policy.values[s]: .6f}")
    return 0


def _cmd_bottlenecks(args) -> int:
    mdp = load_model(args.model)
    result = find_bottlenecks(mdp)
    if not result.feasible:
        print("model infeasible: the goal is unreachable from the start")
        return 0
    candidates = sorted(result.candidates(mdp))
    print("bottleneck states:", " ".join(_label(mdp, s) for s in sorted(result.states)))
    print("query candidates: ", " ".join(_label(mdp, s) for s in candidates) or "(none)")
    if "width" in mdp.meta:
        print(render_map(mdp, marks={s: "B" for s in candidates}))
    return 0


def _cmd_experiment(args) -> int:
    overrides = {
        "domains": tuple(args.domain) if args.domain else None,
        "grid_sizes": tuple(_parse_grid(g) for g in args.grid) if args.grid else None,
        "obstacle_densities": tuple(args.density) if args.density else None,
        "human_model_counts": tuple(args.humans) if args.humans else None,
        "trials_per_config": args.trials,
        "master_seed": args.seed,
        "query_budget": args.budget,
        "strategies": _strategies(args.strategy),
    }
    config = config_from_sources(
        path=args.config, environ=os.environ, overrides=overrides
    )
    results, summary = run_experiment(config)
    write_results(results, summary, args.out, args.format)
    print(summary.to_text())
    print(f"wrote {len(results)} rows to {args.out}")
    failures = [r for r in results if r.outcome.startswith("error:")]
    if failures:
        print(f"warning: {len(failures)} rows failed", file=sys.stderr)
    return 0


def _strategies(choice):
    if choice is None or choice == "both":
        return None if choice is None else ("strategic", "query_all")
    return (choice.replace("-", "_"),)


def _parse_grid(text: str) -> tuple[int, int]:
    w, _, h = text.lower().partition("x")
    return (int(w), int(h))


def _cmd_query_session(args) -> int:
    width, height = _parse_grid(args.grid)
    spec = GridSpec(
        width=width,
        height=height,
        obstacle_density=args.density,
        seed=args.seed,
        slip_probability=args.slip,
        domain=args.domain,
    )
    ensemble = EnsembleSpec(base=spec, human_count=args.humans)
    robot, humans, truth = make_ensemble(ensemble)
    hypothesis = build_hypothesis_set(humans)
    candidates = tuple(sorted(hypothesis.candidates))
    family = find_maximal_achievable_subsets(robot, candidates)
    print(render_map(robot, marks={s: "B" for s in candidates}))
    print("query candidates:", " ".join(_label(robot, s) for s in candidates) or "(none)")
    if args.strategy == "query-all":
        strategy = query_all_baseline(candidates, family)
    else:
        strategy = build_meta_policy(candidates, family)
    if args.simulate:
        print("simulated required set:", " ".join(_label(robot, s) for s in sorted(truth)))
        oracle = SimulatedOracle(truth, budget=args.budget)
    else:
        oracle = InteractiveOracle(
            label_fn=lambda s: f"({robot.state_labels[s]})", budget=args.budget
        )
    outcome = run_session(strategy, oracle, robot, family)
    for state, answer in outcome.transcript:
        print(f"query {_label(robot, state)} -> {'yes' if answer else 'no'}")
    print(f"outcome: {outcome.result} after {outcome.queries_asked} queries")
    if outcome.result == "policy_found":
        required = " ".join(_label(robot, s) for s in sorted(outcome.final_required))
        print(f"policy guarantees waypoints: {required or '(none)'}")
        print(f"plan value: {family.start_value(outcome.certified_for):.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subgoal-align",
        description=(
            "Infer unstated waypoint subgoals from candidate world models and "
            "plan minimal-cost query strategies."
        ),
        epilog=f"Experiment options also honor {ENV_PREFIX}* environment variables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a serialized model")
    p.add_argument("model", help="path to a model JSON document")
    p.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    p.add_argument("--max-iterations", type=int, default=DEFAULT_MAX_ITERATIONS)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("bottlenecks", help="report waypoints of a model")
    p.add_argument("model", help="path to a model JSON document")
    p.set_defaults(func=_cmd_bottlenecks)

    p = sub.add_parser("experiment", help="run a benchmark sweep")
    p.add_argument("--config", default=None, help="flat key = value config file")
    p.add_argument("--domain", action="append", choices=DOMAINS)
    p.add_argument("--grid", action="append", help="WxH, repeatable")
    p.add_argument("--density", action="append", type=float)
    p.add_argument("--humans", action="append", type=int)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--strategy", choices=("strategic", "query-all", "both"), default=None)
    p.add_argument("--out", default="results.csv")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("query-session", help="run one query session")
    p.add_argument("--domain", choices=DOMAINS, default="maze")
    p.add_argument("--grid", default="4x4")
    p.add_argument("--density", type=float, default=0.1)
    p.add_argument("--humans", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--slip", type=float, default=0.0)
    p.add_argument("--budget", type=int, default=1000)
    p.add_argument("--strategy", choices=("strategic", "query-all"), default="strategic")
    p.add_argument(
        "--simulate",
        action="store_true",
        help="answer from the sampled ground truth instead of prompting",
    )
    p.set_defaults(func=_cmd_query_session)
    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())
