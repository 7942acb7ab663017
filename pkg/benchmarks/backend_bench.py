#!/usr/bin/env python3
"""Benchmark the compiled solver kernels against the numpy fallback.

Times the three workloads that dominate library runtime: full value
iteration on a slippery grid, the batch of per-state reward-shaping
waypoint tests, and planning over a subgoal-bitmask product. Run after
building the extension:

    python benchmarks/backend_bench.py [--repeat N]
"""

import argparse
import statistics
import time

import numpy as np

from subgoal_align._backend import load_backend
from subgoal_align.envs import GridSpec, make_maze
from subgoal_align.mdp import GoalMdp
from subgoal_align.subgoals import build_subgoal_mdp


def packed_with_rewards(mdp: GoalMdp):
    packed = mdp.packed()
    rewards = np.where(
        packed.entry_eligible, mdp.entry_reward_vector()[packed.succ], 0.0
    )
    return packed, rewards


def bench_value_iteration(backend, mdp, tol=1e-8):
    packed, rewards = packed_with_rewards(mdp)
    v0 = np.zeros(mdp.n_states)
    backend.value_sweeps(
        packed.state_ptr, packed.row_ptr, packed.succ, packed.prob, rewards,
        mdp.gamma, tol, 10**5, v0,
    )


def bench_avoid_tests(backend, mdp):
    from subgoal_align.determinize import determinize

    dm = determinize(mdp).base
    packed = dm.packed()
    goal_mask = packed.goal_mask
    trivial = {dm.initial_state} | dm.goal_states
    v0 = np.zeros(dm.n_states)
    for target in range(dm.n_states):
        if target in trivial:
            continue
        entry = np.where(goal_mask, 1.0, 0.0)
        entry[target] = -1e6
        rewards = np.where(packed.entry_eligible, entry[packed.succ], 0.0)
        backend.value_sweeps(
            packed.state_ptr, packed.row_ptr, packed.succ, packed.prob, rewards,
            dm.gamma, 1e-8, 10**5, v0,
        )


def bench_product_plan(backend, mdp, subgoals):
    product = build_subgoal_mdp(mdp, subgoals)
    planning = product.planning_mdp()
    packed, rewards = packed_with_rewards(planning)
    v0 = np.zeros(planning.n_states)
    backend.value_sweeps(
        packed.state_ptr, packed.row_ptr, packed.succ, packed.prob, rewards,
        planning.gamma, 1e-8, 10**5, v0,
    )


def timed(fn, repeat):
    laps = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        laps.append(time.perf_counter() - t0)
    return min(laps), statistics.median(laps)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    backends = {}
    backends["python"] = load_backend("python")
    try:
        backends["compiled"] = load_backend("compiled")
    except ImportError:
        print("compiled extension not available; timing the fallback only")

    slip_maze = make_maze(
        GridSpec(width=8, height=8, obstacle_density=0.1, seed=3, slip_probability=0.1)
    )
    det_maze = make_maze(GridSpec(width=8, height=8, obstacle_density=0.1, seed=3))
    product_subgoals = [9, 18, 27, 36, 45, 54]

    workloads = {
        "value iteration 8x8 slip": lambda b: bench_value_iteration(b, slip_maze),
        "62 waypoint avoid-tests 8x8": lambda b: bench_avoid_tests(b, det_maze),
        "product plan |subgoals|=6": lambda b: bench_product_plan(
            b, det_maze, product_subgoals
        ),
    }

    print(f"{'workload':<32}", end="")
    for name in backends:
        print(f"{name + ' (ms)':>16}", end="")
    if len(backends) == 2:
        print(f"{'speedup':>10}", end="")
    print()
    for label, workload in workloads.items():
        print(f"{label:<32}", end="")
        times = {}
        for name, backend in backends.items():
            best, _median = timed(lambda: workload(backend), args.repeat)
            times[name] = best
            print(f"{best * 1e3:>16.2f}", end="")
        if len(times) == 2:
            print(f"{times['python'] / times['compiled']:>9.1f}x", end="")
        print()


if __name__ == "__main__":
    main()
