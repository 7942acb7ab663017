"""Shared model builders for the test suite."""

import pytest

from subgoal_align.mdp import GoalMdp


def chain_mdp(length=3, gamma=0.95):
    """States 0..length-1 in a line, one action, last state is the goal."""
    last = length - 1
    transitions = {(s, 0): [(min(s + 1, last), 1.0)] for s in range(length)}
    transitions[(last, 0)] = [(last, 1.0)]
    return GoalMdp(length, 1, transitions, 0, [last], gamma=gamma)


def diamond_mdp(gamma=0.95):
    """s0 -> a(1) or b(2) -> goal(3); two actions everywhere."""
    t = {
        (0, 0): [(1, 1.0)],
        (0, 1): [(2, 1.0)],
        (1, 0): [(3, 1.0)],
        (1, 1): [(3, 1.0)],
        (2, 0): [(3, 1.0)],
        (2, 1): [(3, 1.0)],
        (3, 0): [(3, 1.0)],
        (3, 1): [(3, 1.0)],
    }
    return GoalMdp(4, 2, t, 0, [3], gamma=gamma)


def diamond_with_merge_mdp(gamma=0.95):
    """s0 -> a(1)|b(2) -> m(3) -> goal(4)."""
    t = {
        (0, 0): [(1, 1.0)],
        (0, 1): [(2, 1.0)],
        (1, 0): [(3, 1.0)],
        (1, 1): [(3, 1.0)],
        (2, 0): [(3, 1.0)],
        (2, 1): [(3, 1.0)],
        (3, 0): [(4, 1.0)],
        (3, 1): [(4, 1.0)],
        (4, 0): [(4, 1.0)],
        (4, 1): [(4, 1.0)],
    }
    return GoalMdp(5, 2, t, 0, [4], gamma=gamma)


def split_chance_mdp(p_goal=0.8, gamma=0.95):
    """One action from s0: p_goal to the goal, rest to an absorbing trap."""
    t = {
        (0, 0): [(1, p_goal), (2, 1.0 - p_goal)],
        (1, 0): [(1, 1.0)],
        (2, 0): [(2, 1.0)],
    }
    return GoalMdp(3, 1, t, 0, [1], gamma=gamma)


def trap_mdp(gamma=0.95):
    """Action 0 walks into an absorbing trap, action 1 reaches the goal."""
    t = {
        (0, 0): [(1, 1.0)],
        (0, 1): [(2, 1.0)],
        (1, 0): [(1, 1.0)],
        (1, 1): [(1, 1.0)],
        (2, 0): [(2, 1.0)],
        (2, 1): [(2, 1.0)],
    }
    return GoalMdp(3, 2, t, 0, [2], gamma=gamma)


def star_revisit_mdp(gamma=0.95):
    """Hub h(0) with dead-end arms a(1), b(2) and the goal g(3).

    Covering {a, b} requires revisiting the hub, so no simple path
    covers both although a product policy (and a walk) can.
    """
    t = {
        (0, 0): [(1, 1.0)],
        (0, 1): [(2, 1.0)],
        (0, 2): [(3, 1.0)],
        (1, 0): [(0, 1.0)],
        (1, 1): [(0, 1.0)],
        (1, 2): [(0, 1.0)],
        (2, 0): [(0, 1.0)],
        (2, 1): [(0, 1.0)],
        (2, 2): [(0, 1.0)],
        (3, 0): [(3, 1.0)],
        (3, 1): [(3, 1.0)],
        (3, 2): [(3, 1.0)],
    }
    return GoalMdp(4, 3, t, 0, [3], gamma=gamma)


@pytest.fixture
def chain():
    return chain_mdp()


@pytest.fixture
def diamond():
    return diamond_mdp()


@pytest.fixture
def diamond_with_merge():
    return diamond_with_merge_mdp()
