"""Agreement between the compiled and pure-numpy kernel backends."""

import numpy as np
import pytest

from subgoal_align._backend import load_backend
from subgoal_align.envs import GridSpec, make_maze
from subgoal_align.mdp import value_iteration

python_backend = load_backend("python")
try:
    compiled_backend = load_backend("compiled")
except ImportError:
    compiled_backend = None

needs_compiled = pytest.mark.skipif(
    compiled_backend is None, reason="compiled extension not built"
)


def packed_instance(seed, slip=0.1):
    m = make_maze(
        GridSpec(width=5, height=5, obstacle_density=0.2, seed=seed,
                 slip_probability=slip)
    )
    packed = m.packed()
    rewards = np.where(
        packed.entry_eligible, m.entry_reward_vector()[packed.succ], 0.0
    )
    return m, packed, rewards


@needs_compiled
@pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
def test_value_sweeps_agree(seed):
    m, packed, rewards = packed_instance(seed)
    v0 = np.zeros(m.n_states)
    args = (packed.state_ptr, packed.row_ptr, packed.succ, packed.prob, rewards,
            m.gamma, 1e-10, 10**5, v0)
    v_py, it_py, res_py = python_backend.value_sweeps(*args)
    v_cy, it_cy, res_cy = compiled_backend.value_sweeps(*args)
    assert it_py == it_cy
    np.testing.assert_array_equal(v_py, v_cy)
    assert res_py == res_cy


@needs_compiled
@pytest.mark.parametrize("seed", [1, 2, 3])
def test_greedy_rows_agree(seed):
    m, packed, rewards = packed_instance(seed)
    v0 = np.zeros(m.n_states)
    values, _, _ = python_backend.value_sweeps(
        packed.state_ptr, packed.row_ptr, packed.succ, packed.prob, rewards,
        m.gamma, 1e-10, 10**5, v0
    )
    rows_py = python_backend.greedy_rows(
        packed.state_ptr, packed.row_ptr, packed.succ, packed.prob, rewards,
        m.gamma, values
    )
    rows_cy = compiled_backend.greedy_rows(
        packed.state_ptr, packed.row_ptr, packed.succ, packed.prob, rewards,
        m.gamma, values
    )
    np.testing.assert_array_equal(rows_py, rows_cy)


@needs_compiled
@pytest.mark.parametrize("seed", [1, 2, 3])
def test_eval_sweeps_agree_with_pinning(seed):
    m, packed, rewards = packed_instance(seed)
    policy = value_iteration(m)
    chosen = np.full(m.n_states, -1, dtype=np.intp)
    for s in range(m.n_states):
        if policy.is_defined_at(s):
            chosen[s] = packed.row_of(s, int(policy.actions[s]))
    fixed = np.zeros(m.n_states)
    for g in m.goal_states:
        chosen[g] = -1
        fixed[g] = 1.0
    zero_rewards = np.zeros_like(rewards)
    args = (chosen, fixed, packed.row_ptr, packed.succ, packed.prob, zero_rewards,
            1.0, 1e-12, 10**6, fixed.copy())
    v_py, it_py, _ = python_backend.eval_sweeps(*args)
    v_cy, it_cy, _ = compiled_backend.eval_sweeps(*args)
    assert it_py == it_cy
    np.testing.assert_array_equal(v_py, v_cy)


@needs_compiled
def test_backend_names():
    assert python_backend.BACKEND_NAME == "python"
    assert compiled_backend.BACKEND_NAME == "compiled"


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        load_backend("fortran")
