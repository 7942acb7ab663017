"""Pure-numpy solver kernels.

Fallback used when the compiled extension is unavailable. Both backends
operate on the same packed layout (see ``mdp._PackedMdp``): choice rows
grouped by state via ``state_ptr`` and transition entries grouped by row
via ``row_ptr``. Every state has at least one row and every row at least
one entry, which keeps ``reduceat`` well defined.

Floating-point note: row sums accumulate via ``bincount``, which adds
entries sequentially in index order exactly like the compiled loop, so
the two backends produce bit-identical values on the same inputs
(the extension is built with FP contraction disabled for the same
reason).
"""

import numpy as np

BACKEND_NAME = "python"


def _row_values(row_ptr, succ, prob, reward, gamma, values):
    contrib = prob * (reward + gamma * values[succ])
    n_rows = len(row_ptr) - 1
    row_of_entry = np.repeat(np.arange(n_rows), np.diff(row_ptr))
    return np.bincount(row_of_entry, weights=contrib, minlength=n_rows)


def value_sweeps(state_ptr, row_ptr, succ, prob, reward, gamma, tol, max_iter, v0):
    """Jacobi value-iteration sweeps; returns (values, sweeps, residual)."""
    values = np.asarray(v0, dtype=np.float64).copy()
    residual = np.inf
    sweeps = 0
    starts = state_ptr[:-1]
    while sweeps < max_iter:
        q = _row_values(row_ptr, succ, prob, reward, gamma, values)
        new_values = np.maximum.reduceat(q, starts)
        residual = float(np.max(np.abs(new_values - values))) if len(values) else 0.0
        values = new_values
        sweeps += 1
        if residual < tol:
            break
    return values, sweeps, residual


def greedy_rows(state_ptr, row_ptr, succ, prob, reward, gamma, values):
    """Best choice row per state; ties go to the lowest row index."""
    n_states = len(state_ptr) - 1
    n_rows = len(row_ptr) - 1
    q = _row_values(row_ptr, succ, prob, reward, gamma, values)
    starts = state_ptr[:-1]
    best_q = np.maximum.reduceat(q, starts)
    row_state = np.repeat(np.arange(n_states), np.diff(state_ptr))
    row_index = np.arange(n_rows)
    candidate = np.where(q == best_q[row_state], row_index, n_rows)
    return np.minimum.reduceat(candidate, starts).astype(np.intp)


def eval_sweeps(chosen_row, fixed, row_ptr, succ, prob, reward, gamma, tol, max_iter, v0):
    """Policy-evaluation sweeps.

    ``chosen_row[s] == -1`` pins state ``s`` to the constant ``fixed[s]``
    (used for absorbing targets in reach-probability solves and for
    states where the policy is undefined).
    """
    values = np.asarray(v0, dtype=np.float64).copy()
    pinned = chosen_row < 0
    rows = np.where(pinned, 0, chosen_row)
    values[pinned] = fixed[pinned]
    residual = np.inf
    sweeps = 0
    while sweeps < max_iter:
        q = _row_values(row_ptr, succ, prob, reward, gamma, values)
        new_values = np.where(pinned, fixed, q[rows])
        residual = float(np.max(np.abs(new_values - values))) if len(values) else 0.0
        values = new_values
        sweeps += 1
        if residual < tol:
            break
    return values, sweeps, residual
