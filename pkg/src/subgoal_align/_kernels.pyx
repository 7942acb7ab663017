# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled solver kernels.

Same contract as ``_kernels_py``; see that module for the layout and the
pinning convention. Accumulation order matches the numpy fallback so both
backends produce identical values on identical inputs.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"


def value_sweeps(cnp.intp_t[::1] state_ptr, cnp.intp_t[::1] row_ptr,
                 cnp.intp_t[::1] succ, double[::1] prob, double[::1] reward,
                 double gamma, double tol, long max_iter, v0):
    """Jacobi value-iteration sweeps; returns (values, sweeps, residual)."""
    cdef cnp.ndarray[double, ndim=1] values_arr = np.array(v0, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] scratch_arr = np.empty_like(values_arr)
    cdef double[::1] values = values_arr
    cdef double[::1] scratch = scratch_arr
    cdef Py_ssize_t n_states = state_ptr.shape[0] - 1
    cdef Py_ssize_t s, r, k
    cdef double acc, best, diff, residual = 0.0
    cdef long sweeps = 0
    if n_states == 0:
        return values_arr, 0, 0.0
    residual = np.inf
    while sweeps < max_iter:
        residual = 0.0
        for s in range(n_states):
            best = -np.inf
            for r in range(state_ptr[s], state_ptr[s + 1]):
                acc = 0.0
                for k in range(row_ptr[r], row_ptr[r + 1]):
                    acc += prob[k] * (reward[k] + gamma * values[succ[k]])
                if acc > best:
                    best = acc
            scratch[s] = best
            diff = best - values[s]
            if diff < 0.0:
                diff = -diff
            if diff > residual:
                residual = diff
        values, scratch = scratch, values
        values_arr, scratch_arr = scratch_arr, values_arr
        sweeps += 1
        if residual < tol:
            break
    return values_arr, sweeps, residual


def greedy_rows(cnp.intp_t[::1] state_ptr, cnp.intp_t[::1] row_ptr,
                cnp.intp_t[::1] succ, double[::1] prob, double[::1] reward,
                double gamma, double[::1] values):
    """Best choice row per state; ties go to the lowest row index."""
    cdef Py_ssize_t n_states = state_ptr.shape[0] - 1
    cdef cnp.ndarray[cnp.intp_t, ndim=1] best_arr = np.empty(n_states, dtype=np.intp)
    cdef cnp.intp_t[::1] best = best_arr
    cdef Py_ssize_t s, r, k
    cdef double acc, best_q
    cdef Py_ssize_t best_row
    for s in range(n_states):
        best_q = -np.inf
        best_row = -1
        for r in range(state_ptr[s], state_ptr[s + 1]):
            acc = 0.0
            for k in range(row_ptr[r], row_ptr[r + 1]):
                acc += prob[k] * (reward[k] + gamma * values[succ[k]])
            if acc > best_q:
                best_q = acc
                best_row = r
        best[s] = best_row
    return best_arr


def eval_sweeps(cnp.intp_t[::1] chosen_row, double[::1] fixed,
                cnp.intp_t[::1] row_ptr, cnp.intp_t[::1] succ,
                double[::1] prob, double[::1] reward,
                double gamma, double tol, long max_iter, v0):
    """Policy-evaluation sweeps with pinned states (chosen_row == -1)."""
    cdef cnp.ndarray[double, ndim=1] values_arr = np.array(v0, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] scratch_arr = np.empty_like(values_arr)
    cdef double[::1] values = values_arr
    cdef double[::1] scratch = scratch_arr
    cdef Py_ssize_t n_states = chosen_row.shape[0]
    cdef Py_ssize_t s, r, k
    cdef double acc, diff, residual = 0.0
    cdef long sweeps = 0
    if n_states == 0:
        return values_arr, 0, 0.0
    for s in range(n_states):
        if chosen_row[s] < 0:
            values[s] = fixed[s]
    residual = np.inf
    while sweeps < max_iter:
        residual = 0.0
        for s in range(n_states):
            r = chosen_row[s]
            if r < 0:
                acc = fixed[s]
            else:
                acc = 0.0
                for k in range(row_ptr[r], row_ptr[r + 1]):
                    acc += prob[k] * (reward[k] + gamma * values[succ[k]])
            scratch[s] = acc
            diff = acc - values[s]
            if diff < 0.0:
                diff = -diff
            if diff > residual:
                residual = diff
        values, scratch = scratch, values
        values_arr, scratch_arr = scratch_arr, values_arr
        sweeps += 1
        if residual < tol:
            break
    return values_arr, sweeps, residual
