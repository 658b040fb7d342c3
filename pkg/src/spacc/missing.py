"""Majorization-minimization fit when some entries are unobserved.

Each outer step fills the missing entries with the current centroids and
refits the complete-data problem; the observed-entry objective never
increases.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .core import ProbeMatrix, ValidationError
from .solver import SolverConfig, SolverState, penalty, solve_decomposed

logger = logging.getLogger(__name__)

# inner tolerance never drops below this when enforcing monotone descent
_TOL_FLOOR = 1e-13


@dataclass(frozen=True)
class MmConfig:
    outer_tol: float = 1e-7
    max_outer: int = 500
    inner: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if not self.outer_tol > 0:
            raise ValueError("outer_tol must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")


def complete(X: ProbeMatrix, U_current) -> np.ndarray:
    """Observed entries from ``X``, missing ones from ``U_current``."""
    U_current = np.asarray(U_current, dtype=float)
    if U_current.shape != X.values.shape:
        raise ValueError("shape mismatch between X and U_current")
    return np.where(X.mask, X.values, U_current)


def missing_objective(X: ProbeMatrix, U, weights, gamma: float) -> float:
    """Squared error over observed entries plus the fusion penalty."""
    R = np.where(X.mask, X.values - U, 0.0)
    return 0.5 * float(np.sum(R * R)) + gamma * penalty(U, weights)


def surrogate(X: ProbeMatrix, U, U_k, weights, gamma: float) -> float:
    """Majorizer of :func:`missing_objective` anchored at ``U_k``."""
    U = np.asarray(U, dtype=float)
    D = np.where(X.mask, 0.0, U - U_k)
    return missing_objective(X, U, weights, gamma) + 0.5 * float(np.sum(D * D))


def initial_fill(X: ProbeMatrix) -> np.ndarray:
    """Replace missing entries by their column's observed mean.

    Columns with nothing observed fall back to the subject's row mean, and
    to the global mean when the row is empty too.
    """
    vals = np.where(X.mask, X.values, 0.0)
    cnt = X.mask.sum(axis=0)
    col_mean = np.divide(vals.sum(axis=0), cnt, out=np.zeros(cnt.shape), where=cnt > 0)
    fill = np.broadcast_to(col_mean, vals.shape).copy()
    empty = cnt == 0
    if empty.any():
        rcnt = X.mask.sum(axis=1)
        glob = vals.sum() / max(X.mask.sum(), 1)
        row_mean = np.divide(vals.sum(axis=1), rcnt, out=np.full(rcnt.shape, glob),
                             where=rcnt > 0)
        fill[:, empty] = row_mean[:, None]
    return np.where(X.mask, X.values, fill)


def mm_solve(X: ProbeMatrix, weights, gamma: float,
             config: Optional[MmConfig] = None, worker_count: int = 1,
             init: Optional[SolverState] = None,
             allow_empty_columns: bool = False) -> SolverState:
    """Fit with missing entries by majorization-minimization.

    Returns the final state; ``objective_history`` holds the observed-entry
    objective at the starting point and after every accepted outer step.
    Missing entries of ``U`` are the model-based imputations.
    """
    config = config or MmConfig()
    if not allow_empty_columns and not X.mask.any(axis=0).all():
        bad = np.flatnonzero(~X.mask.any(axis=0))
        raise ValidationError(f"fully missing columns: {bad[:10].tolist()}")
    w = np.asarray(getattr(weights, "weights", weights), dtype=float)
    inner = replace(config.inner, gamma=gamma)

    if X.fully_observed:
        state = solve_decomposed(X.values, w, inner, worker_count, init)
        state.objective_history = [missing_objective(X, state.U, w, gamma)]
        return state

    if init is not None and init.U is not None:
        U = complete(X, init.U)
    else:
        U = initial_fill(X)
    state = init
    f_old = missing_objective(X, U, w, gamma)
    history = [f_old]
    resid = 1.0
    converged = False
    outer = 0
    for outer in range(1, config.max_outer + 1):
        T = complete(X, U)
        tol = max(0.1 * resid, inner.tol)
        while True:
            cand = solve_decomposed(T, w, replace(inner, tol=tol), worker_count, state)
            f_new = missing_objective(X, cand.U, w, gamma)
            if f_new <= f_old or tol <= _TOL_FLOOR:
                break
            # inexact inner solve broke descent: tighten and continue from it
            state, tol = cand, max(tol * 1e-2, _TOL_FLOOR)
        if f_new > f_old:
            logger.debug("MM step rejected at outer %d (no further descent)", outer)
            converged = True
            break
        state, U = cand, cand.U
        history.append(f_new)
        resid = (f_old - f_new) / max(abs(f_old), 1e-300)
        f_old = f_new
        if resid <= config.outer_tol:
            converged = True
            break

    if state is None:
        state = solve_decomposed(complete(X, U), w, inner, worker_count)
    state.objective_history = history
    state.converged = bool(converged and state.converged)
    state.iterations = outer
    return state
