import numpy as np
import pytest

from spacc.core import ProbeMatrix, ValidationError
from spacc.missing import (MmConfig, complete, initial_fill, missing_objective,
                           mm_solve, surrogate)
from spacc.solver import SolverConfig, ama_solve

from _oracles import pg_oracle


def _masked(n, p, frac, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    mask = rng.random((n, p)) > frac
    mask[0, :] = True  # every column keeps an observation
    return ProbeMatrix.from_array(np.where(mask, X, np.nan), mask=mask), X


def test_complete_examples():
    X = ProbeMatrix.from_array([[1.0, np.nan], [3.0, 4.0]])
    T = complete(X, np.array([[0.0, 7.0], [0.0, 0.0]]))
    assert T.tolist() == [[1.0, 7.0], [3.0, 4.0]]
    full = ProbeMatrix.from_array(np.arange(6.0).reshape(2, 3))
    assert np.array_equal(complete(full, np.zeros((2, 3))), full.values)


def test_complete_whole_missing_column():
    X = ProbeMatrix.from_array([[1.0, np.nan], [3.0, np.nan]])
    U = np.array([[0.0, 5.0], [0.0, 6.0]])
    assert complete(X, U)[:, 1].tolist() == [5.0, 6.0]


def test_fully_observed_equals_ama():
    X = np.random.default_rng(0).normal(size=(3, 8))
    s = mm_solve(ProbeMatrix.from_array(X), np.ones(7), 0.4)
    ref = ama_solve(X, np.ones(7), SolverConfig(gamma=0.4))
    assert np.array_equal(s.U, ref.U)


def test_gamma_zero_keeps_initialization():
    X, _ = _masked(4, 10, 0.2, 1)
    s = mm_solve(X, np.ones(9), 0.0)
    init = initial_fill(X)
    assert np.array_equal(s.U[X.mask], X.values[X.mask])
    assert np.allclose(s.U[~X.mask], init[~X.mask])


def test_matches_masked_oracle_4x12():
    X, _ = _masked(4, 12, 0.1, 12)
    w = np.ones(11)
    s = mm_solve(X, w, 0.3, MmConfig(outer_tol=1e-12, inner=SolverConfig(tol=1e-9)))
    hist = np.array(s.objective_history)
    assert np.all(np.diff(hist) <= 1e-10)
    ref = pg_oracle(np.nan_to_num(X.values), w, 0.3, mask=X.mask)
    f_ref = missing_objective(X, ref, w, 0.3)
    assert abs(hist[-1] - f_ref) <= 1e-6 * f_ref


def test_surrogate_touches_at_anchor():
    X, _ = _masked(3, 9, 0.3, 2)
    U = np.random.default_rng(3).normal(size=(3, 9))
    w = np.ones(8)
    assert surrogate(X, U, U, w, 0.5) == missing_objective(X, U, w, 0.5)


def test_fully_missing_column_rejected():
    X = ProbeMatrix.from_array([[1.0, np.nan, 2.0], [3.0, np.nan, 1.0]])
    with pytest.raises(ValidationError):
        mm_solve(X, np.ones(2), 1.0)


def test_initial_fill_fallbacks():
    X = ProbeMatrix.from_array([[1.0, np.nan, np.nan], [3.0, 5.0, np.nan]])
    T = initial_fill(X)
    assert T[0, 1] == 5.0          # column mean
    assert T[0, 2] == 1.0          # row mean
    assert T[1, 2] == 4.0


def test_imputation_follows_fused_region():
    rng = np.random.default_rng(4)
    X = np.repeat(rng.normal(size=(5, 1)), 8, axis=1) + 0.01 * rng.normal(size=(5, 8))
    X[2, 3] = np.nan
    s = mm_solve(ProbeMatrix.from_array(X), np.ones(7), 5.0)
    assert np.allclose(s.V, 0.0)
    assert s.U[2, 3] == pytest.approx(s.U[2, 0])
