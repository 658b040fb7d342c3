"""Property-based checks of the invariants."""
import math

import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from spacc.core import ProbeMatrix, compute_weights, split_subproblems
from spacc.metrics import contingency, evaluate, pair_counts, variation_of_information
from spacc.missing import MmConfig, missing_objective, mm_solve, surrogate
from spacc.simulate import gen_segments
from spacc.solver import (SolverConfig, ama_solve, extract_regions, penalty,
                          prox_group_l2, solve_decomposed)

SLOW = settings(max_examples=25, deadline=None)
finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


@st.composite
def instances(draw, max_n=4, max_p=10):
    n = draw(st.integers(1, max_n))
    p = draw(st.integers(2, max_p))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n, p)), rng.uniform(0.05, 1.0, p - 1), rng


gaps = arrays(float, st.integers(1, 30), elements=st.floats(0, 1e5))


@given(gaps, st.floats(0, 1e-3), st.floats(0, 0.5))
def test_weights_monotone_in_gap(g, sigma, cut):
    pos = np.r_[0.0, np.cumsum(g)]
    w = compute_weights(pos, sigma, cut).weights
    order = np.argsort(np.diff(pos), kind="stable")
    assert np.all(np.diff(w[order]) <= 0)
    assert np.all((w == 0) | (w >= cut)) and np.all(w <= 1)


@given(gaps, st.floats(0, 1e-3), st.floats(-1e6, 1e6))
def test_weights_shift_invariant(g, sigma, shift):
    pos = np.round(np.r_[0.0, np.cumsum(g)])
    a = compute_weights(pos, sigma).weights
    b = compute_weights(pos + round(shift), sigma).weights
    assert np.allclose(a, b, rtol=1e-9, atol=0)


@given(gaps, st.floats(0, 1e-3))
def test_span_boundaries_are_zero_weights(g, sigma):
    w = compute_weights(np.r_[0.0, np.cumsum(g)], sigma).weights
    spans = split_subproblems(w)
    boundaries = {s.end for s in spans[:-1]}
    assert boundaries == set(np.flatnonzero(w == 0).tolist())
    assert sum(len(s) for s in spans) == len(w) + 1
    for s in spans:
        assert np.all(w[s.start:s.end] > 0)


@given(arrays(float, 5, elements=finite), arrays(float, 5, elements=finite), st.floats(0, 10))
def test_prox_non_expansive(u, v, t):
    d = np.linalg.norm(prox_group_l2(u, t) - prox_group_l2(v, t))
    assert d <= np.linalg.norm(u - v) + 1e-12


@SLOW
@given(instances(), st.floats(0.01, 2.0), st.floats(1.1, 5.0))
def test_penalty_shrinks_with_gamma(inst, g1, ratio):
    X, w, _ = inst
    cfg = lambda g: SolverConfig(gamma=g, tol=1e-9)
    lo = penalty(ama_solve(X, w, cfg(g1)).U, w)
    hi = penalty(ama_solve(X, w, cfg(g1 * ratio)).U, w)
    assert hi <= lo + 1e-6 * (1 + lo)


@SLOW
@given(instances(), st.floats(0.01, 2.0))
def test_row_permutation_equivariance(inst, g):
    X, w, rng = inst
    perm = rng.permutation(X.shape[0])
    a = ama_solve(X, w, SolverConfig(gamma=g, tol=1e-10))
    b = ama_solve(X[perm], w, SolverConfig(gamma=g, tol=1e-10))
    assert np.allclose(a.U[perm], b.U, atol=1e-6)
    assert np.array_equal(extract_regions(a.V, 1e-4).labels, extract_regions(b.V, 1e-4).labels)


@SLOW
@given(instances(max_p=14), st.floats(0.05, 2.0))
def test_decomposition_matches_whole(inst, g):
    X, w, rng = inst
    w = w.copy()
    w[rng.integers(len(w))] = 0.0
    cfg = SolverConfig(gamma=g, tol=1e-9)
    a = ama_solve(X, w, cfg)
    b = solve_decomposed(X, w, cfg)
    assert np.allclose(a.U, b.U, atol=10 * cfg.tol)


@SLOW
@given(instances(), st.floats(0.05, 2.0), st.floats(0.1, 0.3))
def test_mm_descent_and_majorization(inst, g, frac):
    X, w, rng = inst
    mask = rng.random(X.shape) > frac
    mask[0] = True
    M = ProbeMatrix.from_array(X, mask=mask)
    s = mm_solve(M, w, g, MmConfig(outer_tol=1e-9))
    assert np.all(np.diff(s.objective_history) <= 1e-10)
    for _ in range(5):
        U = rng.normal(size=X.shape)
        Uk = rng.normal(size=X.shape)
        assert surrogate(M, U, Uk, w, g) >= missing_objective(M, U, w, g) - 1e-12
        assert surrogate(M, Uk, Uk, w, g) == missing_objective(M, Uk, w, g)


labels = st.lists(st.integers(0, 4), min_size=2, max_size=25)


@given(labels.flatmap(lambda a: st.tuples(st.just(a), st.lists(st.integers(0, 4), min_size=len(a), max_size=len(a)))))
def test_metric_identities(pair):
    a, b = map(np.array, pair)
    t = contingency(a, b)
    assert sum(pair_counts(t)) == math.comb(len(a), 2)
    relabel = {v: 10 - v for v in range(5)}
    s1 = evaluate(a, b)
    s2 = evaluate(np.array([relabel[v] for v in a]), b)
    assert all(math.isclose(s1[k], s2[k], abs_tol=1e-12) for k in s1)
    assert math.isclose(variation_of_information(t),
                        variation_of_information(contingency(b, a)), abs_tol=1e-12)


@given(arrays(float, (3, 12), elements=st.floats(-1, 1)), st.floats(0, 1), st.floats(0, 1))
def test_threshold_monotone_in_regions(V, t1, t2):
    lo, hi = sorted((t1, t2))
    assert extract_regions(V, hi).n_regions <= extract_regions(V, lo).n_regions


@given(st.integers(2, 200), st.floats(1, 50), st.integers(0, 1000))
def test_segments_partition(p, mean_len, seed):
    spans = gen_segments(p, mean_len=mean_len, seed=seed)
    assert spans[0].start == 0 and spans[-1].end == p - 1
    assert all(a.end + 1 == b.start for a, b in zip(spans, spans[1:]))
