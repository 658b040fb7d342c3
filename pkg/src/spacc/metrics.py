"""Pair-counting and information-theoretic comparison of two partitions."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray  # truth clusters x estimated clusters

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _labels(x):
    return np.asarray(getattr(x, "labels", x))


def contingency(truth, est) -> ContingencyTable:
    """Intersection counts ``|c_g & c'_h|`` between two labelings."""
    a, b = _labels(truth), _labels(est)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"label vectors differ in shape: {a.shape} vs {b.shape}")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    counts = np.zeros((ia.max(initial=-1) + 1, ib.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(counts, (ia, ib), 1)
    return ContingencyTable(counts)


def _comb2(x) -> int:
    return sum(int(v) * (int(v) - 1) // 2 for v in np.ravel(x))


def pair_counts(table: ContingencyTable):
    """``(a, b, c, d)``: pairs together in both / truth only / estimate only / neither."""
    both = _comb2(table.counts)
    in_truth = _comb2(table.row_totals)
    in_est = _comb2(table.col_totals)
    total = table.total * (table.total - 1) // 2
    b = in_truth - both
    c = in_est - both
    return both, b, c, total - both - b - c


def _check(table):
    if table.total < 2:
        raise ValueError("need at least 2 items to count pairs")


def rand_index(table: ContingencyTable) -> float:
    _check(table)
    a, b, c, d = pair_counts(table)
    return (a + d) / (a + b + c + d)


def jaccard(table: ContingencyTable) -> float:
    """``a / (a + b + c)``; 1 when no pair is together in either partition."""
    _check(table)
    a, b, c, _ = pair_counts(table)
    return 1.0 if a + b + c == 0 else a / (a + b + c)


def adjusted_rand(table: ContingencyTable) -> float:
    _check(table)
    a, b, c, d = pair_counts(table)
    total = a + b + c + d
    rows, cols = a + b, a + c
    expected = rows * cols / total
    top = 0.5 * (rows + cols)
    if top == expected:
        return 1.0
    return (a - expected) / (top - expected)


def variation_of_information(table: ContingencyTable, base: float = math.e) -> float:
    """``H(C) + H(C') - 2 I(C, C')`` from the table proportions."""
    # written as H(C | C') + H(C' | C) so identical partitions give exactly 0
    N = table.total
    P = table.counts / N
    pr, pc = P.sum(axis=1), P.sum(axis=0)
    g, h = np.nonzero(P)
    p = P[g, h]
    vi = max(float(-np.sum(p * (np.log(p / pr[g]) + np.log(p / pc[h])))), 0.0)
    return float(vi / math.log(base))


METRIC_NAMES = ("rand", "adjusted_rand", "jaccard", "variation_of_information")


def evaluate(truth, est, base: float = math.e) -> dict:
    """All four scores, keyed by name in a fixed order."""
    t = contingency(truth, est)
    return {
        "rand": rand_index(t),
        "adjusted_rand": adjusted_rand(t),
        "jaccard": jaccard(t),
        "variation_of_information": variation_of_information(t, base),
    }
