"""Entry-wise K-fold cross-validation for gamma, noise-scaled thresholding
and the end-to-end region detection pipeline."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from .core import (DEFAULT_ZERO_CUT, SIGMA_DEFAULTS, ProbeMatrix,
                   RegionAssignment, ValidationError, WeightChain,
                   compute_weights, split_subproblems, validate)
from .missing import MmConfig, initial_fill, mm_solve
from .solver import SolverState, extract_regions

logger = logging.getLogger(__name__)

MAD_SCALE = 0.6745


@dataclass(frozen=True)
class FoldPlan:
    """``folds[k]`` is a ``(rows, cols)`` pair of index arrays."""

    folds: List[tuple]
    seed: Optional[int] = None

    @property
    def K(self) -> int:
        return len(self.folds)

    def sizes(self) -> List[int]:
        return [len(r) for r, _ in self.folds]


@dataclass
class CvTable:
    gamma_grid: np.ndarray
    mse: np.ndarray  # K x T, NaN marks a failed cell
    n_regions: np.ndarray  # K x T, exact-fusion region counts per fit
    gamma_star: Optional[float] = None
    sigma_hat: Optional[float] = None
    threshold: Optional[float] = None

    def mean_mse(self) -> np.ndarray:
        return np.nanmean(self.mse, axis=0)

    def se_mse(self) -> np.ndarray:
        valid = np.isfinite(self.mse).sum(axis=0)
        sd = np.nanstd(self.mse, axis=0, ddof=1) if self.mse.shape[0] > 1 else np.zeros(self.mse.shape[1])
        return sd / np.sqrt(np.maximum(valid, 1))

    def rows(self):
        for t, g in enumerate(self.gamma_grid):
            for k in range(self.mse.shape[0]):
                yield float(g), k, float(self.mse[k, t])


class PipelineError(RuntimeError):
    pass


def make_folds(mask, K: int = 5, seed: Optional[int] = 0) -> FoldPlan:
    """Randomly split the observed entries into ``K`` near-equal folds."""
    mask = np.asarray(mask, dtype=bool)
    rows, cols = np.nonzero(mask)
    if K < 2:
        raise ValueError("need at least 2 folds")
    if len(rows) < K:
        raise ValueError(f"{K} folds requested but only {len(rows)} observed entries")
    perm = np.random.default_rng(seed).permutation(len(rows))
    folds = [(rows[idx], cols[idx]) for idx in np.array_split(perm, K)]
    return FoldPlan(folds, seed)


def estimate_noise(X: ProbeMatrix) -> float:
    """Robust noise scale from within-subject adjacent differences."""
    both = X.mask[:, 1:] & X.mask[:, :-1]
    if both.sum() < 2:
        raise ValueError("need at least 2 observed adjacent pairs to estimate noise")
    d = np.abs(np.diff(X.values, axis=1))[both]
    return float(np.median(d) / (MAD_SCALE * math.sqrt(2.0)))


def full_fusion_gamma(values, weights) -> float:
    """Smallest gamma at which every positive-weight span fuses completely.

    Full fusion is optimal iff each dual column ``Lambda_i``, the running sum
    of ``(row mean - X_j)`` over the span, satisfies ``||Lambda_i|| <= gamma * w_i``.
    """
    values = np.asarray(values, dtype=float)
    w = np.asarray(getattr(weights, "weights", weights), dtype=float)
    gmax = 0.0
    for s in split_subproblems(w):
        if len(s) < 2:
            continue
        block = values[:, s.slice]
        lam = np.cumsum(block.mean(axis=1, keepdims=True) - block, axis=1)[:, :-1]
        ratio = np.linalg.norm(lam, axis=0) / w[s.start:s.end]
        gmax = max(gmax, float(ratio.max()))
    return gmax


def default_gamma_grid(X: ProbeMatrix, weights, n_gammas: int = 50,
                       ratio: float = 1e-4) -> np.ndarray:
    """Log-spaced grid from ``ratio * gamma_max`` to ``gamma_max``."""
    gmax = full_fusion_gamma(initial_fill(X), weights)
    if gmax <= 0:
        return np.array([1.0])
    return np.geomspace(ratio * gmax, gmax, n_gammas)


def _fold_path(args):
    X, w, grid, rows, cols, mm_config = args
    train = X.mask.copy()
    train[rows, cols] = False
    Xk = X.with_mask(train)
    truth = X.values[rows, cols]
    mse = np.full(len(grid), np.nan)
    nreg = np.zeros(len(grid), dtype=int)
    state = None
    for t, g in enumerate(grid):
        try:
            # warm start along the increasing grid; dual stays feasible
            state = mm_solve(Xk, w, g, mm_config, init=state, allow_empty_columns=True)
            resid = state.U[rows, cols] - truth
            mse[t] = float(np.mean(resid ** 2))
            nreg[t] = extract_regions(state.V, 0.0).n_regions
        except Exception as exc:  # recorded per cell, grid continues
            logger.warning("CV cell gamma=%g failed: %s", g, exc)
            state = None
    return mse, nreg


def cross_validate(X: ProbeMatrix, weights, gamma_grid, plan: FoldPlan,
                   mm_config: Optional[MmConfig] = None,
                   worker_count: int = 1) -> CvTable:
    """Held-out mean squared error for every (fold, gamma) cell.

    Each fold's entries are hidden in addition to the truly missing ones and
    the model is refit with :func:`mm_solve`; the error is averaged over the
    fold's entries.
    """
    grid = np.asarray(gamma_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("gamma grid must be a non-empty vector")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("gamma grid must be strictly increasing")
    mm_config = mm_config or MmConfig()
    w = np.asarray(getattr(weights, "weights", weights), dtype=float)
    tasks = [(X, w, grid, r, c, mm_config) for r, c in plan.folds]
    if worker_count > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=worker_count) as pool:
            results = list(pool.map(_fold_path, tasks))
    else:
        results = [_fold_path(t) for t in tasks]
    mse = np.vstack([r[0] for r in results])
    nreg = np.vstack([r[1] for r in results])
    return CvTable(grid, mse, nreg)


def noise_threshold(sigma_hat: float, n: int, p: int, log_base: float = math.e) -> float:
    return math.sqrt(math.log(p, log_base) / n) * sigma_hat


def select_and_threshold(table: CvTable, n: int, p: int,
                         sigma_hat: Optional[float] = None,
                         log_base: float = math.e):
    """Pick the gamma with lowest mean held-out error (ties go to the larger
    gamma) and the fusion threshold ``sqrt(log(p) / n) * sigma_hat``.

    Fills ``table.gamma_star`` and ``table.threshold`` and returns both.
    """
    if sigma_hat is None:
        sigma_hat = table.sigma_hat
    if sigma_hat is None:
        raise ValueError("sigma_hat not supplied and not stored on the table")
    valid = np.isfinite(table.mse).any(axis=0)
    if not valid.any():
        raise PipelineError("every cross-validation cell failed")
    means = np.full(valid.shape, np.inf)
    means[valid] = np.nanmean(table.mse[:, valid], axis=0)
    best = means.min()
    ties = np.flatnonzero(means <= best + 1e-12 * abs(best) + 1e-300)
    table.gamma_star = float(table.gamma_grid[ties[-1]])
    table.sigma_hat = float(sigma_hat)
    table.threshold = noise_threshold(sigma_hat, n, p, log_base)
    return table.gamma_star, table.threshold


@dataclass(frozen=True)
class PipelineConfig:
    kind: str = "custom"
    sigma: Optional[float] = None
    zero_cut: float = DEFAULT_ZERO_CUT
    gamma_grid: Optional[Sequence[float]] = None
    n_gammas: int = 50
    gamma_ratio: float = 1e-4
    n_folds: int = 5
    seed: Optional[int] = 0
    mm: MmConfig = field(default_factory=MmConfig)
    cv_tol: Optional[float] = 1e-3
    sigma_hat: Optional[float] = None
    threshold: Optional[float] = None
    log_base: float = math.e
    fusion_rule: str = "max"
    worker_count: int = 1

    def cv_mm(self) -> MmConfig:
        """MM settings for CV cells; only the ranking of gammas matters there."""
        if self.cv_tol is None:
            return self.mm
        inner = replace(self.mm.inner, tol=max(self.cv_tol, self.mm.inner.tol))
        return replace(self.mm, inner=inner,
                       outer_tol=max(0.1 * self.cv_tol, self.mm.outer_tol))

    def decay_rate(self) -> float:
        if self.sigma is not None:
            return float(self.sigma)
        if self.kind in SIGMA_DEFAULTS:
            return SIGMA_DEFAULTS[self.kind]
        raise ValueError(f"kind {self.kind!r} has no default sigma; set sigma")


@dataclass
class PipelineResult:
    regions: RegionAssignment
    centroids: np.ndarray
    table: CvTable
    state: SolverState
    weights: WeightChain


@contextmanager
def _stage(name):
    try:
        yield
    except Exception as exc:
        try:
            err = type(exc)(f"{name}: {exc}")
        except Exception:
            err = PipelineError(f"{name}: {exc}")
        raise err from exc


def pipeline(X: ProbeMatrix, config: Optional[PipelineConfig] = None) -> PipelineResult:
    """Weights, CV over gamma, noise threshold, final fit and regions."""
    config = config or PipelineConfig()
    with _stage("validate"):
        report = validate(X)
        if not report.ok:
            raise ValidationError("; ".join(report.messages))
    with _stage("weights"):
        weights = compute_weights(X.positions, config.decay_rate(), config.zero_cut)
    with _stage("cross-validation"):
        if config.gamma_grid is None:
            grid = default_gamma_grid(X, weights, config.n_gammas, config.gamma_ratio)
        else:
            grid = np.asarray(config.gamma_grid, dtype=float)
        plan = make_folds(X.mask, config.n_folds, config.seed)
        table = cross_validate(X, weights, grid, plan, config.cv_mm(), config.worker_count)
    with _stage("threshold"):
        sigma_hat = config.sigma_hat if config.sigma_hat is not None else estimate_noise(X)
        n, p = X.shape
        gamma_star, threshold = select_and_threshold(table, n, p, sigma_hat, config.log_base)
        if config.threshold is not None:
            threshold = table.threshold = float(config.threshold)
    with _stage("final fit"):
        state = mm_solve(X, weights, gamma_star, config.mm, config.worker_count)
    regions = extract_regions(state.V, threshold, config.fusion_rule)
    return PipelineResult(regions, state.U, table, state, weights)
