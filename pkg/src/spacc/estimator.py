"""Scikit-learn style wrapper: cluster probes (columns) into spatial regions."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .core import DEFAULT_ZERO_CUT, ProbeMatrix
from .cv import PipelineConfig, pipeline
from .missing import MmConfig
from .solver import SolverConfig


class SpatialConvexClustering(TransformerMixin, BaseEstimator):
    """Group neighbouring probes whose profiles across subjects agree.

    Rows of ``X`` are subjects and columns are probes ordered by genomic
    position; NaN marks a missing entry. Like ``FeatureAgglomeration`` the
    clustering acts on features: :meth:`transform` returns one column per
    detected region holding the region's mean centroid.

    With ``gamma=None`` the fusion strength is chosen by entry-wise
    cross-validation over a log-spaced grid, otherwise the given value
    is used directly (still thresholded unless ``threshold`` is set).

    Attributes
    ----------
    labels_ : ndarray of shape (n_probes,)
        Region index of each probe, 0-based and increasing along the chain.
    centroids_ : ndarray of shape (n_subjects, n_probes)
        Fitted centroids; missing entries of ``X`` are imputed here.
    differences_ : ndarray of shape (n_subjects, n_probes - 1)
        Neighbour differences ``V`` before thresholding.
    gamma_, threshold_, sigma_hat_ : float
    weights_ : ndarray of shape (n_probes - 1,)
    cv_table_ : CvTable
    n_regions_ : int
    """

    def __init__(self, gamma=None, kind="custom", sigma=None, zero_cut=DEFAULT_ZERO_CUT,
                 n_gammas=50, gamma_ratio=1e-4, n_folds=5, threshold=None,
                 nu=0.25, tol=1e-6, max_iter=20000, outer_tol=1e-7,
                 cv_tol=1e-3, fusion_rule="max", random_state=0, n_jobs=1):
        self.gamma = gamma
        self.kind = kind
        self.sigma = sigma
        self.zero_cut = zero_cut
        self.n_gammas = n_gammas
        self.gamma_ratio = gamma_ratio
        self.n_folds = n_folds
        self.threshold = threshold
        self.nu = nu
        self.tol = tol
        self.max_iter = max_iter
        self.outer_tol = outer_tol
        self.cv_tol = cv_tol
        self.fusion_rule = fusion_rule
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _config(self) -> PipelineConfig:
        inner = SolverConfig(nu=self.nu, tol=self.tol, max_iter=self.max_iter)
        grid = None if self.gamma is None else [float(self.gamma)]
        return PipelineConfig(
            kind=self.kind, sigma=self.sigma, zero_cut=self.zero_cut,
            gamma_grid=grid, n_gammas=self.n_gammas, gamma_ratio=self.gamma_ratio,
            n_folds=self.n_folds, seed=self.random_state,
            mm=MmConfig(outer_tol=self.outer_tol, inner=inner), cv_tol=self.cv_tol,
            threshold=self.threshold, fusion_rule=self.fusion_rule,
            worker_count=self.n_jobs or 1)

    def fit(self, X, y=None, positions=None):
        """Fit on ``X`` (subjects x probes). ``positions`` defaults to 0..p-1."""
        if isinstance(X, ProbeMatrix):
            matrix = X
        else:
            values = check_array(X, dtype=np.float64, ensure_all_finite="allow-nan",
                                 ensure_min_features=2)
            matrix = ProbeMatrix.from_array(values, positions)
        self.n_features_in_ = matrix.shape[1]
        result = pipeline(matrix, self._config())
        self.labels_ = result.regions.labels
        self.n_regions_ = result.regions.n_regions
        self.centroids_ = result.centroids
        self.differences_ = result.state.V
        self.weights_ = result.weights.weights
        self.cv_table_ = result.table
        self.gamma_ = result.table.gamma_star
        self.threshold_ = result.table.threshold
        self.sigma_hat_ = result.table.sigma_hat
        return self

    def transform(self, X):
        """Average each row over the probes of every region (NaN-aware)."""
        check_is_fitted(self, "labels_")
        X = check_array(X, dtype=np.float64, ensure_all_finite="allow-nan")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} probes, expected {self.n_features_in_}")
        obs = ~np.isnan(X)
        sums = np.zeros((X.shape[0], self.n_regions_))
        counts = np.zeros_like(sums)
        np.add.at(sums.T, self.labels_, np.where(obs, X, 0.0).T)
        np.add.at(counts.T, self.labels_, obs.T.astype(float))
        with np.errstate(invalid="ignore", divide="ignore"):
            return sums / counts

    def inverse_transform(self, Xt):
        """Broadcast region values back onto their probes."""
        check_is_fitted(self, "labels_")
        Xt = check_array(Xt, dtype=np.float64, ensure_all_finite="allow-nan")
        return Xt[:, self.labels_]
