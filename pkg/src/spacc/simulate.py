"""Synthetic copy-number, methylation and region-EWAS datasets with known
region structure."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import ndtr

from .core import ProbeMatrix, RegionAssignment, SubproblemSpan


class SimulationError(RuntimeError):
    pass


def gen_segments(p: int, positions=None, mean_len: float = 10.0, seed=None,
                 n_segments: Optional[int] = None) -> List[SubproblemSpan]:
    """Random contiguous partition of ``p`` probes.

    Every link between neighbouring probes is a break with probability
    ``1 / mean_len``, giving geometric segment lengths. With ``n_segments``
    the break count is fixed and the breaks are placed uniformly, which is
    the same process conditioned on the number of segments. ``positions``
    is accepted for interface symmetry; breaks depend only on probe order.
    """
    if mean_len < 1:
        raise ValueError("mean_len must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if n_segments is not None:
        if not 1 <= n_segments <= p:
            raise ValueError("n_segments must lie in [1, p]")
        breaks = np.sort(rng.choice(p - 1, size=n_segments - 1, replace=False))
    else:
        breaks = np.flatnonzero(rng.random(p - 1) < 1.0 / mean_len)
    starts = np.r_[0, breaks + 1]
    ends = np.r_[breaks, p - 1]
    return [SubproblemSpan(int(a), int(b)) for a, b in zip(starts, ends)]


def cnv_positions(p: int, rng, mean_gap: float = 10_000.0) -> np.ndarray:
    """Array-CGH-like probe coordinates with gamma-distributed spacing."""
    gaps = rng.gamma(4.0, mean_gap / 4.0, size=p - 1)
    return np.round(np.r_[0.0, np.cumsum(gaps)] + 1_000_000.0)


def methylation_positions(p: int, rng, mean_gap: float = 250.0) -> np.ndarray:
    """CpG-like coordinates: short, irregular gaps."""
    gaps = 20.0 + rng.exponential(mean_gap - 20.0, size=p - 1)
    return np.round(np.r_[0.0, np.cumsum(gaps)] + 1_000_000.0)


def _labels(spans, p) -> RegionAssignment:
    labels = RegionAssignment.from_spans(spans)
    if len(labels) != p:
        raise ValueError("segments must partition the probes")
    return labels


def _resolve_layout(params, rng, default_positions):
    p = params.p
    positions = params.positions
    if positions is None:
        positions = default_positions(p, rng)
    positions = np.asarray(positions, dtype=float)
    segments = params.segments
    if segments is None:
        segments = gen_segments(p, positions, params.mean_len, rng, params.n_segments)
    return positions, list(segments), _labels(segments, p)


@dataclass(frozen=True)
class CnvSimParams:
    n: int = 20
    p: int = 500
    positions: Optional[np.ndarray] = None
    segments: Optional[Sequence[SubproblemSpan]] = None
    q: float = 0.7
    a: float = 0.2
    b: float = 0.4
    sigma: float = 0.1
    base_mean: Optional[np.ndarray] = None
    seed: Optional[int] = 0
    mean_len: float = 50.0
    n_segments: Optional[int] = None

    def __post_init__(self):
        if not 0 <= self.q <= 1:
            raise ValueError("q must lie in [0, 1]")
        if not 0 < self.a <= self.b:
            raise ValueError("need 0 < a <= b")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")


def simulate_cnv(params: CnvSimParams):
    """``X_ij = mu_j + s_ig * m_ig + noise`` with ``g`` the region of probe ``j``.

    ``s_ig`` is Bernoulli(q) and ``m_ig`` has a uniform random sign and
    magnitude Uniform(a, b).
    """
    rng = np.random.default_rng(params.seed)
    positions, segments, truth = _resolve_layout(params, rng, cnv_positions)
    n, p, G = params.n, params.p, len(segments)
    mu = np.zeros(p) if params.base_mean is None else np.asarray(params.base_mean, float)
    s = rng.random((n, G)) < params.q
    sign = np.where(rng.random((n, G)) < 0.5, -1.0, 1.0)
    m = sign * rng.uniform(params.a, params.b, size=(n, G))
    shift = (s * m)[:, truth.labels]
    X = mu + shift + params.sigma * rng.standard_normal((n, p))
    return ProbeMatrix.from_array(X, positions), truth


@dataclass(frozen=True)
class MethSimParams:
    n: int = 50
    p: int = 300
    positions: Optional[np.ndarray] = None
    segments: Optional[Sequence[SubproblemSpan]] = None
    sigma_w: float = 100_000.0
    sigma_b: float = 10.0
    seed: Optional[int] = 0
    mean_len: float = 20.0
    n_segments: Optional[int] = None

    def __post_init__(self):
        if not (self.sigma_w > 0 and self.sigma_b > 0):
            raise ValueError("sigma_w and sigma_b must be positive")


def methylation_covariance(positions, labels, sigma_w: float, sigma_b: float) -> np.ndarray:
    """Two-rate exponential kernel: ``sigma_w`` within regions, ``sigma_b`` across."""
    positions = np.asarray(positions, dtype=float)
    labels = np.asarray(labels)
    d = np.abs(positions[:, None] - positions[None, :])
    same = labels[:, None] == labels[None, :]
    return np.where(same, np.exp(-d / sigma_w), np.exp(-d / sigma_b))


def repair_psd(S) -> np.ndarray:
    """Clip negative eigenvalues to zero and re-symmetrise."""
    try:
        vals, vecs = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise SimulationError(f"PSD repair failed: {exc}") from exc
    out = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
    return 0.5 * (out + out.T)


def simulate_methylation(params: MethSimParams):
    """Beta-values ``Phi(z)`` with ``z_i ~ N(0, Sigma)`` from the two-rate kernel."""
    rng = np.random.default_rng(params.seed)
    positions, segments, truth = _resolve_layout(params, rng, methylation_positions)
    S = methylation_covariance(positions, truth.labels, params.sigma_w, params.sigma_b)
    try:
        vals, vecs = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise SimulationError(f"PSD repair failed: {exc}") from exc
    root = vecs * np.sqrt(np.clip(vals, 0.0, None))
    z = rng.standard_normal((params.n, params.p)) @ root.T
    X = np.clip(ndtr(z), np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    return ProbeMatrix.from_array(X, positions), truth


@dataclass(frozen=True)
class RewasSimParams:
    n: int = 94
    p: int = 2000
    positions: Optional[np.ndarray] = None
    segments: Optional[Sequence[SubproblemSpan]] = None
    causal_regions: Optional[Sequence[int]] = None
    d: int = 5
    beta_seed: float = 1.0
    betas: Optional[Sequence[float]] = None
    noise_sigma: float = 0.1
    concentration: float = 20.0
    seed: Optional[int] = 0
    mean_len: float = 3.0
    n_segments: Optional[int] = None

    def __post_init__(self):
        if self.d < 1 and self.causal_regions is None:
            raise ValueError("need at least one causal region")
        if not self.beta_seed > 0:
            raise ValueError("beta_seed must be positive")
        if not self.concentration > 0:
            raise ValueError("concentration must be positive")


@dataclass
class RewasTruth:
    regions: RegionAssignment
    causal_regions: np.ndarray
    betas: np.ndarray
    region_means: np.ndarray


def simulate_rewas(params: RewasSimParams):
    """Region means ~ Beta(2, 2), probes ~ Beta around their region mean and a
    linear response in a few causal region means.

    Returns ``(matrix, y, truth)``.
    """
    rng = np.random.default_rng(params.seed)
    positions, segments, truth = _resolve_layout(params, rng, methylation_positions)
    n, G = params.n, len(segments)
    if params.causal_regions is None:
        causal = np.sort(rng.choice(G, size=min(params.d, G), replace=False))
    else:
        causal = np.asarray(params.causal_regions, dtype=int)
    if params.betas is None:
        # spread is sqrt(beta_seed), read as a standard deviation
        betas = rng.normal(params.beta_seed, np.sqrt(params.beta_seed), size=len(causal))
    else:
        betas = np.asarray(params.betas, dtype=float)
        if betas.shape != causal.shape:
            raise ValueError("need one coefficient per causal region")
    means = rng.beta(2.0, 2.0, size=(n, G))
    probe_means = means[:, truth.labels]
    k = params.concentration
    X = rng.beta(k * probe_means, k * (1.0 - probe_means))
    y = means[:, causal] @ betas + params.noise_sigma * rng.standard_normal(n)
    return (ProbeMatrix.from_array(X, positions), y,
            RewasTruth(truth, causal, betas, means))


def piecewise_constant(n: int = 10, p: int = 60, n_regions: int = 3,
                       sigma: float = 0.1, seed=0, spread: float = 1.0):
    """Equal-length regions with per-subject levels ``U(-spread, spread)``
    plus iid Gaussian noise; unit-spaced positions.

    Returns ``(matrix, truth)``.
    """
    if not 1 <= n_regions <= p:
        raise ValueError("n_regions must lie in [1, p]")
    rng = np.random.default_rng(seed)
    edges = np.linspace(0, p, n_regions + 1).round().astype(int)
    spans = [SubproblemSpan(int(a), int(b) - 1) for a, b in zip(edges[:-1], edges[1:])]
    truth = _labels(spans, p)
    levels = rng.uniform(-spread, spread, size=(n, n_regions))
    X = levels[:, truth.labels] + sigma * rng.standard_normal((n, p))
    return ProbeMatrix.from_array(X, np.arange(p, dtype=float)), truth


PRESETS = {
    "cnv-easy": CnvSimParams(q=0.7, a=0.2, b=0.4, sigma=0.1, mean_len=50.0),
    "cnv-hard": CnvSimParams(q=0.5, a=0.05, b=0.3, sigma=0.1, mean_len=25.0),
    "meth-high": MethSimParams(sigma_w=100_000.0, sigma_b=10.0),
    "meth-medium": MethSimParams(sigma_w=100_000.0, sigma_b=100.0),
    "meth-low": MethSimParams(sigma_w=100_000.0, sigma_b=1_000.0),
    "rewas": RewasSimParams(),
}

PRESET_KIND = {"cnv-easy": "cnv", "cnv-hard": "cnv", "meth-high": "methylation",
               "meth-medium": "methylation", "meth-low": "methylation",
               "rewas": "methylation"}


def preset(name: str, **overrides):
    try:
        base = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(base, **overrides)


def simulate(params):
    """Dispatch on the parameter type."""
    if isinstance(params, CnvSimParams):
        return simulate_cnv(params)
    if isinstance(params, MethSimParams):
        return simulate_methylation(params)
    if isinstance(params, RewasSimParams):
        return simulate_rewas(params)
    raise TypeError(f"unsupported parameters {type(params).__name__}")
