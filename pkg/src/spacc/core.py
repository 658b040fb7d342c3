"""Domain types, input validation, spatial weights and chain decomposition."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

#: Decay rates (per basepair) for the two supported genomic technologies.
SIGMA_DEFAULTS = {"cnv": 0.00001, "methylation": 0.0002}

DEFAULT_ZERO_CUT = 0.01


class ValidationError(ValueError):
    """Raised when input data violates a structural requirement."""


@dataclass(frozen=True)
class ProbeMatrix:
    """Subjects-by-probes measurements for a single chromosome.

    ``mask`` is True where a value was observed. Construction does not
    check invariants; call :func:`validate` (or :meth:`check`) for that.
    """

    values: np.ndarray
    mask: np.ndarray
    positions: np.ndarray
    chromosome: str = ""
    probe_ids: Optional[List[str]] = None
    subject_ids: Optional[List[str]] = None

    @classmethod
    def from_array(cls, values, positions=None, mask=None, chromosome="",
                   probe_ids=None, subject_ids=None) -> "ProbeMatrix":
        """Build from a 2-D array; NaN entries are treated as missing."""
        values = np.array(values, dtype=float, ndmin=2)
        if mask is None:
            mask = ~np.isnan(values)
        mask = np.asarray(mask, dtype=bool)
        if positions is None:
            positions = np.arange(values.shape[1], dtype=float)
        positions = np.asarray(positions, dtype=float)
        return cls(values, mask, positions, chromosome,
                   None if probe_ids is None else list(probe_ids),
                   None if subject_ids is None else list(subject_ids))

    @property
    def shape(self):
        return self.values.shape

    @property
    def n_missing(self) -> int:
        return int(self.mask.size - self.mask.sum())

    @property
    def fully_observed(self) -> bool:
        return bool(self.mask.all())

    def get_probe_ids(self) -> List[str]:
        if self.probe_ids is not None:
            return list(self.probe_ids)
        return [f"probe{j + 1}" for j in range(self.values.shape[1])]

    def get_subject_ids(self) -> List[str]:
        if self.subject_ids is not None:
            return list(self.subject_ids)
        return [f"subject{i + 1}" for i in range(self.values.shape[0])]

    def with_mask(self, mask) -> "ProbeMatrix":
        return ProbeMatrix(self.values, np.asarray(mask, dtype=bool),
                           self.positions, self.chromosome, self.probe_ids,
                           self.subject_ids)

    def check(self) -> "ProbeMatrix":
        report = validate(self)
        if not report.ok:
            raise ValidationError("; ".join(report.messages))
        return self


@dataclass(frozen=True)
class WeightChain:
    """Penalty weights over the p - 1 adjacent probe pairs."""

    weights: np.ndarray
    sigma: float
    zero_cut: float = DEFAULT_ZERO_CUT

    def __len__(self):
        return len(self.weights)

    @property
    def n_zero(self) -> int:
        return int(np.count_nonzero(self.weights == 0))


@dataclass(frozen=True)
class SubproblemSpan:
    """A block of probes ``start..end`` (0-based, both ends inclusive)."""

    start: int
    end: int

    @property
    def slice(self) -> slice:
        return slice(self.start, self.end + 1)

    def __len__(self):
        return self.end - self.start + 1


@dataclass(frozen=True)
class RegionAssignment:
    """Region label per probe; labels are 0, 1, ... in genomic order."""

    labels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=int))

    def __len__(self):
        return len(self.labels)

    @property
    def n_regions(self) -> int:
        if len(self.labels) == 0:
            return 0
        return int(len(np.unique(self.labels)))

    @classmethod
    def from_breaks(cls, fused) -> "RegionAssignment":
        """Labels from a length p - 1 boolean vector of fused links."""
        fused = np.asarray(fused, dtype=bool)
        return cls(np.concatenate([[0], np.cumsum(~fused)]))

    @classmethod
    def from_spans(cls, spans: Sequence[SubproblemSpan]) -> "RegionAssignment":
        return cls(np.concatenate([np.full(len(s), g) for g, s in enumerate(spans)]))

    def spans(self) -> List[SubproblemSpan]:
        labels = self.labels
        starts = np.flatnonzero(np.r_[True, labels[1:] != labels[:-1]])
        ends = np.r_[starts[1:] - 1, len(labels) - 1]
        return [SubproblemSpan(int(a), int(b)) for a, b in zip(starts, ends)]


@dataclass
class ValidationReport:
    sorted: bool = True
    first_unsorted_index: Optional[int] = None
    missing_count: int = 0
    fully_missing_columns: List[int] = field(default_factory=list)
    nonfinite_observed: int = 0
    messages: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.messages

    def __str__(self):
        lines = [f"ok = {self.ok}", f"sorted = {self.sorted}",
                 f"missing_count = {self.missing_count}",
                 f"fully_missing_columns = {len(self.fully_missing_columns)}",
                 f"nonfinite_observed = {self.nonfinite_observed}"]
        return "\n".join(lines + [f"error: {m}" for m in self.messages])


def _first_unsorted(positions) -> Optional[int]:
    bad = np.flatnonzero(np.diff(positions) < 0)
    return int(bad[0] + 1) if bad.size else None


def validate(matrix: ProbeMatrix) -> ValidationReport:
    """Diagnose a probe matrix without raising."""
    report = ValidationReport()
    values, mask, pos = matrix.values, matrix.mask, matrix.positions
    if values.ndim != 2:
        report.messages.append(f"values must be 2-D, got {values.ndim}-D")
        return report
    n, p = values.shape
    if n < 1 or p < 2:
        report.messages.append(f"need at least 1 subject and 2 probes, got {n}x{p}")
    if mask.shape != values.shape:
        report.messages.append(f"mask shape {mask.shape} != values shape {values.shape}")
        return report
    if pos.shape != (p,):
        report.messages.append(f"expected {p} positions, got {pos.size}")
    else:
        idx = _first_unsorted(pos)
        if idx is not None:
            report.sorted = False
            report.first_unsorted_index = idx
            report.messages.append(f"positions not sorted at index {idx}")
        if not np.all(np.isfinite(pos)):
            report.messages.append("non-finite position")
    report.missing_count = int(mask.size - mask.sum())
    report.nonfinite_observed = int(np.count_nonzero(mask & ~np.isfinite(values)))
    if report.nonfinite_observed:
        report.messages.append(
            f"non-finite observed value ({report.nonfinite_observed} entries)")
    report.fully_missing_columns = [int(j) for j in np.flatnonzero(~mask.any(axis=0))]
    if report.fully_missing_columns:
        report.messages.append(
            f"fully missing columns: {report.fully_missing_columns[:10]}")
    return report


def compute_weights(positions, sigma: float,
                    zero_cut: float = DEFAULT_ZERO_CUT) -> WeightChain:
    """Exponentially decaying weights ``exp(-sigma * gap)``, hard-thresholded.

    Weights below ``zero_cut`` are set to exactly zero, which severs the
    chain at that link.
    """
    positions = np.asarray(positions, dtype=float)
    idx = _first_unsorted(positions)
    if idx is not None:
        raise ValidationError(f"positions not sorted at index {idx}")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if not 0 <= zero_cut < 1:
        raise ValueError("zero_cut must lie in [0, 1)")
    w = np.exp(-sigma * np.diff(positions))
    w[w < zero_cut] = 0.0
    return WeightChain(w, float(sigma), float(zero_cut))


def split_subproblems(weights) -> List[SubproblemSpan]:
    """Cut the probe chain at every exactly-zero weight."""
    w = np.asarray(getattr(weights, "weights", weights))
    cuts = np.flatnonzero(w == 0)
    starts = np.r_[0, cuts + 1]
    ends = np.r_[cuts, len(w)]
    return [SubproblemSpan(int(a), int(b)) for a, b in zip(starts, ends)]
