import math

import numpy as np
import pytest

from spacc.core import (ProbeMatrix, RegionAssignment, SubproblemSpan, ValidationError,
                        compute_weights, split_subproblems, validate)


def test_zero_gap_gives_unit_weight():
    w = compute_weights([10, 10, 20], sigma=0.3)
    assert w.weights[0] == 1.0


def test_methylation_default_weight():
    w = compute_weights([0, 5000], sigma=2e-4)
    assert w.weights[0] == pytest.approx(math.exp(-1), abs=1e-12)


def test_cnv_default_weight_not_cut():
    w = compute_weights([0, 100], sigma=1e-5, zero_cut=0.01)
    assert w.weights[0] == pytest.approx(math.exp(-0.001))
    assert w.n_zero == 0


def test_small_weights_are_cut_to_zero():
    w = compute_weights([0, 1, 100_000], sigma=1e-4, zero_cut=0.01)
    assert w.weights[1] == 0.0 and w.weights[0] > 0.99


def test_unsorted_positions_name_index():
    with pytest.raises(ValidationError, match="index 2"):
        compute_weights([0, 5, 3, 9], sigma=1e-3)


def test_split_at_zeros():
    spans = split_subproblems(np.array([0.9, 0, 0.8, 0]))
    assert spans == [SubproblemSpan(0, 1), SubproblemSpan(2, 3), SubproblemSpan(4, 4)]


def test_split_all_positive_and_all_zero():
    assert split_subproblems(np.ones(6)) == [SubproblemSpan(0, 6)]
    assert len(split_subproblems(np.zeros(4))) == 5


def test_validate_ok():
    r = validate(ProbeMatrix.from_array(np.ones((3, 4))))
    assert r.ok and r.missing_count == 0


def test_validate_nonfinite_observed():
    X = np.ones((2, 3))
    X[0, 1] = np.nan
    m = ProbeMatrix.from_array(X, mask=np.ones((2, 3), bool))
    r = validate(m)
    assert not r.ok and "non-finite observed value" in str(r)


def test_validate_unsorted_and_empty_column():
    X = np.ones((2, 3))
    X[:, 2] = np.nan
    r = validate(ProbeMatrix.from_array(X, positions=[0, 10, 5]))
    assert not r.sorted and r.first_unsorted_index == 2
    assert r.fully_missing_columns == [2]
    with pytest.raises(ValidationError):
        ProbeMatrix.from_array(X, positions=[0, 10, 5]).check()


def test_validate_too_few_probes():
    assert not validate(ProbeMatrix.from_array(np.ones((3, 1)))).ok


def test_region_assignment_roundtrip():
    r = RegionAssignment.from_breaks([True, False, True, True])
    assert r.labels.tolist() == [0, 0, 1, 1, 1]
    assert r.n_regions == 2
    assert RegionAssignment.from_spans(r.spans()).labels.tolist() == r.labels.tolist()


def test_default_ids():
    m = ProbeMatrix.from_array(np.zeros((2, 3)))
    assert m.get_probe_ids() == ["probe1", "probe2", "probe3"]
    assert m.get_subject_ids() == ["subject1", "subject2"]
