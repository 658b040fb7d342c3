"""Text formats: probe-matrix TSV, region / truth / response files and the
CSV reports written by the command-line tools."""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .core import ProbeMatrix, RegionAssignment, ValidationError

MISSING_TOKENS = {"", "NA", "na", "NaN", "nan"}


def fmt(x) -> str:
    """Shortest round-trip text for a float; integers stay integral."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "NA"
    if x == 0.0:
        return "0"  # folds -0.0 so outputs do not depend on sign of zero
    return repr(x)


def _fmt_position(x) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


def _rows(path) -> List[List[str]]:
    with open(path, newline="") as fh:
        return [row for row in csv.reader(fh, delimiter="\t") if row]


def read_matrix(path, chromosome: str = "") -> ProbeMatrix:
    """Parse the probe-matrix TSV.

    Row 1 holds probe ids and row 2 integer positions; each later row is a
    subject id followed by ``p`` values, with ``NA`` or an empty field for
    missing. The first two rows may carry a leading label cell (as written
    by :func:`write_matrix`) or start directly with the first probe.
    """
    rows = _rows(path)
    if len(rows) < 2:
        raise ValidationError(f"{path}: need probe-id and position header rows")
    ids, pos = rows[0], rows[1]
    width = max((len(r) for r in rows[2:]), default=len(ids) + 1)
    if len(ids) == width:
        ids = ids[1:]
    if len(pos) == width:
        pos = pos[1:]
    p = len(ids)
    if len(pos) != p:
        raise ValidationError(f"{path}: {p} probe ids but {len(pos)} positions")
    try:
        positions = np.array([float(v) for v in pos])
    except ValueError as exc:
        raise ValidationError(f"{path}: bad position ({exc})") from None
    subjects, values = [], []
    for lineno, row in enumerate(rows[2:], start=3):
        if len(row) != p + 1:
            raise ValidationError(f"{path}:{lineno}: expected {p + 1} fields, got {len(row)}")
        subjects.append(row[0])
        try:
            values.append([np.nan if v.strip() in MISSING_TOKENS else float(v) for v in row[1:]])
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
    X = np.array(values, dtype=float).reshape(len(values), p)
    return ProbeMatrix.from_array(X, positions, chromosome=chromosome,
                                  probe_ids=tuple(ids), subject_ids=tuple(subjects))


def write_matrix(path, values, probe_ids: Sequence[str], positions,
                 subject_ids: Sequence[str], mask=None) -> None:
    """Write ``values`` in the input layout; entries with ``mask`` false become NA."""
    values = np.asarray(values, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["probe_id", *probe_ids])
        w.writerow(["position", *(_fmt_position(x) for x in positions)])
        for i, sid in enumerate(subject_ids):
            row = values[i]
            if mask is not None:
                row = np.where(mask[i], row, np.nan)
            w.writerow([sid, *(fmt(v) for v in row)])


def write_probe_matrix(path, X: ProbeMatrix) -> None:
    write_matrix(path, X.values, X.get_probe_ids(), X.positions, X.get_subject_ids(), X.mask)


def write_regions(path, probe_ids, positions, regions: RegionAssignment,
                  header=("probe_id", "position", "region_label")) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(header)
        for pid, x, lab in zip(probe_ids, positions, regions.labels):
            w.writerow([pid, _fmt_position(x), int(lab)])


def write_truth(path, probe_ids, regions: RegionAssignment) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["probe_id", "true_region_label"])
        for pid, lab in zip(probe_ids, regions.labels):
            w.writerow([pid, int(lab)])


def read_labels(path) -> Dict[str, str]:
    """Probe id -> label from a region or truth file (label is the last column)."""
    rows = _rows(path)
    if not rows:
        raise ValidationError(f"{path}: empty label file")
    header, body = rows[0], rows[1:]
    if len(header) < 2 or not body:
        raise ValidationError(f"{path}: expected a header and at least one probe")
    out = {}
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise ValidationError(f"{path}:{lineno}: expected {len(header)} fields")
        out[row[0]] = row[-1]
    return out


def aligned_labels(truth: Dict[str, str], est: Dict[str, str]):
    """Label vectors over the truth file's probe order; probe sets must match."""
    if set(truth) != set(est):
        missing = sorted(set(truth) ^ set(est))[:5]
        raise ValidationError(f"label files cover different probes (e.g. {missing})")
    keys = list(truth)
    return np.array([truth[k] for k in keys]), np.array([est[k] for k in keys])


def write_response(path, subject_ids, y) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["subject_id", "y"])
        for sid, v in zip(subject_ids, y):
            w.writerow([sid, fmt(v)])


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_summary(path, items: Iterable[tuple]) -> None:
    """``key = value`` lines, in the order given."""
    with open(path, "w") as fh:
        for k, v in items:
            fh.write(f"{k} = {fmt(v) if isinstance(v, (float, np.floating)) else v}\n")


def read_config(path) -> Dict[str, str]:
    """``key = value`` text; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out
