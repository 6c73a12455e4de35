"""Performance tables, criterion scales and stratified fold plans."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

GAIN = "gain"
COST = "cost"


class DatasetError(ValueError):
    """Raised for malformed input data or unusable criteria."""


@dataclass(frozen=True)
class PerformanceTable:
    """Alternatives x criteria performance matrix with ordinal labels 1..q.

    ``label_values`` records the original label of each class index so the
    mapping can be stored alongside a model.
    """

    alternatives: tuple[str, ...]
    performances: np.ndarray
    labels: np.ndarray
    q: int
    criterion_names: tuple[str, ...]
    label_values: tuple = field(default=())

    def __post_init__(self):
        perf = np.array(self.performances, dtype=float)
        labels = np.array(self.labels, dtype=int)
        if perf.ndim != 2:
            raise DatasetError("performance matrix must be two-dimensional")
        if perf.shape[0] != len(self.alternatives) or labels.shape != (perf.shape[0],):
            raise DatasetError("row count mismatch between alternatives, performances and labels")
        if perf.shape[1] != len(self.criterion_names):
            raise DatasetError("column count does not match criterion names")
        if not np.all(np.isfinite(perf)):
            raise DatasetError("performance matrix contains non-finite entries")
        if len(set(self.alternatives)) != len(self.alternatives):
            raise DatasetError("alternative identifiers are not unique")
        if labels.size and (labels.min() < 1 or labels.max() > self.q):
            raise DatasetError(f"labels must lie in 1..{self.q}")
        perf.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "performances", perf)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "alternatives", tuple(self.alternatives))
        object.__setattr__(self, "criterion_names", tuple(self.criterion_names))
        if not self.label_values:
            object.__setattr__(self, "label_values", tuple(range(1, self.q + 1)))

    @property
    def n_criteria(self) -> int:
        return self.performances.shape[1]

    def __len__(self) -> int:
        return len(self.alternatives)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.q + 1)[1:]

    def check_all_classes_present(self):
        missing = [k + 1 for k, c in enumerate(self.class_counts()) if c == 0]
        if missing:
            raise DatasetError(f"classes {missing} have no members")

    def subset(self, index) -> "PerformanceTable":
        """Rows selected by an integer index array or boolean mask; q is kept."""
        index = np.asarray(index)
        if index.dtype == bool:
            index = np.flatnonzero(index)
        return PerformanceTable(
            alternatives=tuple(self.alternatives[i] for i in index),
            performances=self.performances[index],
            labels=self.labels[index],
            q=self.q,
            criterion_names=self.criterion_names,
            label_values=self.label_values,
        )


@dataclass(frozen=True)
class CriterionScale:
    """Performance range [alpha, beta] of a gain-oriented criterion and its piece count."""

    alpha: float
    beta: float
    direction: str = GAIN
    gamma: int = 1

    def __post_init__(self):
        if not self.alpha < self.beta:
            raise DatasetError(f"scale requires alpha < beta, got [{self.alpha}, {self.beta}]")
        if int(self.gamma) != self.gamma or self.gamma < 1:
            raise DatasetError(f"gamma must be a positive integer, got {self.gamma}")
        if self.direction not in (GAIN, COST):
            raise DatasetError(f"unknown direction {self.direction!r}")
        object.__setattr__(self, "gamma", int(self.gamma))


@dataclass(frozen=True)
class FoldPlan:
    K: int
    assignments: np.ndarray
    seed: int

    def __post_init__(self):
        a = np.array(self.assignments, dtype=int)
        a.setflags(write=False)
        object.__setattr__(self, "assignments", a)

    def test_index(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_index(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


def _parse_label(raw: str, lineno: int) -> int:
    text = raw.strip()
    if not text:
        raise DatasetError(f"line {lineno}: missing label")
    try:
        return int(text)
    except ValueError:
        pass
    try:
        value = float(text)
    except ValueError:
        raise DatasetError(f"line {lineno}: non-integer label {text!r}") from None
    if not value.is_integer():
        raise DatasetError(f"line {lineno}: non-integer label {text!r}")
    return int(value)


def _resolve_column(header: Sequence[str], selector) -> int:
    if selector is None:
        return len(header) - 1
    if isinstance(selector, int):
        idx = selector if selector >= 0 else len(header) + selector
        if not 0 <= idx < len(header):
            raise DatasetError(f"column index {selector} out of range")
        return idx
    text = str(selector)
    if text in header:
        return list(header).index(text)
    try:
        return _resolve_column(header, int(text))
    except ValueError:
        raise DatasetError(f"no column named {text!r}") from None


def load_table(path, label_column=None, id_column=None, label_order=None) -> PerformanceTable:
    """Read a headered, comma-separated performance table.

    Parameters
    ----------
    path : path-like
        UTF-8 CSV file; first row is the header.
    label_column : str or int, optional
        Column holding class labels. Defaults to the last column.
    id_column : str or int, optional
        Column holding alternative identifiers. When omitted, alternatives
        are named ``r1, r2, ...`` by row position.
    label_order : sequence, optional
        Explicit worst-to-best ordering of label values. Required for
        non-integer labels; integer labels are otherwise ranked numerically.

    Returns
    -------
    PerformanceTable
        Labels are mapped onto 1..q preserving their order.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if len(rows) < 2:
        raise DatasetError("file must contain a header and at least one data row")
    header = [h.strip() for h in rows[0]]
    label_idx = _resolve_column(header, label_column)
    id_idx = None if id_column is None else _resolve_column(header, id_column)
    if id_idx == label_idx:
        raise DatasetError("id column and label column coincide")
    crit_idx = [i for i in range(len(header)) if i not in (label_idx, id_idx)]
    if not crit_idx:
        raise DatasetError("no criterion columns")

    ids, perf, raw_labels = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DatasetError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        values = []
        for i in crit_idx:
            try:
                v = float(row[i])
            except ValueError:
                raise DatasetError(
                    f"line {lineno}: non-numeric performance {row[i]!r} in column {header[i]!r}"
                ) from None
            if not math.isfinite(v):
                raise DatasetError(f"line {lineno}: non-finite performance in column {header[i]!r}")
            values.append(v)
        perf.append(values)
        if label_order is None:
            raw_labels.append(_parse_label(row[label_idx], lineno))
        else:
            text = row[label_idx].strip()
            if not text:
                raise DatasetError(f"line {lineno}: missing label")
            raw_labels.append(text)
        ids.append(row[id_idx].strip() if id_idx is not None else f"r{lineno - 1}")

    if label_order is None:
        distinct = sorted(set(raw_labels))
    else:
        distinct = [str(v) for v in label_order]
        unknown = set(raw_labels) - set(distinct)
        if unknown:
            raise DatasetError(f"labels {sorted(unknown)} not in label order")
        present = set(raw_labels)
        distinct = [v for v in distinct if v in present]
    if len(distinct) < 2:
        raise DatasetError("at least 2 classes are required")
    mapping = {v: k + 1 for k, v in enumerate(distinct)}
    return PerformanceTable(
        alternatives=tuple(ids),
        performances=np.array(perf, dtype=float),
        labels=np.array([mapping[v] for v in raw_labels], dtype=int),
        q=len(distinct),
        criterion_names=tuple(header[i] for i in crit_idx),
        label_values=tuple(distinct),
    )


def normalize_directions(performances: np.ndarray, directions: Sequence[str]) -> np.ndarray:
    """Negate cost-type columns so every criterion becomes gain-type."""
    perf = np.array(performances, dtype=float, copy=True)
    if perf.ndim == 1:
        perf = perf[None, :]
    if len(directions) != perf.shape[1]:
        raise DatasetError("one direction per criterion is required")
    for j, d in enumerate(directions):
        if d == COST:
            perf[:, j] = -perf[:, j]
        elif d != GAIN:
            raise DatasetError(f"unknown direction {d!r}")
    return perf


def infer_scales(table: PerformanceTable, gamma, directions=None) -> list[CriterionScale]:
    """Scales spanning each column's observed range after direction normalization.

    ``gamma`` is either one integer shared by all criteria or one per criterion.
    """
    n = table.n_criteria
    gammas = [int(gamma)] * n if np.isscalar(gamma) else [int(g) for g in gamma]
    dirs = [GAIN] * n if directions is None else list(directions)
    if len(gammas) != n or len(dirs) != n:
        raise DatasetError("gamma and directions need one entry per criterion")
    perf = normalize_directions(table.performances, dirs)
    scales = []
    for j in range(n):
        lo, hi = float(perf[:, j].min()), float(perf[:, j].max())
        if lo == hi:
            raise DatasetError(f"degenerate criterion {table.criterion_names[j]!r}: constant column")
        scales.append(CriterionScale(alpha=lo, beta=hi, direction=dirs[j], gamma=gammas[j]))
    return scales


def stratified_folds(table: PerformanceTable, K: int, seed: int) -> FoldPlan:
    """Shuffle each class with a seeded PCG64 stream, then deal members round-robin.

    The dealing offset carries over from one class to the next so fold sizes
    stay balanced overall.
    """
    if K < 2:
        raise DatasetError("K must be at least 2")
    counts = table.class_counts()
    for k, c in enumerate(counts, start=1):
        if c < K:
            raise DatasetError(f"class too small for K folds: class {k} has {c} members, K={K}")
    rng = np.random.Generator(np.random.PCG64(seed))
    assignments = np.empty(len(table), dtype=int)
    offset = 0
    for k in range(1, table.q + 1):
        members = np.flatnonzero(table.labels == k)
        members = members[rng.permutation(members.size)]
        assignments[members] = (offset + np.arange(members.size)) % K
        offset = (offset + members.size) % K
    return FoldPlan(K=K, assignments=assignments, seed=seed)


def load_performances(path, criterion_names: Sequence[str], id_column=None):
    """Read the named criterion columns of a CSV (labels, if present, are ignored).

    Returns
    -------
    ids : list of str
    performances : ndarray, shape (rows, len(criterion_names))
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if any(cell.strip() for cell in r)]
    if len(rows) < 2:
        raise DatasetError("file must contain a header and at least one data row")
    header = [h.strip() for h in rows[0]]
    missing = [c for c in criterion_names if c not in header]
    if missing:
        raise DatasetError(f"criterion columns {missing} not found in {path.name}")
    cols = [header.index(c) for c in criterion_names]
    id_idx = None if id_column is None else _resolve_column(header, id_column)
    ids, perf = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DatasetError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            values = [float(row[i]) for i in cols]
        except ValueError:
            raise DatasetError(f"line {lineno}: non-numeric performance") from None
        if not all(math.isfinite(v) for v in values):
            raise DatasetError(f"line {lineno}: non-finite performance")
        perf.append(values)
        ids.append(row[id_idx].strip() if id_idx is not None else f"r{lineno - 1}")
    return ids, np.array(perf, dtype=float)
