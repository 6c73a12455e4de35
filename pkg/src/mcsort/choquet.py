"""2-additive Choquet-integral sorting baseline.

Performances are mapped to [0, 1] by the empirical CDF of the training data,
and the capacity is parametrized by its Moebius masses on singletons and
pairs, which makes the integral linear in the masses:

    C(a) = sum_i m_i x_i + sum_{i<j} m_ij min(x_i, x_j).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import PerformanceTable, normalize_directions
from .learner import (InconsistentData, RIDGE, class_centroids, objective_scale, scatter_matrix)
from .qpsolve import QpProblem, solve

MAX_CHOQUET_CRITERIA = 12


@dataclass(frozen=True)
class EcdfScaler:
    """Per-criterion sorted training values; ``apply`` returns relative frequencies of ``<=``."""

    columns: tuple

    def __post_init__(self):
        cols = []
        for col in self.columns:
            col = np.sort(np.asarray(col, dtype=float).ravel())
            if col.size == 0:
                raise ValueError("ECDF needs at least one training value")
            col.setflags(write=False)
            cols.append(col)
        object.__setattr__(self, "columns", tuple(cols))

    @property
    def n(self) -> int:
        return len(self.columns)

    def apply(self, values) -> np.ndarray:
        """Scale a row, a matrix of rows, or (single-criterion scaler) a scalar or 1-D array of values."""
        v = np.asarray(values, dtype=float)
        if self.n == 1 and v.ndim <= 1:
            col = self.columns[0]
            out = np.searchsorted(col, v, side="right") / col.size
            return float(out) if v.ndim == 0 else out
        v2 = np.atleast_2d(v)
        if v2.shape[1] != self.n:
            raise ValueError(f"expected {self.n} columns, got {v2.shape[1]}")
        out = np.empty_like(v2)
        for j, col in enumerate(self.columns):
            out[:, j] = np.searchsorted(col, v2[:, j], side="right") / col.size
        return out if v.ndim == 2 else out[0]


def fit_ecdf(data) -> EcdfScaler:
    """Fit on one column (1-D input) or on every column of a matrix."""
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        return EcdfScaler((data,))
    return EcdfScaler(tuple(data[:, j] for j in range(data.shape[1])))


def pair_list(n: int) -> list:
    return list(itertools.combinations(range(n), 2))


def n_from_dimension(D: int) -> int:
    n = int(round((np.sqrt(8 * D + 1) - 1) / 2))
    if n + n * (n - 1) // 2 != D:
        raise ValueError(f"{D} is not a valid 2-additive feature dimension")
    return n


def mobius_features(scaled) -> np.ndarray:
    """Singletons followed by pairwise minima (pairs in lexicographic order); rows or a matrix."""
    x = np.asarray(scaled, dtype=float)
    X = np.atleast_2d(x)
    n = X.shape[1]
    pairs = pair_list(n)
    out = np.empty((X.shape[0], n + len(pairs)))
    out[:, :n] = X
    for p, (i, j) in enumerate(pairs):
        out[:, n + p] = np.minimum(X[:, i], X[:, j])
    return out if x.ndim == 2 else out[0]


@dataclass(frozen=True)
class MobiusWeights:
    singletons: np.ndarray
    pairs: np.ndarray  # lexicographic pair order

    def __post_init__(self):
        s = np.asarray(self.singletons, dtype=float).ravel()
        p = np.asarray(self.pairs, dtype=float).ravel()
        if p.size != s.size * (s.size - 1) // 2:
            raise ValueError("pair masses must cover every unordered pair")
        object.__setattr__(self, "singletons", s)
        object.__setattr__(self, "pairs", p)

    @property
    def n(self) -> int:
        return self.singletons.size

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.singletons, self.pairs])

    @classmethod
    def from_vector(cls, vec) -> "MobiusWeights":
        vec = np.asarray(vec, dtype=float)
        n = n_from_dimension(vec.size)
        return cls(vec[:n], vec[n:])

    def pair_mass(self, i: int, j: int) -> float:
        i, j = min(i, j), max(i, j)
        return float(self.pairs[pair_list(self.n).index((i, j))])


def choquet_value(m: MobiusWeights, features) -> float:
    """Inner product of Moebius masses with the feature vector (or each row of a matrix)."""
    f = np.asarray(features, dtype=float)
    vec = m.to_vector()
    if f.shape[-1] != vec.size:
        raise ValueError(f"dimension mismatch: {vec.size} masses vs {f.shape[-1]} features")
    out = f @ vec
    return float(out) if f.ndim == 1 else out


def capacity_from_mobius(m: MobiusWeights, subset) -> float:
    """mu(T) = sum of the masses of T's singletons and pairs."""
    T = sorted(set(int(i) for i in subset))
    total = float(sum(m.singletons[i] for i in T))
    for i, j in itertools.combinations(T, 2):
        total += m.pair_mass(i, j)
    return total


def mobius_from_capacity(capacity, subset) -> float:
    """Moebius inversion m(T) = sum_{T' subset of T} (-1)^{|T - T'|} mu(T')."""
    T = tuple(sorted(set(int(i) for i in subset)))
    total = 0.0
    for r in range(len(T) + 1):
        for sub in itertools.combinations(T, r):
            total += (-1) ** (len(T) - r) * capacity(sub)
    return total


def choquet_sorted(capacity, x) -> float:
    """Textbook definition: sum over ascending x_(i) of (x_(i) - x_(i-1)) mu({(i), ..., (n)})."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="stable")
    total, prev = 0.0, 0.0
    for pos, idx in enumerate(order):
        total += (x[idx] - prev) * capacity(tuple(order[pos:]))
        prev = x[idx]
    return total


def monotonicity_rows_p4(n: int) -> np.ndarray:
    """Rows m_i + sum_{j in T} m_ij >= 0 for every criterion i and nonempty T of its partners."""
    if n > MAX_CHOQUET_CRITERIA:
        raise ValueError(f"{n} criteria would need {n * (2 ** (n - 1) - 1)} monotonicity rows; "
                         f"at most {MAX_CHOQUET_CRITERIA} supported")
    pairs = pair_list(n)
    index = {p: n + k for k, p in enumerate(pairs)}
    rows = []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        for r in range(1, len(others) + 1):
            for T in itertools.combinations(others, r):
                row = np.zeros(n + len(pairs))
                row[i] = 1.0
                for j in T:
                    row[index[(min(i, j), max(i, j))]] = 1.0
                rows.append(row)
    return np.array(rows).reshape(-1, n + len(pairs))


def assemble_p4(theta, S_mu, C1: float) -> QpProblem:
    """Variables (m, d): min -d + C1 m'S m with centroid margins, normalization and monotonicity.

    Singleton masses carry lower bound 0; pair masses are free apart from
    the monotonicity rows. The objective is divided by ``objective_scale``.
    """
    theta = np.asarray(theta, dtype=float)
    q, D = theta.shape
    if q < 2:
        raise ValueError("at least two classes are required")
    n = n_from_dimension(D)
    mono = monotonicity_rows_p4(n)
    scale = objective_scale(C1, S_mu)
    P = np.zeros((D + 1, D + 1))
    P[:D, :D] = 2.0 * C1 * np.asarray(S_mu, dtype=float) / scale
    P += RIDGE * np.eye(D + 1)
    c = np.zeros(D + 1)
    c[D] = -1.0 / scale
    diffs = np.diff(theta, axis=0)
    A = np.vstack([np.hstack([diffs, -np.ones((q - 1, 1))]),
                   np.hstack([mono, np.zeros((mono.shape[0], 1))])])
    lb = np.full(D + 1, -np.inf)
    lb[:n] = 0.0
    lb[D] = 0.0
    A_eq = np.append(np.ones(D), 0.0)[None, :]
    return QpProblem(P=P, c=c, A_ineq=A, b_ineq=np.zeros(A.shape[0]), A_eq=A_eq, b_eq=[1.0],
                     lb=lb, scale=scale, tag="P4")


@dataclass(frozen=True)
class ChoquetModel:
    scaler: EcdfScaler
    directions: tuple
    mobius: MobiusWeights
    d: float
    objective: float
    C1: float
    label_values: tuple = ()
    kkt_max: float = 0.0

    def values(self, performances) -> np.ndarray:
        perf = normalize_directions(performances, self.directions)
        return mobius_features(self.scaler.apply(perf)) @ self.mobius.to_vector()

    def capacity(self, subset) -> float:
        return capacity_from_mobius(self.mobius, subset)


def train_choquet(table: PerformanceTable, directions: Sequence[str] = None, C1: float = 1e-3) -> ChoquetModel:
    """Fit the ECDF scaling on ``table`` and solve the Choquet margin program."""
    if not C1 > 0:
        raise ValueError("C1 must be positive")
    table.check_all_classes_present()
    dirs = tuple(directions) if directions is not None else ("gain",) * table.n_criteria
    perf = normalize_directions(table.performances, dirs)
    scaler = fit_ecdf(perf)
    V = mobius_features(scaler.apply(perf))
    theta = class_centroids(V, table.labels, table.q).mu
    S = scatter_matrix(V, table.labels)
    qp = assemble_p4(theta, S, C1)
    sol = solve(qp)
    if not sol.optimal:
        if sol.status == "infeasible":
            raise InconsistentData("inconsistent data under d>=0 for the Choquet model")
        raise RuntimeError(f"QP solver stopped with status {sol.status}")
    D = V.shape[1]
    return ChoquetModel(scaler=scaler, directions=dirs, mobius=MobiusWeights.from_vector(sol.x[:D]),
                        d=float(sol.x[D]), objective=float(sol.objective * qp.scale), C1=float(C1),
                        label_values=table.label_values, kkt_max=sol.kkt.max())
