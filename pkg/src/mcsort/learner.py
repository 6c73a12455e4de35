"""Learning additive and interaction-augmented sorting models by convex QP.

The non-interactive model maximizes the smallest gap between consecutive
class centroids in value space, penalized by within-class value scatter and
a Tikhonov term. The interactive model does the same over the augmented
encoding for one interaction structure at a time; the structure itself is
chosen by exhaustive enumeration of signed matchings.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dataset import CriterionScale, PerformanceTable
from .encoding import FORMS, Layout, WeightVector, encode_table, ideal_encoding
from .qpsolve import QpProblem, QpSolution, solve

RIDGE = 1e-12
ORACLE_RIDGE = 1e-9
MAX_INTERACTIVE_CRITERIA = 12
POLICIES = ("both", "positive-only", "negative-only")


class InconsistentData(ValueError):
    """No weight vector separates class centroids with a nonnegative margin."""


class StructureGuardError(ValueError):
    """Too many criteria for exhaustive interaction-structure enumeration."""


@dataclass(frozen=True)
class Hyperparams:
    C1: float
    C2: float

    def __post_init__(self):
        if not (self.C1 > 0 and self.C2 > 0):
            raise ValueError(f"C1 and C2 must be positive, got {self.C1}, {self.C2}")


@dataclass(frozen=True)
class ClassCentroids:
    mu: np.ndarray  # (q, D)

    @property
    def q(self) -> int:
        return self.mu.shape[0]


@dataclass(frozen=True)
class InteractionStructure:
    """Signed matching: disjoint criterion pairs, each with sign +1 (bonus) or -1 (penalty)."""

    pairs: tuple = ()
    signs: tuple = ()

    def __post_init__(self):
        pairs = tuple((int(j), int(k)) for j, k in self.pairs)
        signs = tuple(int(s) for s in self.signs)
        if len(pairs) != len(signs):
            raise ValueError("one sign per pair is required")
        seen = set()
        for (j, k), s in zip(pairs, signs):
            if not j < k:
                raise ValueError(f"pair ({j}, {k}) must satisfy j < k")
            if j in seen or k in seen:
                raise ValueError(f"criterion appears in two pairs: {pairs}")
            if s not in (1, -1):
                raise ValueError(f"sign must be +1 or -1, got {s}")
            seen.update((j, k))
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "signs", signs)

    def __len__(self):
        return len(self.pairs)

    def sign_of(self, pair) -> int:
        """+1, -1, or 0 when the pair is inactive."""
        try:
            return self.signs[self.pairs.index(tuple(pair))]
        except ValueError:
            return 0

    def describe(self, names: Sequence[str] = None) -> str:
        if not self.pairs:
            return "none"
        label = (lambda i: names[i]) if names else (lambda i: f"g{i + 1}")
        return ", ".join(f"{'+' if s > 0 else '-'}{{{label(j)},{label(k)}}}"
                         for (j, k), s in zip(self.pairs, self.signs))


@dataclass(frozen=True)
class SortingModel:
    weights: WeightVector
    structure: InteractionStructure
    form: str
    scales: tuple
    d: float
    objective: float
    hyperparams: Hyperparams
    label_values: tuple = ()
    kkt_max: float = 0.0

    @property
    def layout(self) -> Layout:
        return Layout(tuple(s.gamma for s in self.scales), self.form)

    @property
    def u(self) -> np.ndarray:
        return self.weights.to_vector()

    def values(self, performances) -> np.ndarray:
        """Comprehensive values of raw performance rows (cost columns handled, clamped)."""
        return encode_table(self.scales, performances, self.form) @ self.u

    def ideal_value(self) -> float:
        return float(ideal_encoding(self.scales, self.form).vector @ self.u)


@dataclass(frozen=True)
class ModelReport:
    weights: tuple
    interactions: dict = field(default_factory=dict)
    d: float = None

    def lines(self, names: Sequence[str] = None) -> list:
        label = (lambda i: names[i]) if names else (lambda i: f"g{i + 1}")
        out = [f"w[{label(j)}] = {w:.4f}" for j, w in enumerate(self.weights)]
        for (j, k), phi in sorted(self.interactions.items()):
            out.append(f"Phi[{label(j)},{label(k)}] = {phi:+.4f}")
        if self.d is not None:
            out.append(f"d = {self.d:.6g}")
        return out


# --------------------------------------------------------------------------- statistics

def class_centroids(V, labels, q: int) -> ClassCentroids:
    """Per-class mean encodings, classes in order 1..q."""
    V = np.asarray(V, dtype=float)
    labels = np.asarray(labels)
    mu = np.empty((q, V.shape[1]))
    for k in range(1, q + 1):
        members = V[labels == k]
        if members.shape[0] == 0:
            raise ValueError(f"class {k} is empty")
        mu[k - 1] = members.mean(axis=0)
    return ClassCentroids(mu)


def scatter_matrix(V, labels) -> np.ndarray:
    """Within-class scatter summed over ordered pairs (a, b) of the same class.

    For a class with rows v_1..v_m the ordered-pair sum of
    (v_a - v_b)(v_a - v_b)' equals 2 m sum v v' - 2 s s' with s = sum v.
    """
    V = np.asarray(V, dtype=float)
    labels = np.asarray(labels)
    D = V.shape[1]
    S = np.zeros((D, D))
    for k in np.unique(labels):
        X = V[labels == k]
        s = X.sum(axis=0)
        S += 2.0 * X.shape[0] * (X.T @ X) - 2.0 * np.outer(s, s)
    return 0.5 * (S + S.T)


# --------------------------------------------------------------------------- (P2) / (P1) / (P0)

def _margin_rows(centroids: ClassCentroids) -> np.ndarray:
    return np.diff(centroids.mu, axis=0)


def objective_scale(C1: float, S, C2: float = 0.0) -> float:
    """Divisor keeping the assembled quadratic term O(1) for any hyperparameters."""
    return max(1.0, C1 * float(np.max(np.abs(S), initial=0.0)) + C2)


def assemble_p2(centroids: ClassCentroids, S, C1: float, C2: float, ideal) -> QpProblem:
    """Variables (u, d): min -d + C1 u'Su + C2 |u|^2 with centroid margins >= d.

    The objective is divided by ``objective_scale`` (recorded on the problem)
    so the KKT tolerances stay meaningful across the hyperparameter grid.
    """
    if centroids.q < 2:
        raise ValueError("at least two classes are required")
    ideal = np.asarray(ideal, dtype=float)
    S = np.asarray(S, dtype=float)
    D = ideal.size
    scale = objective_scale(C1, S, C2)
    P = np.zeros((D + 1, D + 1))
    P[:D, :D] = 2.0 * (C1 * S + C2 * np.eye(D)) / scale
    P += RIDGE * np.eye(D + 1)
    c = np.zeros(D + 1)
    c[D] = -1.0 / scale
    diffs = _margin_rows(centroids)
    A = np.hstack([diffs, -np.ones((diffs.shape[0], 1))])
    A_eq = np.append(ideal, 0.0)[None, :]
    return QpProblem(P=P, c=c, A_ineq=A, b_ineq=np.zeros(diffs.shape[0]),
                     A_eq=A_eq, b_eq=[1.0], lb=np.zeros(D + 1), scale=scale, tag="P2")


def solve_p1(V, labels, q: int, ridge: float = ORACLE_RIDGE) -> QpSolution:
    """Centroid form of the max-min-gap program, d unbounded below.

    Weights are kept nonnegative and normalized on the ideal alternative;
    without the normalization the program is unbounded.
    """
    V = np.asarray(V, dtype=float)
    D = V.shape[1]
    diffs = _margin_rows(class_centroids(V, labels, q))
    P = np.zeros((D + 1, D + 1))
    P[:D, :D] = 2.0 * ridge * np.eye(D)
    c = np.zeros(D + 1)
    c[D] = -1.0
    A = np.hstack([diffs, -np.ones((q - 1, 1))])
    lb = np.append(np.zeros(D), -np.inf)
    A_eq = np.append(np.ones(D), 0.0)[None, :]
    return solve(QpProblem(P=P, c=c, A_ineq=A, b_ineq=np.zeros(q - 1), A_eq=A_eq, b_eq=[1.0], lb=lb))


P0_MAX_REFERENCES = 60


def solve_p0_oracle(V, labels, q: int, ridge: float = ORACLE_RIDGE) -> QpSolution:
    """Pairwise form: one gap variable per cross-consecutive-class pair.

    Variables are (u, d, d(a, b) ...). Intended only as a test oracle on
    small reference sets.
    """
    V = np.asarray(V, dtype=float)
    labels = np.asarray(labels)
    if V.shape[0] > P0_MAX_REFERENCES:
        raise ValueError(f"pairwise oracle limited to {P0_MAX_REFERENCES} references")
    D = V.shape[1]
    pairs = []
    for s in range(1, q):
        upper = np.flatnonzero(labels == s + 1)
        lower = np.flatnonzero(labels == s)
        if not upper.size or not lower.size:
            raise ValueError(f"class {s if not lower.size else s + 1} is empty")
        pairs.append([(a, b) for a in upper for b in lower])
    n_pair = sum(len(p) for p in pairs)
    nv = D + 1 + n_pair
    P = np.zeros((nv, nv))
    P[:D, :D] = 2.0 * ridge * np.eye(D)
    c = np.zeros(nv)
    c[D] = -1.0
    rows = []
    col = D + 1
    avg_rows = []
    for block in pairs:
        avg = np.zeros(nv)
        for a, b in block:
            r = np.zeros(nv)
            r[:D] = V[a] - V[b]
            r[col] = -1.0
            rows.append(r)
            avg[col] = 1.0 / len(block)
            col += 1
        avg[D] = -1.0
        avg_rows.append(avg)
    A = np.vstack(rows + avg_rows)
    lb = np.full(nv, -np.inf)
    lb[:D] = 0.0
    A_eq = np.zeros((1, nv))
    A_eq[0, :D] = 1.0
    return solve(QpProblem(P=P, c=c, A_ineq=A, b_ineq=np.zeros(A.shape[0]), A_eq=A_eq, b_eq=[1.0], lb=lb))


# --------------------------------------------------------------------------- interactions

def monotonicity_rows(layout: Layout, pair) -> np.ndarray:
    """Rows R with R u >= 0 keeping the pair's contribution monotone in both criteria.

    For every cell (s, t): the marginal step of g_j at s plus the running sum
    over q <= t of (eta+ - eta-)[s, q], and symmetrically for g_k at t with
    the running sum over q <= s of (eta+ - eta-)[q, t].
    """
    j, k = pair
    gj, gk = layout.gammas[j], layout.gammas[k]
    off_j = layout.marginal_offsets[j]
    off_k = layout.marginal_offsets[k]
    rows = np.zeros((2 * gj * gk, layout.dimension))
    r = 0
    for s in range(gj):
        for t in range(gk):
            rows[r, off_j + s] = 1.0
            for qq in range(t + 1):
                rows[r, layout.plus_index(j, k, s, qq)] += 1.0
                rows[r, layout.minus_index(j, k, s, qq)] -= 1.0
            r += 1
    for s in range(gj):
        for t in range(gk):
            rows[r, off_k + t] = 1.0
            for qq in range(s + 1):
                rows[r, layout.plus_index(j, k, qq, t)] += 1.0
                rows[r, layout.minus_index(j, k, qq, t)] -= 1.0
            r += 1
    return rows


def normalize_policy(policy: str) -> str:
    p = policy.replace("_", "-")
    if p not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    return p


def count_structures(n: int, policy: str = "both") -> int:
    """Closed form sum_m n! / (m! (n-2m)! 2^m) * (sign choices)^m."""
    per_pair = 2 if normalize_policy(policy) == "both" else 1
    total = 0
    for m in range(n // 2 + 1):
        matchings = math.factorial(n) // (math.factorial(m) * math.factorial(n - 2 * m) * 2 ** m)
        total += matchings * per_pair ** m
    return total


def _matchings(items: tuple) -> Iterable[tuple]:
    if len(items) < 2:
        yield ()
        return
    first, rest = items[0], items[1:]
    yield from _matchings(rest)
    for i, partner in enumerate(rest):
        remaining = rest[:i] + rest[i + 1:]
        for sub in _matchings(remaining):
            yield ((first, partner),) + sub


def check_structure_guard(n: int, policy: str = "both"):
    if n > MAX_INTERACTIVE_CRITERIA:
        raise StructureGuardError(
            f"{n} criteria would require {count_structures(n, policy)} interaction structures "
            f"(sum over m of n!/(m!(n-2m)!)); at most {MAX_INTERACTIVE_CRITERIA} criteria supported"
        )


def enumerate_structures(n: int, policy: str = "both") -> list:
    """All signed matchings on n criteria.

    Ordered by the sorted tuple of pairs (so the empty structure comes first),
    then by sign combination with + preceding -.
    """
    policy = normalize_policy(policy)
    check_structure_guard(n, policy)
    signs = {"both": (1, -1), "positive-only": (1,), "negative-only": (-1,)}[policy]
    matchings = sorted(tuple(sorted(m)) for m in _matchings(tuple(range(n))))
    out = []
    for m in matchings:
        for combo in itertools.product(signs, repeat=len(m)):
            out.append(InteractionStructure(m, combo))
    return out


@dataclass(frozen=True)
class P3Problem:
    """A (P3) instance; ``free`` maps reduced variables back to the full (u, d) vector."""

    qp: QpProblem
    free: np.ndarray
    n_full: int

    def expand(self, x) -> np.ndarray:
        full = np.zeros(self.n_full)
        full[self.free] = x
        return full


def _free_interaction_mask(layout: Layout, structure: InteractionStructure) -> np.ndarray:
    free = np.zeros(layout.dimension + 1, dtype=bool)
    free[:layout.n_marginal] = True
    free[-1] = True
    for (j, k), sign in zip(structure.pairs, structure.signs):
        start = layout.pair_offsets[(j, k)][0 if sign > 0 else 1]
        free[start:start + layout.pair_offsets[(j, k)][2]] = True
    return free


def assemble_p3(centroids: ClassCentroids, S, C1: float, C2: float, structure: InteractionStructure,
                ideal, layout: Layout, reduce: bool = True) -> P3Problem:
    """(P2) over the augmented encoding with interaction variables gated by ``structure``.

    With ``reduce=True`` the pinned interaction variables are eliminated;
    otherwise they stay in the problem with explicit ``x_i = 0`` rows.
    """
    if layout.form == "none":
        raise ValueError("interaction model needs form 'product' or 'minimum'")
    for j, k in structure.pairs:
        if not 0 <= j < k < layout.n:
            raise ValueError(f"pair ({j}, {k}) out of range for {layout.n} criteria")
    base = assemble_p2(centroids, S, C1, C2, ideal)
    D = layout.dimension
    mono = [monotonicity_rows(layout, pair) for pair in structure.pairs]
    mono = np.vstack(mono) if mono else np.zeros((0, D))
    mono = np.hstack([mono, np.zeros((mono.shape[0], 1))])
    A = np.vstack([base.A_ineq, mono])
    b = np.concatenate([base.b_ineq, np.zeros(mono.shape[0])])
    free = _free_interaction_mask(layout, structure)
    if reduce:
        idx = np.flatnonzero(free)
        A_r = A[:, idx]
        keep = np.any(A_r != 0, axis=1)
        qp = QpProblem(P=base.P[np.ix_(idx, idx)], c=base.c[idx], A_ineq=A_r[keep], b_ineq=b[keep],
                       A_eq=base.A_eq[:, idx], b_eq=base.b_eq, lb=base.lb[idx], scale=base.scale, tag="P3")
        return P3Problem(qp, idx, D + 1)
    pinned = np.flatnonzero(~free)
    pin_rows = np.zeros((pinned.size, D + 1))
    pin_rows[np.arange(pinned.size), pinned] = 1.0
    qp = QpProblem(P=base.P, c=base.c, A_ineq=A, b_ineq=b,
                   A_eq=np.vstack([base.A_eq, pin_rows]),
                   b_eq=np.concatenate([base.b_eq, np.zeros(pinned.size)]), lb=base.lb, scale=base.scale,
                   tag="P3")
    return P3Problem(qp, np.arange(D + 1), D + 1)


# --------------------------------------------------------------------------- training

@dataclass(frozen=True)
class TrainConfig:
    form: str = "none"
    policy: str = "both"
    C1: float = 1e-3
    C2: float = 1e-3
    jobs: int = 1

    def __post_init__(self):
        if self.form not in FORMS:
            raise ValueError(f"unknown form {self.form!r}")
        object.__setattr__(self, "policy", normalize_policy(self.policy))
        Hyperparams(self.C1, self.C2)


def _diagnose_margins(centroids: ClassCentroids, ideal) -> str:
    """Name the first consecutive-class margin that cannot be made nonnegative on its own."""
    ideal = np.asarray(ideal, dtype=float)
    D = ideal.size
    for k, diff in enumerate(_margin_rows(centroids), start=1):
        qp = QpProblem(P=RIDGE * np.eye(D), c=-diff, A_eq=ideal[None, :], b_eq=[1.0], lb=np.zeros(D))
        sol = solve(qp)
        if sol.optimal and -sol.objective < -1e-9:
            return f"margin between classes {k} and {k + 1} cannot be nonnegative"
    return "class margins cannot all be nonnegative simultaneously"


def _solve_structure(args):
    centroids, S, C1, C2, structure, ideal, layout = args
    prob = assemble_p3(centroids, S, C1, C2, structure, ideal, layout)
    sol = solve(prob.qp)
    return sol.status, sol.objective * prob.qp.scale, prob.expand(sol.x), sol.kkt.max()


def _better(obj: float, best: float) -> bool:
    return obj < best - 1e-9 * (1.0 + abs(best))


def train(table: PerformanceTable, scales: Sequence[CriterionScale], config: TrainConfig = TrainConfig()) -> SortingModel:
    """Fit a sorting model on a reference table.

    For ``form='none'`` a single QP is solved. Otherwise every signed
    matching allowed by ``config.policy`` is solved and the lowest objective
    wins; ties go to the structure enumerated first.

    Raises
    ------
    InconsistentData
        When no structure admits a nonnegative centroid margin.
    StructureGuardError
        When interactions are requested on more than 12 criteria.
    """
    scales = tuple(scales)
    table.check_all_classes_present()
    layout = Layout(tuple(s.gamma for s in scales), config.form)
    if config.form != "none":
        check_structure_guard(layout.n, config.policy)
    V = encode_table(scales, table.performances, config.form)
    centroids = class_centroids(V, table.labels, table.q)
    S = scatter_matrix(V, table.labels)
    ideal = ideal_encoding(scales, config.form).vector
    hp = Hyperparams(config.C1, config.C2)

    if config.form == "none":
        qp = assemble_p2(centroids, S, hp.C1, hp.C2, ideal)
        sol = solve(qp)
        if not sol.optimal:
            if sol.status == "infeasible":
                raise InconsistentData("inconsistent data under d>=0: " + _diagnose_margins(centroids, ideal))
            raise RuntimeError(f"QP solver stopped with status {sol.status}")
        x, structure, obj, kkt = sol.x, InteractionStructure(), sol.objective * qp.scale, sol.kkt.max()
    else:
        structures = enumerate_structures(layout.n, config.policy)
        tasks = [(centroids, S, hp.C1, hp.C2, st, ideal, layout) for st in structures]
        if config.jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=config.jobs) as pool:
                results = list(pool.map(_solve_structure, tasks, chunksize=max(1, len(tasks) // (4 * config.jobs))))
        else:
            results = [_solve_structure(t) for t in tasks]
        best = None
        for st, (status, obj, xfull, kkt) in zip(structures, results):
            if status != "optimal":
                continue
            if best is None or _better(obj, best[1]):
                best = (st, obj, xfull, kkt)
        if best is None:
            raise InconsistentData("inconsistent data under d>=0: " + _diagnose_margins(centroids, ideal))
        structure, obj, x, kkt = best

    u = x[:-1].copy()
    u[u < 0] = 0.0  # solver noise below the bound
    weights = WeightVector.from_vector(u, layout)
    return SortingModel(weights=weights, structure=structure, form=config.form, scales=scales,
                        d=float(x[-1]), objective=float(obj), hyperparams=hp,
                        label_values=table.label_values, kkt_max=float(kkt))


def criterion_weights(w: WeightVector) -> tuple:
    """Marginal value of each criterion at its best performance."""
    return tuple(float(np.sum(steps)) for steps in w.marginal_steps)


def interaction_coefficients(w: WeightVector, structure: InteractionStructure) -> dict:
    """Signed bonus or penalty of the ideal alternative on each active pair."""
    out = {}
    for pair, sign in zip(structure.pairs, structure.signs):
        if sign > 0:
            out[pair] = float(np.sum(w.eta_plus.get(pair, 0.0)))
        else:
            out[pair] = -float(np.sum(w.eta_minus.get(pair, 0.0)))
    return out


def report_model(model) -> ModelReport:
    """Criterion weights and interaction coefficients of a model (or of a bare WeightVector)."""
    if isinstance(model, WeightVector):
        return ModelReport(weights=criterion_weights(model))
    return ModelReport(weights=criterion_weights(model.weights),
                       interactions=interaction_coefficients(model.weights, model.structure),
                       d=model.d)
