"""Example-based class assignment from comprehensive values (methods m1-m4).

Every method scores each class k for a query value U_a against the scored
reference set and the class with the highest score wins (lowest index on
ties):

m1  share of references outside class k that vote for k: lower classes
    strictly below U_a and higher classes strictly above it.
m2  as m1, but each voter carries its own m1 score for its own class.
m3  mean over members a* of class k of the class-k share among references
    between U(a*) and U_a.
m4  reciprocal-distance vote of the K nearest references.

Scores are exact ``Fraction`` objects in the scalar API; ``score_batch``
evaluates many queries in floating point through the compiled kernels.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import kernels

METHODS = ("m1", "m2", "m3", "m4")


def exact(x) -> Fraction:
    """Rational value of a number; floats go through their shortest repr, so 0.55 -> 11/20."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    return Fraction(repr(float(x)))


@dataclass(frozen=True)
class ScoredReferenceSet:
    values: tuple
    classes: tuple
    q: int

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        cls = tuple(int(c) for c in self.classes)
        if len(vals) != len(cls):
            raise ValueError("one class per reference value is required")
        if any(c < 1 or c > self.q for c in cls):
            raise ValueError(f"classes must lie in 1..{self.q}")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "classes", cls)

    @classmethod
    def from_arrays(cls, values, classes, q: int = None) -> "ScoredReferenceSet":
        classes = [int(c) for c in classes]
        return cls(tuple(values), tuple(classes), q if q is not None else max(classes))

    def __len__(self):
        return len(self.values)

    @property
    def order(self) -> np.ndarray:
        return np.argsort(self.values, kind="stable")

    @property
    def u_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @property
    def cls_array(self) -> np.ndarray:
        return np.asarray(self.classes, dtype=np.int64)

    def class_sizes(self) -> np.ndarray:
        return np.bincount(self.cls_array, minlength=self.q + 1)[1:]

    def _exact(self):
        cache = self.__dict__.get("_exact_cache")
        if cache is None:
            cache = [exact(v) for v in self.values]
            object.__setattr__(self, "_exact_cache", cache)
        return cache


@dataclass(frozen=True)
class ClassScores:
    method: str
    scores: tuple  # Fraction per class 1..q

    @property
    def floats(self) -> tuple:
        return tuple(float(s) for s in self.scores)

    def best(self) -> int:
        """Class index (1-based) with the highest score, lowest index on ties."""
        top = max(self.scores)
        return self.scores.index(top) + 1


def _check_class(refs: ScoredReferenceSet, k: int):
    if not 1 <= k <= refs.q:
        raise ValueError(f"class {k} out of range 1..{refs.q}")


def _supporters(refs: ScoredReferenceSet, ua: Fraction, k: int) -> list:
    U = refs._exact()
    return [i for i, (u, c) in enumerate(zip(U, refs.classes))
            if (c < k and u < ua) or (c > k and u > ua)]


def _outside(refs: ScoredReferenceSet, k: int) -> int:
    n = sum(1 for c in refs.classes if c != k)
    if n == 0:
        raise ValueError(f"every reference belongs to class {k}")
    return n


def score_m1(refs: ScoredReferenceSet, U_a, k: int) -> Fraction:
    _check_class(refs, k)
    return Fraction(len(_supporters(refs, exact(U_a), k)), _outside(refs, k))


def _self_support(refs: ScoredReferenceSet) -> list:
    cache = refs.__dict__.get("_self_support_cache")
    if cache is None:
        U = refs._exact()
        cache = [score_m1(refs, U[i], refs.classes[i]) for i in range(len(refs))]
        object.__setattr__(refs, "_self_support_cache", cache)
    return cache


def score_m2(refs: ScoredReferenceSet, U_a, k: int) -> Fraction:
    _check_class(refs, k)
    own = _self_support(refs)
    total = sum((own[i] for i in _supporters(refs, exact(U_a), k)), Fraction(0))
    return total / _outside(refs, k)


def score_m3(refs: ScoredReferenceSet, U_a, k: int) -> Fraction:
    _check_class(refs, k)
    ua = exact(U_a)
    U = refs._exact()
    members = [U[i] for i, c in enumerate(refs.classes) if c == k]
    if not members:
        raise ValueError(f"class {k} has no reference alternatives")
    total = Fraction(0)
    for us in members:
        if us <= ua:
            inside = [c for u, c in zip(U, refs.classes) if us <= u <= ua]
        else:
            inside = [c for u, c in zip(U, refs.classes) if ua < u <= us]
        total += Fraction(sum(1 for c in inside if c == k), len(inside))
    return total / len(members)


def check_k(refs: ScoredReferenceSet, K: int):
    smallest = int(refs.class_sizes().min())
    if K is None:
        raise ValueError("K required for method m4")
    if not 1 <= int(K) <= smallest:
        raise ValueError(f"K must lie in 1..{smallest} (size of the smallest class), got {K}")


def _neighbours(refs: ScoredReferenceSet, ua: Fraction, K: int) -> list:
    U = refs._exact()
    dist = [abs(u - ua) for u in U]
    # stable sort on distance keeps the earlier reference on ties
    return sorted(range(len(U)), key=lambda i: dist[i])[:K], dist


def score_m4_all(refs: ScoredReferenceSet, U_a, K: int) -> tuple:
    check_k(refs, K)
    near, dist = _neighbours(refs, exact(U_a), int(K))
    zero = [i for i in near if dist[i] == 0]
    mass = {i: Fraction(1) for i in zero} if zero else {i: 1 / dist[i] for i in near}
    total = sum(mass.values(), Fraction(0))
    per_class = [Fraction(0)] * refs.q
    for i, w in mass.items():
        per_class[refs.classes[i] - 1] += w
    return tuple(p / total for p in per_class)


def score_m4(refs: ScoredReferenceSet, U_a, k: int, K: int) -> Fraction:
    _check_class(refs, k)
    return score_m4_all(refs, U_a, K)[k - 1]


def score(method: str, refs: ScoredReferenceSet, U_a, K: int = None) -> ClassScores:
    """Exact scores of every class for one query value."""
    if method == "m4":
        return ClassScores(method, score_m4_all(refs, U_a, K))
    fn = {"m1": score_m1, "m2": score_m2, "m3": score_m3}.get(method)
    if fn is None:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    return ClassScores(method, tuple(fn(refs, U_a, k) for k in range(1, refs.q + 1)))


def assign(method: str, refs: ScoredReferenceSet, U_a, K: int = None) -> int:
    return score(method, refs, U_a, K).best()


# --------------------------------------------------------------------------- batch (float)

def _m1_self_support_float(refs: ScoredReferenceSet) -> np.ndarray:
    u, c = refs.u_array, refs.cls_array
    outside = len(refs) - refs.class_sizes()
    num = kernels.supporter_mass(u, c, np.ones(len(refs)), refs.q, u)
    return num[np.arange(len(refs)), c - 1] / outside[c - 1]


def score_batch(method: str, refs: ScoredReferenceSet, queries, K: int = None) -> np.ndarray:
    """Float scores, shape (n_queries, q), for many query values at once.

    Agrees with the exact path whenever differences of U values are exact in
    floating point; otherwise exact ties between distances may break
    differently.
    """
    u, c = refs.u_array, refs.cls_array
    queries = np.ascontiguousarray(np.asarray(queries, dtype=float).ravel())
    if method in ("m1", "m2"):
        outside = len(refs) - refs.class_sizes()
        if np.any(outside == 0):
            raise ValueError("every reference belongs to a single class")
        w = np.ones(len(refs)) if method == "m1" else _m1_self_support_float(refs)
        return kernels.supporter_mass(u, c, w, refs.q, queries) / outside[None, :]
    if method == "m3":
        if np.any(refs.class_sizes() == 0):
            raise ValueError("a class has no reference alternatives")
        return kernels.m3_scores(u, c, refs.q, queries)
    if method == "m4":
        check_k(refs, K)
        return kernels.m4_scores(u, c, refs.q, queries, int(K))
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


TIE_TOL = 1e-12


def assign_batch(method: str, refs: ScoredReferenceSet, queries, K: int = None) -> np.ndarray:
    """1-based class per query.

    Scores within ``TIE_TOL`` of the row maximum count as tied, so float
    rounding cannot overturn the lowest-class tie rule of the exact path.
    """
    S = score_batch(method, refs, queries, K)
    top = S.max(axis=1, keepdims=True)
    return np.argmax(S >= top - TIE_TOL, axis=1) + 1
