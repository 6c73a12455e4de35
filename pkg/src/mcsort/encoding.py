"""Piecewise-linear feature encodings, with optional pairwise interaction blocks.

Vector layout (frozen; model files depend on it): one block of ``gamma_j``
marginal entries per criterion, then for every pair ``j < k`` in
lexicographic order a positive block of ``gamma_j * gamma_k`` entries
(``s``-major) followed by a negative block holding its negation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import kernels
from .dataset import CriterionScale, normalize_directions

FORMS = ("none", "product", "minimum")
_FORM_CODE = {"none": kernels.FORM_NONE, "product": kernels.FORM_PRODUCT, "minimum": kernels.FORM_MINIMUM}


def form_code(form: str) -> int:
    try:
        return _FORM_CODE[form]
    except KeyError:
        raise ValueError(f"unknown form {form!r}; expected one of {FORMS}") from None


@dataclass(frozen=True)
class Layout:
    """Index bookkeeping for an encoding with given piece counts and form."""

    gammas: tuple[int, ...]
    form: str = "none"

    def __post_init__(self):
        object.__setattr__(self, "gammas", tuple(int(g) for g in self.gammas))
        form_code(self.form)

    @property
    def n(self) -> int:
        return len(self.gammas)

    @cached_property
    def marginal_offsets(self) -> tuple[int, ...]:
        return tuple(int(x) for x in np.concatenate(([0], np.cumsum(self.gammas))))

    @property
    def n_marginal(self) -> int:
        return self.marginal_offsets[-1]

    @cached_property
    def pairs(self) -> tuple[tuple[int, int], ...]:
        if self.form == "none":
            return ()
        return tuple((j, k) for j in range(self.n) for k in range(j + 1, self.n))

    @cached_property
    def pair_offsets(self) -> dict:
        """(j, k) -> (start of positive block, start of negative block, block size)."""
        out = {}
        col = self.n_marginal
        for j, k in self.pairs:
            size = self.gammas[j] * self.gammas[k]
            out[(j, k)] = (col, col + size, size)
            col += 2 * size
        return out

    @cached_property
    def dimension(self) -> int:
        return kernels.encoded_dimension(np.array(self.gammas), form_code(self.form))

    def marginal_slice(self, j: int) -> slice:
        return slice(self.marginal_offsets[j], self.marginal_offsets[j + 1])

    def plus_index(self, j: int, k: int, s: int, t: int) -> int:
        start, _, _ = self.pair_offsets[(j, k)]
        return start + s * self.gammas[k] + t

    def minus_index(self, j: int, k: int, s: int, t: int) -> int:
        _, start, _ = self.pair_offsets[(j, k)]
        return start + s * self.gammas[k] + t


@dataclass(frozen=True)
class MarginalEncoding:
    values: np.ndarray


@dataclass(frozen=True)
class EncodedAlternative:
    plain_blocks: tuple[np.ndarray, ...]
    interaction_blocks: dict = field(default_factory=dict)
    form: str = "none"

    @property
    def vector(self) -> np.ndarray:
        parts = list(self.plain_blocks)
        for pair in sorted(self.interaction_blocks):
            plus, minus = self.interaction_blocks[pair]
            parts.extend([plus.ravel(), minus.ravel()])
        return np.concatenate(parts)

    @classmethod
    def from_vector(cls, vec, layout: Layout) -> "EncodedAlternative":
        vec = np.asarray(vec, dtype=float)
        plain = tuple(vec[layout.marginal_slice(j)].copy() for j in range(layout.n))
        inter = {}
        for (j, k), (p0, m0, size) in layout.pair_offsets.items():
            shape = (layout.gammas[j], layout.gammas[k])
            inter[(j, k)] = (vec[p0:p0 + size].reshape(shape), vec[m0:m0 + size].reshape(shape))
        return cls(plain_blocks=plain, interaction_blocks=inter, form=layout.form)


@dataclass(frozen=True)
class WeightVector:
    """Marginal step sizes plus per-pair bonus/penalty coefficient matrices.

    ``eta_plus`` and ``eta_minus`` map a pair ``(j, k)`` to a
    ``gamma_j x gamma_k`` array; pairs absent from the dicts are zero.
    """

    marginal_steps: tuple[np.ndarray, ...]
    eta_plus: dict = field(default_factory=dict)
    eta_minus: dict = field(default_factory=dict)
    form: str = "none"

    @property
    def layout(self) -> Layout:
        return Layout(tuple(len(m) for m in self.marginal_steps), self.form)

    def to_vector(self) -> np.ndarray:
        layout = self.layout
        vec = np.zeros(layout.dimension)
        for j, steps in enumerate(self.marginal_steps):
            vec[layout.marginal_slice(j)] = steps
        for table, which in ((self.eta_plus, 0), (self.eta_minus, 1)):
            for pair, mat in table.items():
                if layout.form == "none":
                    if np.any(np.asarray(mat) != 0):
                        raise ValueError("interaction coefficients given for form 'none'")
                    continue
                start = layout.pair_offsets[tuple(pair)][which]
                mat = np.asarray(mat, dtype=float)
                vec[start:start + mat.size] = mat.ravel()
        return vec

    @classmethod
    def from_vector(cls, vec, layout: Layout) -> "WeightVector":
        vec = np.asarray(vec, dtype=float)
        steps = tuple(vec[layout.marginal_slice(j)].copy() for j in range(layout.n))
        plus, minus = {}, {}
        for (j, k), (p0, m0, size) in layout.pair_offsets.items():
            shape = (layout.gammas[j], layout.gammas[k])
            plus[(j, k)] = vec[p0:p0 + size].reshape(shape).copy()
            minus[(j, k)] = vec[m0:m0 + size].reshape(shape).copy()
        return cls(marginal_steps=steps, eta_plus=plus, eta_minus=minus, form=layout.form)


def characteristic_points(scale: CriterionScale) -> np.ndarray:
    """Breakpoints splitting [alpha, beta] into ``gamma`` equal pieces."""
    k = np.arange(scale.gamma + 1)
    pts = scale.alpha + (scale.beta - scale.alpha) * k / scale.gamma
    pts[-1] = scale.beta
    return pts


def encode_marginal(scale: CriterionScale, g: float) -> MarginalEncoding:
    """Piece activations of a gain-oriented performance ``g`` (clamped to the scale)."""
    g = min(max(float(g), scale.alpha), scale.beta)
    x = characteristic_points(scale)
    v = np.empty(scale.gamma)
    for t in range(1, scale.gamma + 1):
        if g > x[t]:
            v[t - 1] = 1.0
        elif g < x[t - 1]:
            v[t - 1] = 0.0
        else:
            v[t - 1] = (g - x[t - 1]) / (x[t] - x[t - 1])
    return MarginalEncoding(v)


def _pair_block(vj: np.ndarray, vk: np.ndarray, form: str) -> np.ndarray:
    if form == "product":
        return np.outer(vj, vk)
    return np.minimum(vj[:, None], vk[None, :])


def encode_alternative(scales: Sequence[CriterionScale], row, form: str = "none") -> EncodedAlternative:
    """Encode one row of gain-oriented performances (already direction-normalized)."""
    form_code(form)
    row = np.asarray(row, dtype=float)
    if row.shape != (len(scales),):
        raise ValueError(f"row has {row.size} entries, expected {len(scales)}")
    plain = tuple(encode_marginal(s, g).values for s, g in zip(scales, row))
    inter = {}
    if form != "none":
        n = len(scales)
        for j in range(n):
            for k in range(j + 1, n):
                pos = _pair_block(plain[j], plain[k], form)
                inter[(j, k)] = (pos, -pos)
    return EncodedAlternative(plain_blocks=plain, interaction_blocks=inter, form=form)


def ideal_encoding(scales: Sequence[CriterionScale], form: str = "none") -> EncodedAlternative:
    """Encoding of the virtual alternative reaching every beta."""
    return encode_alternative(scales, [s.beta for s in scales], form)


def comprehensive_value(w: WeightVector, e: EncodedAlternative) -> float:
    if w.form != e.form:
        raise ValueError(f"form mismatch: weights {w.form!r}, encoding {e.form!r}")
    wv, ev = w.to_vector(), e.vector
    if wv.shape != ev.shape:
        raise ValueError(f"dimension mismatch: {wv.size} weights vs {ev.size} features")
    return float(wv @ ev)


def encode_table(scales: Sequence[CriterionScale], performances, form: str = "none") -> np.ndarray:
    """Batch encoding of raw performances; cost columns are negated first.

    Returns an ``(N, D)`` matrix whose rows are the encoded vectors.
    """
    perf = normalize_directions(performances, [s.direction for s in scales])
    return kernels.encode_rows(
        perf,
        np.array([s.alpha for s in scales]),
        np.array([s.beta for s in scales]),
        np.array([s.gamma for s in scales], dtype=np.int64),
        form_code(form),
    )


def count_clamped(scales: Sequence[CriterionScale], performances) -> int:
    """Number of performance entries lying outside their criterion's scale."""
    perf = normalize_directions(performances, [s.direction for s in scales])
    lo = np.array([s.alpha for s in scales])
    hi = np.array([s.beta for s in scales])
    return int(np.sum((perf < lo) | (perf > hi)))
