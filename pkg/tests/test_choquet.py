import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcsort.choquet import (MobiusWeights, assemble_p4, capacity_from_mobius, choquet_sorted, choquet_value,
                            fit_ecdf, mobius_features, mobius_from_capacity, monotonicity_rows_p4,
                            pair_list, train_choquet)
from mcsort.qpsolve import solve

from conftest import synthetic_table


def test_ecdf_examples():
    s = fit_ecdf([1, 2, 2, 5])
    assert s.apply(2) == 0.75
    assert s.apply(0.5) == 0.0
    assert s.apply(5) == 1.0
    assert s.apply(3.7) == 0.75  # step function, no interpolation
    with pytest.raises(ValueError):
        fit_ecdf(np.array([]))


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20), st.floats(-2e3, 2e3), st.floats(-2e3, 2e3))
def test_ecdf_bounded_nondecreasing(col, a, b):
    s = fit_ecdf(col)
    lo, hi = s.apply(min(a, b)), s.apply(max(a, b))
    assert 0 <= lo <= hi <= 1


def test_ecdf_matrix():
    s = fit_ecdf(np.array([[1.0, 10.0], [2.0, 20.0]]))
    assert np.array_equal(s.apply([[1.5, 25.0]]), [[0.5, 1.0]])
    assert np.array_equal(s.apply([2.0, 0.0]), [1.0, 0.0])


def test_features():
    assert np.allclose(mobius_features([0.4, 0.8]), [0.4, 0.8, 0.4])
    assert np.array_equal(mobius_features(np.ones(4)), np.ones(10))
    assert mobius_features(np.zeros(3)).size == 6


def test_value_examples():
    m = MobiusWeights([0.3, 0.5], [0.2])
    assert choquet_value(m, mobius_features([0.4, 0.8])) == pytest.approx(0.6, abs=1e-15)
    assert choquet_sorted(lambda T: capacity_from_mobius(m, T), [0.4, 0.8]) == pytest.approx(0.6, abs=1e-15)
    assert choquet_value(m, mobius_features([1, 1])) == pytest.approx(1.0)
    assert choquet_value(m, mobius_features([0, 0])) == 0.0
    with pytest.raises(ValueError):
        choquet_value(m, [1.0, 1.0])


def test_capacity_examples():
    m = MobiusWeights([0.3, 0.5], [0.2])
    assert capacity_from_mobius(m, ()) == 0
    assert capacity_from_mobius(m, (0, 1)) == pytest.approx(1.0)
    assert capacity_from_mobius(m, (1,)) == 0.5


def test_p4_rows():
    R = monotonicity_rows_p4(2)
    # columns m1, m2, m12; T = {partner} rows only (T = empty is the bound on m_i)
    assert sorted(map(tuple, R)) == [(0, 1, 1), (1, 0, 1)]
    assert monotonicity_rows_p4(3).shape[0] == 3 * (2 ** 2 - 1)
    with pytest.raises(ValueError):
        monotonicity_rows_p4(13)


def test_p4_has_no_c2_term():
    theta = np.array([[0.2, 0.2, 0.1], [0.8, 0.7, 0.6]])
    qp = assemble_p4(theta, np.zeros((3, 3)), 5.0)
    assert np.allclose(qp.P, 1e-12 * np.eye(4))
    assert np.array_equal(qp.lb[:2], [0, 0]) and qp.lb[2] == -np.inf and qp.lb[3] == 0


def random_feasible_mobius(rng, n):
    """Random 2-additive masses satisfying every (P4) monotonicity row, normalized to 1."""
    pairs = pair_list(n)
    while True:
        s = rng.random(n)
        p = rng.uniform(-0.5, 0.5, len(pairs)) * (rng.random(len(pairs)) < 0.7)
        vec = np.concatenate([s, p])
        if np.all(monotonicity_rows_p4(n) @ vec >= 0) and vec.sum() > 0:
            return MobiusWeights.from_vector(vec / vec.sum())


@settings(max_examples=50)
@given(st.integers(0, 2**31), st.integers(2, 5))
def test_forms_agree_and_monotone(seed, n):
    rng = np.random.default_rng(seed)
    m = random_feasible_mobius(rng, n)
    cap = lambda T: capacity_from_mobius(m, T)
    for _ in range(20):
        x = rng.random(n)
        assert abs(choquet_value(m, mobius_features(x)) - choquet_sorted(cap, x)) <= 1e-12
        y = np.maximum(x, rng.random(n) * (rng.random(n) < 0.5))
        assert choquet_value(m, mobius_features(y)) >= choquet_value(m, mobius_features(x)) - 1e-12
    assert capacity_from_mobius(m, range(n)) == pytest.approx(1.0, abs=1e-12)
    subsets = [T for r in range(n + 1) for T in itertools.combinations(range(n), r)]
    for T in subsets:
        for i in T:
            assert cap(tuple(j for j in T if j != i)) <= cap(T) + 1e-12


@given(st.integers(0, 2**31), st.integers(1, 5))
def test_mobius_round_trip(seed, n):
    rng = np.random.default_rng(seed)
    m = MobiusWeights(rng.random(n), rng.uniform(-1, 1, n * (n - 1) // 2))
    cap = lambda T: capacity_from_mobius(m, T)
    for i in range(n):
        assert mobius_from_capacity(cap, (i,)) == pytest.approx(m.singletons[i], abs=1e-12)
    for i, j in pair_list(n):
        assert mobius_from_capacity(cap, (i, j)) == pytest.approx(m.pair_mass(i, j), abs=1e-12)
    for T in itertools.combinations(range(n), 3):
        assert mobius_from_capacity(cap, T) == pytest.approx(0.0, abs=1e-12)


def test_train_choquet_contract():
    t = synthetic_table(n_alt=40, n_crit=3, q=3, noise=0.03, seed=2)
    for C1 in (1e-3, 1.0, 1e3):
        model = train_choquet(t, C1=C1)
        assert model.kkt_max <= 1e-6
        vec = model.mobius.to_vector()
        assert vec.sum() == pytest.approx(1.0, abs=1e-8)
        assert np.all(model.mobius.singletons >= -1e-8)
        assert np.all(monotonicity_rows_p4(3) @ vec >= -1e-8)
        assert model.d >= 0
        assert model.capacity(range(3)) == pytest.approx(1.0, abs=1e-8)


def test_train_choquet_cost_direction():
    t = synthetic_table(n_alt=30, n_crit=2, q=2, noise=0.0, seed=4)
    from mcsort.dataset import PerformanceTable
    flipped = PerformanceTable(t.alternatives, t.performances * [1, -1], t.labels, t.q, t.criterion_names)
    a = train_choquet(t)
    b = train_choquet(flipped, ["gain", "cost"])
    assert np.allclose(a.values(t.performances), b.values(flipped.performances), atol=1e-9)
