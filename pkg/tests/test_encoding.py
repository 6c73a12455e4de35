import numpy as np
import pytest
from hypothesis import given, strategies as st

from mcsort.dataset import COST, CriterionScale
from mcsort.encoding import (Layout, WeightVector, characteristic_points, comprehensive_value,
                             count_clamped, encode_alternative, encode_marginal, encode_table,
                             ideal_encoding)


@pytest.mark.parametrize("a, b, g, expected", [
    (0, 10, 2, [0, 5, 10]),
    (-1, 1, 4, [-1, -0.5, 0, 0.5, 1]),
    (3, 7, 1, [3, 7]),
])
def test_characteristic_points(a, b, g, expected):
    assert np.allclose(characteristic_points(CriterionScale(a, b, gamma=g)), expected)


@pytest.mark.parametrize("g, expected", [(7, [1, 0.4]), (0, [0, 0]), (10, [1, 1]), (12, [1, 1]), (-3, [0, 0])])
def test_encode_marginal(g, expected):
    assert np.allclose(encode_marginal(CriterionScale(0, 10, gamma=2), g).values, expected)


def two_unit_scales():
    return [CriterionScale(0, 1, gamma=1), CriterionScale(0, 1, gamma=1)]


def test_product_block():
    e = encode_alternative(two_unit_scales(), [0.5, 0.8], "product")
    plus, minus = e.interaction_blocks[(0, 1)]
    assert np.allclose(plus, [[0.4]]) and np.allclose(minus, [[-0.4]])
    assert np.allclose(e.vector, [0.5, 0.8, 0.4, -0.4])


def test_minimum_block():
    e = encode_alternative(two_unit_scales(), [0.5, 0.8], "minimum")
    assert np.allclose(e.vector, [0.5, 0.8, 0.5, -0.5])


def test_form_none_has_no_interactions():
    scales = [CriterionScale(0, 1, gamma=2), CriterionScale(0, 1, gamma=3)]
    e = encode_alternative(scales, [0.3, 0.3], "none")
    assert e.interaction_blocks == {} and e.vector.size == 5


def test_block_layout_lexicographic():
    scales = [CriterionScale(0, 1, gamma=g) for g in (1, 2, 1)]
    lay = Layout((1, 2, 1), "product")
    assert lay.pairs == ((0, 1), (0, 2), (1, 2))
    assert lay.pair_offsets[(0, 1)] == (4, 6, 2)
    assert lay.pair_offsets[(0, 2)] == (8, 9, 1)
    assert lay.pair_offsets[(1, 2)] == (10, 12, 2)
    assert lay.dimension == 14
    row = [0.7, 0.25, 0.9]
    e = encode_alternative(scales, row, "product")
    v = e.vector
    plain = [encode_marginal(s, g).values for s, g in zip(scales, row)]
    # s-major: entry (s, t) at plus_index
    for (j, k) in lay.pairs:
        for s in range(lay.gammas[j]):
            for t in range(lay.gammas[k]):
                assert v[lay.plus_index(j, k, s, t)] == pytest.approx(plain[j][s] * plain[k][t])
                assert v[lay.minus_index(j, k, s, t)] == pytest.approx(-plain[j][s] * plain[k][t])


def test_ideal_encoding():
    assert np.array_equal(ideal_encoding(two_unit_scales(), "product").vector, [1, 1, 1, -1])
    scales = [CriterionScale(0, 1, gamma=2), CriterionScale(5, 9, gamma=2)]
    assert np.array_equal(ideal_encoding(scales, "none").vector, np.ones(4))
    assert np.array_equal(ideal_encoding(scales, "minimum").vector, ideal_encoding(scales, "product").vector)


def test_comprehensive_value_examples():
    w = WeightVector((np.array([0.5]), np.array([0.5])))
    e = encode_alternative(two_unit_scales(), [1, 1])
    assert comprehensive_value(w, e) == 1.0
    w = WeightVector((np.array([0.6]), np.array([0.6])), {}, {(0, 1): np.array([[0.2]])}, "product")
    assert comprehensive_value(w, ideal_encoding(two_unit_scales(), "product")) == pytest.approx(1.0, abs=1e-15)


def test_published_additive_model_is_normalized():
    steps = [[0.1724, 0.2474], [0.0806, 0.1345], [0.0612, 0.1345], [0.0557, 0.1137]]
    w = WeightVector(tuple(np.array(s) for s in steps))
    scales = [CriterionScale(0, 1, gamma=2)] * 4
    assert comprehensive_value(w, ideal_encoding(scales)) == pytest.approx(1.0, abs=1e-12)


def test_comprehensive_value_mismatch():
    w = WeightVector((np.array([0.5]), np.array([0.5])))
    with pytest.raises(ValueError, match="form mismatch"):
        comprehensive_value(w, ideal_encoding(two_unit_scales(), "product"))
    w3 = WeightVector((np.array([0.5]), np.array([0.5]), np.array([0.0])))
    with pytest.raises(ValueError, match="dimension"):
        comprehensive_value(w3, ideal_encoding(two_unit_scales()))


def test_weight_vector_round_trip():
    lay = Layout((2, 1, 3), "minimum")
    vec = np.random.default_rng(0).random(lay.dimension)
    assert np.array_equal(WeightVector.from_vector(vec, lay).to_vector(), vec)


def test_encode_table_matches_scalar_path_and_handles_cost():
    rng = np.random.default_rng(1)
    scales = [CriterionScale(0, 2, gamma=3), CriterionScale(-5, -1, COST, gamma=2), CriterionScale(1, 4, gamma=1)]
    raw = rng.uniform([-.5, 0, 0], [2.5, 6, 5], size=(20, 3))
    for form in ("none", "product", "minimum"):
        M = encode_table(scales, raw, form)
        for i, row in enumerate(raw):
            gain = row * np.array([1, -1, 1])
            assert np.allclose(M[i], encode_alternative(scales, gain, form).vector, atol=1e-15)


def test_count_clamped():
    scales = [CriterionScale(0, 1), CriterionScale(-1, 0, COST)]
    assert count_clamped(scales, [[0.5, 0.5], [2.0, 2.0], [-1, 0.5]]) == 3


scale_st = st.tuples(st.floats(-100, 100), st.floats(0.01, 100), st.integers(1, 5)).map(
    lambda t: CriterionScale(t[0], t[0] + t[1], gamma=t[2]))


@given(scale_st, st.floats(-200, 200), st.floats(-200, 200))
def test_marginal_monotone_and_staircase(scale, g1, g2):
    lo, hi = min(g1, g2), max(g1, g2)
    a, b = encode_marginal(scale, lo).values, encode_marginal(scale, hi).values
    assert np.all(a <= b + 1e-12)
    for v in (a, b):
        assert np.all((v >= 0) & (v <= 1))
        # ones, then at most one fractional entry, then zeros
        k = int(np.sum(v == 1.0))
        assert np.all(v[:k] == 1.0)
        assert np.all(v[k + 1:] == 0.0)


@given(st.integers(1, 3), st.integers(1, 3), st.sampled_from(["product", "minimum"]),
       st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_interaction_blocks_monotone(gj, gk, form, x1, x2, y1, y2):
    scales = [CriterionScale(0, 1, gamma=gj), CriterionScale(0, 1, gamma=gk)]
    lo = encode_alternative(scales, [min(x1, x2), min(y1, y2)], form).interaction_blocks[(0, 1)][0]
    hi = encode_alternative(scales, [max(x1, x2), max(y1, y2)], form).interaction_blocks[(0, 1)][0]
    assert np.all(lo <= hi + 1e-12)
    assert np.all((lo >= 0) & (hi <= 1))


@given(st.lists(st.floats(0, 1), min_size=3, max_size=3), st.lists(st.floats(0, 1), min_size=3, max_size=3),
       st.lists(st.floats(0.0, 1.0), min_size=6, max_size=6))
def test_additive_value_monotone(r1, r2, raw_w):
    scales = [CriterionScale(0, 1, gamma=2)] * 3
    w = WeightVector(tuple(np.array(raw_w[2 * j:2 * j + 2]) for j in range(3)))
    lo = encode_alternative(scales, np.minimum(r1, r2))
    hi = encode_alternative(scales, np.maximum(r1, r2))
    assert comprehensive_value(w, lo) <= comprehensive_value(w, hi) + 1e-12


@given(st.lists(st.floats(0.01, 1.0), min_size=4, max_size=4))
def test_normalized_weights_give_unit_ideal(raw):
    raw = np.array(raw) / np.sum(raw)
    w = WeightVector((raw[:2], raw[2:]))
    scales = [CriterionScale(0, 1, gamma=2), CriterionScale(3, 9, gamma=2)]
    assert abs(comprehensive_value(w, ideal_encoding(scales)) - 1.0) <= 1e-12
