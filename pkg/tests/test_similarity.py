import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chatter_atlas.errors import InputError
from chatter_atlas.similarity import (
    AffinityMatrix,
    build_affinity_matrix,
    check_affinity_matrix,
    cosine_similarity,
    median_preference,
)


def test_cosine_hand_values():
    assert cosine_similarity([1, 0], [1, 0]) == 1.0
    assert cosine_similarity([1, 0], [0, 1]) == 0.0
    # dot 8, norms 3 and 3
    assert cosine_similarity([1, 2, 2], [2, 1, 2]) == pytest.approx(8 / 9, abs=1e-15)


def test_cosine_errors():
    with pytest.raises(InputError):
        cosine_similarity([1, 0], [1, 0, 0])
    with pytest.raises(InputError):
        cosine_similarity([0, 0], [1, 0])


def test_cosine_is_clamped():
    v = np.array([0.1, 0.2, 0.3])
    assert -1.0 <= cosine_similarity(v, 3 * v) <= 1.0
    assert cosine_similarity(v, -v) == -1.0


finite = st.floats(-1e3, 1e3, allow_nan=False).filter(lambda x: abs(x) > 1e-3)


@settings(max_examples=200)
@given(st.integers(2, 16).flatmap(lambda d: st.tuples(arrays(float, d, elements=finite), arrays(float, d, elements=finite))),
       st.floats(1e-3, 1e3))
def test_cosine_properties(pair, alpha):
    a, b = pair
    assert cosine_similarity(a, b) == cosine_similarity(b, a)
    assert cosine_similarity(a, a) == pytest.approx(1.0, abs=1e-12)
    assert cosine_similarity(alpha * a, b) == pytest.approx(cosine_similarity(a, b), abs=1e-12)
    assert -1.0 <= cosine_similarity(a, b) <= 1.0


def test_affinity_matrix_hand_fixture():
    s = build_affinity_matrix([[1, 0], [1, 0], [0, 1], [0, 1]], preference=0.0)
    expected = np.array([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=float)
    np.testing.assert_array_equal(s.values, expected)
    assert s.preference == 0.0 and s.n == 4


def test_identical_pair():
    s = build_affinity_matrix([[0.6, 0.8], [0.6, 0.8]], preference=-2.5)
    np.testing.assert_allclose(s.values, [[-2.5, 1.0], [1.0, -2.5]], atol=1e-15)


def test_needs_two_vectors():
    with pytest.raises(InputError):
        build_affinity_matrix([[1.0, 0.0]], 0.0)


def test_median_preference_hand_values():
    # off-diagonal multiset {1,1,0,0,0,0} -> 0
    assert median_preference([[1, 0], [1, 0], [0, 1], [0, 1]]) == 0.0
    # one pair at cos 0.5 (60 degrees)
    assert median_preference([[1, 0], [0.5, np.sqrt(3) / 2]]) == pytest.approx(0.5, abs=1e-12)


def test_median_even_count_takes_middle_mean():
    # unit vectors in 3-d with chosen pairwise cosines 0.2 / 0.4 / 0.6 plus the
    # mirrored copies give six values whose middle pair is (0.4, 0.4)
    a = np.array([1.0, 0.0, 0.0])
    b = np.array([0.2, np.sqrt(1 - 0.04), 0.0])
    cz = (0.6 - 0.4 * 0.2) / b[1]
    c = np.array([0.4, cz, np.sqrt(1 - 0.16 - cz**2)])
    assert median_preference([a, b, c]) == pytest.approx(0.4, abs=1e-12)


def test_default_preference_is_median():
    vecs = np.random.default_rng(1).normal(size=(6, 5))
    assert build_affinity_matrix(vecs).preference == median_preference(vecs)


@settings(max_examples=50)
@given(st.integers(2, 12), st.integers(2, 20), st.integers(0, 2**32 - 1), st.floats(-2, 2))
def test_affinity_invariants(n, d, seed, pref):
    vecs = np.random.default_rng(seed).normal(size=(n, d))
    s = build_affinity_matrix(vecs, pref).values
    off = ~np.eye(n, dtype=bool)
    assert np.isfinite(s).all()
    assert (s == s.T).all()
    assert (np.abs(s[off]) <= 1 + 1e-9).all()
    assert (np.diag(s) == pref).all()
    check_affinity_matrix(s)


def test_check_rejects_asymmetric_and_nonfinite():
    with pytest.raises(InputError):
        check_affinity_matrix(np.array([[0, 1], [0.5, 0]]))
    with pytest.raises(InputError):
        check_affinity_matrix(np.array([[0, np.nan], [np.nan, 0]]))


def test_csv_dump_round_trips():
    s = build_affinity_matrix(np.random.default_rng(0).normal(size=(3, 4)), -0.25)
    back = np.loadtxt(s.to_csv().splitlines(), delimiter=",")
    np.testing.assert_array_equal(back, s.values)
    assert isinstance(s, AffinityMatrix)
