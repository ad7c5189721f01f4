import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coordsim.seqarray import digits, group, interleave, kron_power, letterwise, seq_power


def test_digits_letter_zero_most_significant():
    d = digits(3, 2)
    assert d.shape == (8, 3)
    assert d[1].tolist() == [0, 0, 1]
    assert d[4].tolist() == [1, 0, 0]


def test_kron_power_vector():
    p = np.array([0.3, 0.7])
    out = kron_power(p, 3)
    assert out.shape == (8,)
    assert out[0b011] == pytest.approx(0.3 * 0.7 * 0.7)


def test_seq_power_matches_kron_for_matrices():
    rng = np.random.default_rng(0)
    k = rng.random((2, 3))
    assert np.allclose(seq_power(k, 3), kron_power(k, 3))


def test_seq_power_entries():
    rng = np.random.default_rng(1)
    k = rng.random((2, 3, 2))
    out = seq_power(k, 2)
    assert out.shape == (4, 9, 4)
    a, b, c = (1, 0), (2, 1), (0, 1)
    idx = (a[0] * 2 + a[1], b[0] * 3 + b[1], c[0] * 2 + c[1])
    assert out[idx] == pytest.approx(k[a[0], b[0], c[0]] * k[a[1], b[1], c[1]])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.lists(st.integers(1, 3), min_size=1, max_size=3), st.integers(0, 2 ** 31))
def test_interleave_group_round_trip(n, sizes, seed):
    sizes = tuple(sizes)
    rng = np.random.default_rng(seed)
    arr = rng.random((2,) + tuple(s ** n for s in sizes))
    per_letter = interleave(arr, sizes, n)
    assert per_letter.shape == (2,) + (int(np.prod(sizes)),) * n
    assert np.array_equal(group(per_letter, sizes, n), arr)


def test_interleave_of_power_is_letter_power():
    rng = np.random.default_rng(2)
    k = rng.random((2, 3))
    grouped = seq_power(k, 2)
    per_letter = interleave(grouped, (2, 3), 2)
    assert np.allclose(per_letter, np.multiply.outer(k.ravel(), k.ravel()))


def test_letterwise_matches_kron():
    rng = np.random.default_rng(3)
    p = rng.dirichlet(np.ones(8)).reshape(2, 2, 2)
    k = rng.dirichlet(np.ones(3), size=2)
    out = letterwise(p, k, 3)
    ref = (p.reshape(1, 8) @ kron_power(k, 3)).reshape(3, 3, 3)
    assert np.allclose(out, ref)
