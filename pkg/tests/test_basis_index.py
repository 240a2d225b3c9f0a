import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gepurity.basis_index import (
    InvalidSectorError,
    NotInSectorError,
    OccupationString,
    SectorBasis,
    enumerate_sector,
    format_label,
    hamming,
    hamming_matrix,
    pair_count_by_distance,
    parse_label,
    sector_pair_count,
    single_excitation_sector,
)


def brute_sector(n, m):
    """Strings with sum of (+1 for digit 0, -1 for digit 1) equal to m, ascending."""
    return [v for v in range(2**n) if sum(1 - 2 * ((v >> i) & 1) for i in range(n)) == m]


def test_sector_dimensions():
    assert enumerate_sector(12, 0).dim == 924
    assert enumerate_sector(6, 0).dim == 20
    assert enumerate_sector(6, 0).strings.tolist() == brute_sector(6, 0)


def test_fully_polarized_sector_is_single_string():
    # digit 0 is spin up, so m = +n is the all-zeros string and m = -n all ones
    assert [format_label(v, 2) for v in enumerate_sector(2, 2).strings] == ["00"]
    assert [format_label(v, 2) for v in enumerate_sector(2, -2).strings] == ["11"]


def test_invalid_sectors():
    with pytest.raises(InvalidSectorError):
        enumerate_sector(5, 0)
    with pytest.raises(InvalidSectorError):
        enumerate_sector(4, 6)


def test_rank_examples():
    full = SectorBasis.full(3)
    assert full.rank(OccupationString.from_str("101")) == 5
    s = enumerate_sector(4, 0)
    assert s.rank(parse_label("0011")) == 0
    assert s.rank(parse_label("1100")) == 5
    assert s.label(5) == "1100"
    with pytest.raises(NotInSectorError):
        s.rank(parse_label("0111"))


@pytest.mark.parametrize("n,m", [(4, 0), (6, 2), (8, 0), (9, -3), (12, 0)])
def test_rank_unrank_roundtrip(n, m):
    s = enumerate_sector(n, m)
    assert s.strings.tolist() == brute_sector(n, m)
    for i in range(s.dim):
        assert s.rank(s.unrank(i)) == i
    assert np.array_equal(s.rank_array(s.strings), np.arange(s.dim))
    assert s.rank_array(np.array([2**n - 1]))[0] == (s.dim - 1 if m == -n else -1)


@given(st.integers(2, 20).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n))))
def test_unrank_rank_property(nk):
    n, k = nk
    s = SectorBasis(n, 2, n - 2 * k)
    for i in {0, s.dim // 2, s.dim - 1}:
        v = s.unrank(i)
        assert bin(v).count("1") == k
        assert s.rank(v) == i


def test_lazy_sector_beyond_eager_limit():
    s = SectorBasis(20, 2, 0)
    assert s.dim == comb(20, 10)
    with pytest.raises(MemoryError):
        s.strings
    assert s.rank(s.unrank(123456)) == 123456


def test_hamming_examples():
    assert hamming(OccupationString.from_str("0011"), OccupationString.from_str("0101")) == 2
    a = OccupationString.from_str("1101")
    assert hamming(a, a) == 0
    assert hamming(OccupationString.from_str("012", 3), OccupationString.from_str("021", 3)) == 2
    with pytest.raises(ValueError):
        hamming(OccupationString.from_str("01"), OccupationString.from_str("011"))


def test_hamming_matrix_matches_digit_count():
    for d, n in [(2, 4), (3, 3)]:
        labels = np.arange(d**n)
        D = hamming_matrix(labels, n, d)
        for a, b in itertools.product(range(d**n), repeat=2):
            da = OccupationString.from_int(a, n, d)
            db = OccupationString.from_int(b, n, d)
            assert D[a, b] == sum(x != y for x, y in zip(da.digits, db.digits))


def test_pair_counts():
    assert pair_count_by_distance(2, 1) == 4
    assert pair_count_by_distance(3, 3) == 4
    assert sum(f * pair_count_by_distance(3, f) for f in range(4)) == 48
    for n in range(1, 7):
        D = hamming_matrix(np.arange(2**n), n)
        iu = np.triu_indices(2**n, 1)
        for f in range(1, n + 1):
            assert pair_count_by_distance(n, f) == int(np.sum(D[iu] == f))


@pytest.mark.parametrize("n,m", [(4, 0), (6, 0), (6, 2), (8, -2)])
def test_sector_pair_counts_brute(n, m):
    s = enumerate_sector(n, m)
    D = hamming_matrix(s.strings, n)
    iu = np.triu_indices(s.dim, 1)
    for f in range(1, n + 1):
        assert sector_pair_count(n, s.n_ones, f) == int(np.sum(D[iu] == f))


def test_single_excitation_sector():
    s = single_excitation_sector(5)
    assert s.dim == 5
    assert all(bin(v).count("1") == 1 for v in s.strings)


def test_describe_roundtrip():
    s = enumerate_sector(6, 2)
    assert SectorBasis.from_description(s.describe()) == s
    assert str(OccupationString.from_int(5, 4)) == "0101"
