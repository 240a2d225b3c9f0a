"""Bit-string and qudit-string basis bookkeeping.

Basis labels are packed into integers with site 1 as the most significant
digit, so ``np.kron(site1, site2, ...)`` ordering and the integer order agree.
For qubits, digit 0 is the sigma_z = +1 (up) state and digit 1 is
sigma_z = -1 (down).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import comb

import numpy as np

EAGER_LIMIT = 16


class InvalidSectorError(ValueError):
    """Raised for magnetization labels that no n-site string can realize."""


class NotInSectorError(ValueError):
    """Raised when ranking a string that does not belong to the basis."""


def popcount(x):
    """Number of set bits, elementwise for arrays."""
    if isinstance(x, (int, np.integer)):
        return int(x).bit_count()
    return np.bitwise_count(np.asarray(x, dtype=np.uint64)).astype(np.int64)


def digits_of(value: int, n: int, d: int = 2) -> tuple[int, ...]:
    """Digits of a packed label, site 1 first."""
    out = []
    for _ in range(n):
        value, r = divmod(value, d)
        out.append(r)
    return tuple(reversed(out))


def pack_digits(digits, d: int = 2) -> int:
    value = 0
    for v in digits:
        if not 0 <= v < d:
            raise ValueError(f"digit {v} outside 0..{d - 1}")
        value = value * d + int(v)
    return value


def format_label(value: int, n: int, d: int = 2) -> str:
    """ASCII digit string, site 1 leftmost."""
    return "".join(str(v) for v in digits_of(value, n, d))


def parse_label(text: str, d: int = 2) -> int:
    return pack_digits([int(c) for c in text.strip()], d)


@dataclass(frozen=True)
class OccupationString:
    """A length-n label with digits in 0..d-1."""

    digits: tuple[int, ...]
    d: int = 2

    def __post_init__(self):
        if any(not 0 <= v < self.d for v in self.digits):
            raise ValueError(f"digits {self.digits} not all below d={self.d}")

    @classmethod
    def from_str(cls, text: str, d: int = 2) -> "OccupationString":
        return cls(tuple(int(c) for c in text.strip()), d)

    @classmethod
    def from_int(cls, value: int, n: int, d: int = 2) -> "OccupationString":
        return cls(digits_of(value, n, d), d)

    @property
    def n(self) -> int:
        return len(self.digits)

    def __int__(self) -> int:
        return pack_digits(self.digits, self.d)

    def __str__(self) -> str:
        return "".join(map(str, self.digits))


def hamming(a, b, n: int | None = None, d: int = 2) -> int:
    """Number of sites at which two labels differ.

    Accepts two ``OccupationString`` objects, or two packed integers together
    with ``n`` (needed only for d > 2).
    """
    if isinstance(a, OccupationString) or isinstance(b, OccupationString):
        if not (isinstance(a, OccupationString) and isinstance(b, OccupationString)):
            raise TypeError("cannot mix OccupationString and packed labels")
        if a.n != b.n or a.d != b.d:
            raise ValueError(f"length/dimension mismatch: ({a.n},{a.d}) vs ({b.n},{b.d})")
        return sum(x != y for x, y in zip(a.digits, b.digits))
    if d == 2:
        return popcount(int(a) ^ int(b))
    if n is None:
        raise ValueError("n is required for packed qudit labels")
    return sum(x != y for x, y in zip(digits_of(a, n, d), digits_of(b, n, d)))


def hamming_matrix(labels: np.ndarray, n: int, d: int = 2) -> np.ndarray:
    """Pairwise Hamming distances between packed labels."""
    labels = np.asarray(labels, dtype=np.int64)
    if d == 2:
        return popcount(labels[:, None] ^ labels[None, :])
    digs = digit_array(labels, n, d)
    return (digs[:, None, :] != digs[None, :, :]).sum(axis=-1)


def digit_array(labels: np.ndarray, n: int, d: int = 2) -> np.ndarray:
    """(len(labels), n) array of digits, site 1 in column 0."""
    labels = np.asarray(labels, dtype=np.int64)
    powers = d ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return (labels[:, None] // powers[None, :]) % d


def pair_count_by_distance(n: int, f: int) -> int:
    """Unordered pairs of n-bit strings at Hamming distance f: (N/2) C(n, f).

    The f = 0 entry counts the N self-pairs halved, matching the closed form;
    it never enters the weighted sums since it is multiplied by f.
    """
    if n < 1 or not 0 <= f <= n:
        raise ValueError(f"need n >= 1 and 0 <= f <= n, got n={n}, f={f}")
    return (1 << (n - 1)) * comb(n, f)


def sector_pair_count(n: int, n_ones: int, f: int) -> int:
    """Unordered pairs within a fixed-weight sector at distance f.

    Only even distances occur: f = 2t swaps t ones with t zeros.
    """
    if f % 2:
        return 0
    t = f // 2
    total = comb(n, n_ones) * comb(n_ones, t) * comb(n - n_ones, t)
    return total // 2 if f else total


def _colex_rank(value: int) -> int:
    r, i = 0, 1
    pos = 0
    while value:
        if value & 1:
            r += comb(pos, i)
            i += 1
        value >>= 1
        pos += 1
    return r


def _colex_unrank(index: int, n: int, k: int) -> int:
    value = 0
    for i in range(k, 0, -1):
        c = i - 1
        while comb(c + 1, i) <= index:
            c += 1
        index -= comb(c, i)
        value |= 1 << c
    if index:
        raise IndexError("index out of range")
    return value


@dataclass(frozen=True)
class SectorBasis:
    """Ordered product-basis labels: the full space or a fixed-magnetization sector.

    ``magnetization`` is the sum of sigma_z eigenvalues (None for the full
    space). Labels are in ascending packed-integer order.
    """

    n: int
    d: int = 2
    magnetization: int | None = None
    _strings: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise InvalidSectorError(f"n must be >= 1, got {self.n}")
        if self.d < 2:
            raise ValueError(f"d must be >= 2, got {self.d}")
        if self.magnetization is not None:
            m = self.magnetization
            if self.d != 2:
                raise InvalidSectorError("magnetization sectors are defined for qubits only")
            if abs(m) > self.n or (self.n + m) % 2:
                raise InvalidSectorError(f"no {self.n}-site string has magnetization {m}")
        if self.materialized and self._strings is None:
            object.__setattr__(self, "_strings", self._build())

    @classmethod
    def full(cls, n: int, d: int = 2) -> "SectorBasis":
        return cls(n, d)

    @property
    def is_full(self) -> bool:
        return self.magnetization is None

    @property
    def n_ones(self) -> int | None:
        """Number of down spins (digit 1) in every label of a sector."""
        if self.magnetization is None:
            return None
        return (self.n - self.magnetization) // 2

    @property
    def dim(self) -> int:
        if self.is_full:
            return self.d**self.n
        return comb(self.n, self.n_ones)

    @property
    def full_dim(self) -> int:
        return self.d**self.n

    @property
    def materialized(self) -> bool:
        return self.n <= EAGER_LIMIT

    def _build(self) -> np.ndarray:
        if self.is_full:
            arr = np.arange(self.full_dim, dtype=np.int64)
        else:
            arr = np.fromiter(
                (_colex_unrank(i, self.n, self.n_ones) for i in range(self.dim)),
                dtype=np.int64,
                count=self.dim,
            )
        arr.setflags(write=False)
        return arr

    @property
    def strings(self) -> np.ndarray:
        """Packed labels in canonical order (read-only)."""
        if self._strings is None:
            raise MemoryError(f"n={self.n} exceeds the eager limit; use unrank()")
        return self._strings

    def contains(self, value: int) -> bool:
        if not 0 <= value < self.full_dim:
            return False
        return self.is_full or popcount(value) == self.n_ones

    def rank(self, s) -> int:
        value = int(s)
        if isinstance(s, OccupationString) and (s.n != self.n or s.d != self.d):
            raise NotInSectorError(f"{s} has wrong length or local dimension")
        if not self.contains(value):
            raise NotInSectorError(f"{format_label(value, self.n, self.d) if 0 <= value < self.full_dim else value} not in sector")
        return value if self.is_full else _colex_rank(value)

    def unrank(self, index: int) -> int:
        if not 0 <= index < self.dim:
            raise IndexError(f"index {index} outside 0..{self.dim - 1}")
        return index if self.is_full else _colex_unrank(index, self.n, self.n_ones)

    def rank_array(self, values: np.ndarray) -> np.ndarray:
        """Vectorized rank; entries not in the basis map to -1."""
        values = np.asarray(values, dtype=np.int64)
        if self.is_full:
            return np.where((values >= 0) & (values < self.full_dim), values, -1)
        pos = np.searchsorted(self.strings, values)
        pos_c = np.minimum(pos, self.dim - 1)
        return np.where(self.strings[pos_c] == values, pos_c, -1)

    def label(self, index: int) -> str:
        return format_label(self.unrank(index), self.n, self.d)

    def describe(self) -> dict:
        return {"n": self.n, "d": self.d, "magnetization": self.magnetization}

    @classmethod
    def from_description(cls, desc: dict) -> "SectorBasis":
        return cls(int(desc["n"]), int(desc.get("d", 2)), desc.get("magnetization"))


def enumerate_sector(n: int, m: int) -> SectorBasis:
    """All n-qubit labels with total sigma_z equal to m, ascending."""
    return SectorBasis(n, 2, m)


def single_excitation_sector(n: int) -> SectorBasis:
    """The n-dimensional sector with one flipped spin (S_z = n - 2)."""
    return SectorBasis(n, 2, n - 2)
