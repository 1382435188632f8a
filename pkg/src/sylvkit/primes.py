"""Sieve-backed prime tables: primality, exact prime counting and interval enumeration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, OutOfCoverageError, ResourceLimitError

#: Largest table limit accepted by :func:`build_table` unless overridden.
MAX_TABLE_LIMIT = 50_000_000
DEFAULT_SEGMENT_SIZE = 1 << 18


def _small_primes(bound: int) -> np.ndarray:
    """Plain sieve of Eratosthenes returning all primes <= bound."""
    if bound < 2:
        return np.empty(0, dtype=np.int64)
    flags = np.ones(bound + 1, dtype=bool)
    flags[:2] = False
    for p in range(2, math.isqrt(bound) + 1):
        if flags[p]:
            flags[p * p :: p] = False
    return np.flatnonzero(flags).astype(np.int64)


def segmented_sieve(limit: int, segment_size: int = DEFAULT_SEGMENT_SIZE) -> np.ndarray:
    """Primality flags over [0, limit], sieved one segment at a time."""
    if segment_size < 1:
        raise DomainError("segment_size must be positive")
    flags = np.zeros(limit + 1, dtype=bool)
    base = _small_primes(math.isqrt(limit))
    low = 0
    while low <= limit:
        high = min(low + segment_size, limit + 1)  # exclusive
        seg = np.ones(high - low, dtype=bool)
        for p in base:
            p = int(p)
            if p * p >= high:
                break
            start = max(p * p, -(-low // p) * p)
            seg[start - low :: p] = False
        flags[low:high] = seg
        low = high
    flags[: min(2, limit + 1)] = False
    return flags


@dataclass(frozen=True)
class PrimeTable:
    """Immutable table of primality and cumulative prime counts over [0, limit]."""

    limit: int
    primality: np.ndarray = field(repr=False)
    cumulative_counts: np.ndarray = field(repr=False)

    def _check(self, x: int) -> None:
        if x > self.limit:
            raise OutOfCoverageError(f"{x} exceeds prime table limit {self.limit}")
        if x < 0:
            raise DomainError(f"negative argument {x}")

    def is_prime(self, x: int) -> bool:
        self._check(x)
        return bool(self.primality[x])

    def prime_count(self, x: int) -> int:
        """Exact pi(x)."""
        self._check(x)
        return int(self.cumulative_counts[x])

    def primes_in_open_interval(self, lo: int, hi: int) -> list[int]:
        """All primes p with lo < p < hi, ascending."""
        if lo >= hi:
            raise DomainError(f"empty interval ]{lo}, {hi}[")
        self._check(hi)
        start = max(lo + 1, 0)
        return (np.flatnonzero(self.primality[start:hi]) + start).tolist()

    def primes_in_open_interval_array(self, lo: int, hi: int) -> np.ndarray:
        """Like :meth:`primes_in_open_interval` but returns an int64 array."""
        if lo >= hi:
            raise DomainError(f"empty interval ]{lo}, {hi}[")
        self._check(hi)
        start = max(lo + 1, 0)
        return np.flatnonzero(self.primality[start:hi]) + start

    def count_in_open_interval(self, lo: int, hi: int) -> int:
        """Number of primes p with lo < p < hi."""
        if lo >= hi:
            raise DomainError(f"empty interval ]{lo}, {hi}[")
        self._check(hi)
        return int(self.cumulative_counts[hi - 1]) - int(self.cumulative_counts[max(lo, 0)])

    def primes_upto(self, x: int) -> np.ndarray:
        self._check(x)
        return np.flatnonzero(self.primality[: x + 1])


def build_table(
    limit: int,
    *,
    segment_size: int = DEFAULT_SEGMENT_SIZE,
    max_limit: int = MAX_TABLE_LIMIT,
) -> PrimeTable:
    """Sieve [0, limit] and return the frozen :class:`PrimeTable`."""
    if limit < 2:
        raise DomainError(f"table limit must be >= 2, got {limit}")
    if limit > max_limit:
        raise ResourceLimitError(
            f"table limit {limit} exceeds the configured maximum {max_limit}"
        )
    flags = segmented_sieve(limit, segment_size)
    counts = np.cumsum(flags, dtype=np.int64)
    flags.setflags(write=False)
    counts.setflags(write=False)
    return PrimeTable(limit, flags, counts)


def prime_count(table: PrimeTable, x: int) -> int:
    return table.prime_count(x)


def primes_in_open_interval(table: PrimeTable, lo: int, hi: int) -> list[int]:
    return table.primes_in_open_interval(lo, hi)


def is_prime_trial(x: int) -> bool:
    """Trial-division primality, kept independent of the sieve for cross-checks."""
    if x < 2:
        return False
    if x % 2 == 0:
        return x == 2
    d = 3
    while d * d <= x:
        if x % d == 0:
            return False
        d += 2
    return True
