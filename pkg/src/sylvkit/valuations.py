"""Exact q-adic valuations of factorials and of products of consecutive integers.

Everything here is integer arithmetic. The product P(m, n) = (m+1)(m+2)...(m+n)
is only ever multiplied out by the brute-force oracle.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, ResourceLimitError
from .primes import PrimeTable, is_prime_trial

#: Largest m + n the brute-force factorization oracle will accept.
ORACLE_SCALE_LIMIT = 10_000


@dataclass(frozen=True, order=True)
class ConsecutiveProduct:
    """The product (m+1)(m+2)...(m+n), represented by the pair (m, n)."""

    m: int
    n: int

    def __post_init__(self):
        if not (self.m >= self.n >= 2):
            raise DomainError(f"need m >= n >= 2, got m={self.m}, n={self.n}")

    @property
    def top(self) -> int:
        return self.m + self.n

    def terms(self) -> range:
        return range(self.m + 1, self.m + self.n + 1)


@dataclass(frozen=True)
class LargePrimeWitness:
    """Distinct primes q > n dividing P(m, n), each paired with the term it divides."""

    product: ConsecutiveProduct
    primes: tuple[tuple[int, int], ...]

    def __len__(self) -> int:
        return len(self.primes)

    @property
    def values(self) -> list[int]:
        return [q for q, _ in self.primes]

    def to_dict(self) -> dict:
        return {
            "m": self.product.m,
            "n": self.product.n,
            "primes": [[q, term] for q, term in self.primes],
        }


@lru_cache(maxsize=4096)
def _require_prime(q: int) -> None:
    if not is_prime_trial(q):
        raise DomainError(f"{q} is not prime")


def factorial_valuation(n: int, q: int) -> int:
    """v_q(n!) by Legendre's formula."""
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    _require_prime(q)
    total = 0
    while n:
        n //= q
        total += n
    return total


def product_valuation(p: ConsecutiveProduct, q: int) -> int:
    """v_q(P(m, n)) as the sum over i of floor((m+n)/q^i) - floor(m/q^i)."""
    _require_prime(q)
    top, m = p.top, p.m
    total = 0
    power = q
    while power <= top:
        total += top // power - m // power
        power *= q
    return total


def max_power_exponent(q: int, bound: int) -> int:
    """Largest e with q**e <= bound, by repeated integer multiplication."""
    if q < 2:
        raise DomainError(f"base must be >= 2, got {q}")
    if bound < 1:
        raise DomainError(f"bound must be >= 1, got {bound}")
    e, power = 0, q
    while power <= bound:
        e += 1
        power *= q
    return e


def valuation_bounds(p: ConsecutiveProduct, q: int) -> tuple[int, int]:
    """Bracket (v_q(n!), v_q(n!) + floor(log(m+n)/log q)) around v_q(P(m, n))."""
    lo = factorial_valuation(p.n, q)
    return lo, lo + max_power_exponent(q, p.top)


def large_prime_divisors(p: ConsecutiveProduct, table: PrimeTable) -> LargePrimeWitness:
    """Primes q > n dividing P(m, n).

    Since q exceeds the window length n, ]m, m+n] holds at most one multiple of q,
    and q divides the product exactly when floor((m+n)/q) > floor(m/q).
    """
    m, n, top = p.m, p.n, p.top
    table._check(top)
    qs = table.primes_upto(top)
    qs = qs[qs > n]
    hit = (top // qs) > (m // qs)
    qs = qs[hit]
    terms = (top // qs) * qs
    return LargePrimeWitness(p, tuple(zip(qs.tolist(), terms.tolist())))


def large_prime_count(p: ConsecutiveProduct, table: PrimeTable) -> int:
    """Number of distinct primes q > n dividing P(m, n)."""
    m, n, top = p.m, p.n, p.top
    # every prime in ]m, m+n] is itself a term
    count = table.count_in_open_interval(m, top + 1)
    if m > n:
        qs = table.primes_in_open_interval_array(n, m + 1)
        count += int(np.count_nonzero((top // qs) > (m // qs)))
    return count


def _factor_small(x: int, into: Counter) -> None:
    d = 2
    while d * d <= x:
        while x % d == 0:
            into[d] += 1
            x //= d
        d += 1 if d == 2 else 2
    if x > 1:
        into[x] += 1


def brute_force_product_factorization(
    p: ConsecutiveProduct, *, scale_limit: int | None = None
) -> dict[int, int]:
    """Full factorization of P(m, n) by trial-dividing each term."""
    limit = ORACLE_SCALE_LIMIT if scale_limit is None else scale_limit
    if p.top > limit:
        raise ResourceLimitError(f"m+n={p.top} exceeds oracle scale limit {limit}")
    exps: Counter = Counter()
    for term in p.terms():
        _factor_small(term, exps)
    return dict(sorted(exps.items()))
