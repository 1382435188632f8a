import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from sylvkit.errors import DomainError, ResourceLimitError
from sylvkit.primes import build_table, is_prime_trial
from sylvkit.valuations import (
    ConsecutiveProduct,
    brute_force_product_factorization,
    factorial_valuation,
    large_prime_count,
    large_prime_divisors,
    max_power_exponent,
    product_valuation,
    valuation_bounds,
)

P = ConsecutiveProduct
SMALL_PRIMES = [q for q in range(2, 128) if is_prime_trial(q)]


@pytest.fixture(scope="module")
def table():
    return build_table(20_000)


def _v(x: int, q: int) -> int:
    e = 0
    while x % q == 0:
        x //= q
        e += 1
    return e


def test_factorial_valuation_examples():
    assert factorial_valuation(10, 2) == _v(math.factorial(10), 2) == 8
    assert factorial_valuation(0, 5) == 0
    assert factorial_valuation(25, 5) == _v(math.factorial(25), 5) == 6


def test_factorial_valuation_rejects_composite():
    with pytest.raises(DomainError):
        factorial_valuation(10, 4)
    with pytest.raises(DomainError):
        product_valuation(P(5, 5), 9)


def test_product_valuation_examples():
    assert math.prod(P(5, 5).terms()) == 30240
    assert product_valuation(P(5, 5), 7) == 1
    assert product_valuation(P(5, 5), 2) == 5
    assert product_valuation(P(10, 2), 11) == 1


def test_product_valuation_is_factorial_difference():
    for m in range(2, 80):
        for n in range(2, m + 1):
            for q in (2, 3, 5, 7):
                expected = factorial_valuation(m + n, q) - factorial_valuation(m, q)
                assert product_valuation(P(m, n), q) == expected


@pytest.mark.parametrize("m, n, q, expected", [((5), 5, 2, (3, 6)), (5, 5, 7, (0, 1)), (2, 2, 3, (0, 1))])
def test_valuation_bounds_examples(m, n, q, expected):
    lo, hi = valuation_bounds(P(m, n), q)
    assert (lo, hi) == expected
    assert lo <= product_valuation(P(m, n), q) <= hi


def test_max_power_exponent_at_exact_powers():
    # floating log ratios misjudge several of these
    for q in SMALL_PRIMES[:10]:
        for e in range(1, 12):
            assert max_power_exponent(q, q ** e) == e
            assert max_power_exponent(q, q ** e - 1) == e - 1
    assert math.floor(math.log(243) / math.log(3)) == 4  # the float trap
    assert max_power_exponent(3, 243) == 5


def test_large_prime_examples(table):
    assert large_prime_divisors(P(5, 5), table).primes == ((7, 7),)
    assert large_prime_divisors(P(6, 6), table).primes == ((7, 7), (11, 11))
    assert large_prime_divisors(P(2, 2), table).primes == ((3, 3),)


def test_brute_force_examples():
    assert brute_force_product_factorization(P(5, 5)) == {2: 5, 3: 3, 5: 1, 7: 1}
    assert brute_force_product_factorization(P(2, 2)) == {2: 2, 3: 1}
    assert brute_force_product_factorization(P(10, 2)) == {2: 2, 3: 1, 11: 1}


def test_brute_force_reconstructs_log_product():
    for m, n in [(5, 5), (37, 20), (900, 123)]:
        f = brute_force_product_factorization(P(m, n))
        lhs = sum(e * math.log(q) for q, e in f.items())
        rhs = sum(math.log(t) for t in P(m, n).terms())
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_brute_force_scale_guard():
    with pytest.raises(ResourceLimitError):
        brute_force_product_factorization(P(9_000, 1_500))
    assert brute_force_product_factorization(P(10, 2), scale_limit=12)
    with pytest.raises(ResourceLimitError):
        brute_force_product_factorization(P(10, 2), scale_limit=11)


def test_product_domain():
    with pytest.raises(DomainError):
        P(3, 4)
    with pytest.raises(DomainError):
        P(5, 1)


def test_oracle_equivalence_valuations_exhaustive():
    for m in range(2, 61):
        for n in range(2, m + 1):
            f = brute_force_product_factorization(P(m, n))
            for q in SMALL_PRIMES:
                v = product_valuation(P(m, n), q)
                assert v == f.get(q, 0)
                lo, hi = valuation_bounds(P(m, n), q)
                assert lo <= v <= hi


def test_oracle_equivalence_large_primes_exhaustive(table):
    for m in range(2, 41):
        for n in range(2, m + 1):
            p = P(m, n)
            f = brute_force_product_factorization(p)
            w = large_prime_divisors(p, table)
            assert w.values == [q for q in f if q > n]
            assert large_prime_count(p, table) == len(w)
            for q, term in w.primes:
                assert m < term <= m + n and term % q == 0
                # the whole q-part of P sits in that single term
                assert f[q] == _v(term, q)
                assert q ** f[q] <= m + n


@settings(max_examples=300, deadline=None)
@given(st.data())
def test_floor_lemma(data):
    m = data.draw(st.integers(2, 5000))
    n = data.draw(st.integers(2, m))
    q = data.draw(st.sampled_from(SMALL_PRIMES))
    i = 1
    while q ** i <= m + n:
        qi = q ** i
        mid = (m + n) // qi - m // qi
        assert n // qi <= mid <= n // qi + 1
        i += 1


def test_witness_invariants(table):
    rng = random.Random(7)
    for _ in range(200):
        n = rng.randint(2, 3000)
        m = rng.randint(n, 9000)
        w = large_prime_divisors(P(m, n), table)
        qs = w.values
        assert qs == sorted(set(qs))
        assert all(q > n and t % q == 0 for q, t in w.primes)
