import math
import random
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from sylvkit.bounds import (
    C_EXACT,
    RATIO_CEILING,
    CertifiedValue,
    Precision,
    central_binomial_bounds,
    constants,
    decide_greater,
    escalate_precision,
    eval_b,
    eval_E,
    eval_E_factored,
    eval_g,
    eval_k,
    eval_k_checked,
    eval_k_logfact,
    eval_k_sum,
    eval_rho,
    eval_theta_coefficient,
    provably_greater,
    ratio_ceiling,
)
from sylvkit.errors import DomainError, InconclusiveEvaluationError
from sylvkit.primes import build_table

mp = mpmath.mp
mp.dps = 60
MP_C = mpmath.mpf(125506) / 100000


def mp_E(n):
    return n / mpmath.log(n) * (mpmath.log(4) - MP_C - mpmath.log(2) * mpmath.log(4) / mpmath.log(2 * n))


def mp_k(m, n):
    return mpmath.log(math.comb(m + n, n)) / mpmath.log(m + n)


def inside(v: CertifiedValue, x) -> bool:
    """Containment of a 60-digit reference value, allowing for its own 1e-55 error."""
    x = mpmath.mpf(x)
    lo = mpmath.mpf(v.lower.numerator) / v.lower.denominator
    hi = mpmath.mpf(v.upper.numerator) / v.upper.denominator
    return lo - mpmath.mpf("1e-55") <= x <= hi + mpmath.mpf("1e-55")


def ball(mid, rad=0.0, bits=53):
    return CertifiedValue.from_float_bound(mid, rad, bits)


# -- ball arithmetic -------------------------------------------------------

fin = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False).filter(lambda x: abs(x) > 1e-6)
rads = st.floats(min_value=0, max_value=1e-3)


@settings(max_examples=300, deadline=None)
@given(fin, rads, fin, rads, st.sampled_from([24, 53, 106]), st.floats(-1, 1), st.floats(-1, 1))
def test_arithmetic_contains_true_result(a, ra, b, rb, bits, ta, tb):
    x, y = ball(a, ra, bits), ball(b, rb, bits)
    # any point of each input ball must map inside the output ball
    pa = mpmath.mpf(a) + mpmath.mpf(ra) * ta
    pb = mpmath.mpf(b) + mpmath.mpf(rb) * tb
    assert inside(x + y, pa + pb)
    assert inside(x - y, pa - pb)
    assert inside(x * y, pa * pb)
    if abs(b) > rb:
        assert inside(x / y, pa / pb)
    if a - ra > 0:
        assert inside(x.log(), mpmath.log(pa))
        assert inside(x.sqrt(), mpmath.sqrt(pa))


@settings(max_examples=200, deadline=None)
@given(st.integers(-10 ** 30, 10 ** 30), st.integers(1, 10 ** 12), st.sampled_from([24, 53, 200]))
def test_exact_rationals_contained(p, q, bits):
    v = CertifiedValue.exact(Fraction(p, q), bits)
    assert v.contains(Fraction(p, q))
    w = CertifiedValue.exact(p, bits)
    assert w.contains(p)


def test_radius_never_negative_and_grows():
    x = ball(2.0, 0.5)
    assert (x * x).radius >= x.radius
    with pytest.raises(ValueError):
        CertifiedValue(mpmath.libmp.fone, mpmath.libmp.fnone)


def test_domain_errors():
    with pytest.raises(DomainError):
        ball(1.0, 2.0).log()
    with pytest.raises(DomainError):
        ball(1.0) / ball(0.0, 0.1)
    with pytest.raises(DomainError):
        ball(-1.0, 0.5).sqrt()


# -- provably_greater ---------------------------------------------------------

def test_provably_greater_examples():
    assert provably_greater(ball(2.0, 0.5), 1.0)
    assert not provably_greater(ball(2.0, 1.5), 1.0)
    assert provably_greater(eval_E(1100), 1)


# -- constants -----------------------------------------------------------------

def test_constants():
    k = constants(53)
    assert k.C.contains(Fraction(125506, 100000))
    assert inside(k.LOG2, mpmath.log(2))
    assert inside(k.LOG4, mpmath.log(4))
    assert inside(k.PI, mpmath.pi)
    assert C_EXACT == Fraction("1.25506")


def test_ratio_ceiling():
    v = ratio_ceiling()
    assert v.provably_less(RATIO_CEILING)
    assert inside(v, mpmath.log(4) / MP_C - 1)


# -- g --------------------------------------------------------------------------

def test_g_examples():
    assert eval_g(5, 5, 3).contains(1)
    assert eval_g(4, 2, 0).contains(2)
    assert eval_g(7, 3, 1).provably_greater(eval_g(7, 3, 2).upper)
    with pytest.raises(DomainError):
        eval_g(2, 3, 0)
    with pytest.raises(DomainError):
        eval_g(3, 2, -1)


@settings(max_examples=150, deadline=None)
@given(st.integers(2, 10_000), st.integers(1, 10_000), st.fractions(0, 100), st.fractions(0, 100))
def test_g_decreasing(n, dm, x1, x2):
    if x1 == x2:
        return
    x1, x2 = min(x1, x2), max(x1, x2)
    m = n + dm
    for bits in Precision().levels():
        a, b = eval_g(m, n, x1, bits), eval_g(m, n, x2, bits)
        if a.lower > b.upper:
            break
    else:
        pytest.fail(f"g({m},{n}) not separated at x={x1}, {x2}")


# -- k ---------------------------------------------------------------------------

def test_k_examples():
    assert inside(eval_k(2, 2), mpmath.log(6) / mpmath.log(4))
    assert math.comb(10, 5) == 252
    assert inside(eval_k(5, 5), mpmath.log(252) / mpmath.log(10))
    assert abs(float(eval_k(2, 2)) - 1.29248) < 1e-5
    assert abs(float(eval_k(5, 5)) - 2.40140) < 1e-5


@pytest.mark.parametrize("method", ["sum", "logfact"])
def test_k_central_matches_exact_binomial(method):
    for n in range(2, 65):
        v = eval_k(n, n, method=method)
        assert inside(v, mpmath.log(math.comb(2 * n, n)) / mpmath.log(2 * n))


@pytest.mark.parametrize("bits", [53, 106, 212])
def test_k_against_binomial_oracle(bits):
    rng = random.Random(bits)
    for _ in range(30):
        n = rng.randint(2, 400)
        m = rng.randint(n, 5000)
        assert inside(eval_k_sum(m, n, bits), mp_k(m, n))
        assert inside(eval_k_logfact(m, n, bits), mp_k(m, n))


def test_k_two_paths_intersect():
    rng = random.Random(3)
    for _ in range(200):
        n = rng.randint(2, 2000)
        m = rng.randint(n, 10 ** 4)
        assert eval_k_sum(m, n).intersects(eval_k_logfact(m, n))
        eval_k_checked(m, n)


def test_k_domain():
    with pytest.raises(DomainError):
        eval_k(2, 3)
    with pytest.raises(DomainError):
        eval_k(3, 3, method="lgamma")


def test_k_monotone_in_m():
    rng = random.Random(11)
    for _ in range(100):
        n = rng.randint(2, 500)
        b = rng.randint(n, 9_999)
        a = rng.randint(b + 1, 10 ** 4)
        ok, _ = decide_greater(lambda bits: eval_k(a, n, bits) - eval_k(b, n, bits), 0)
        assert ok


# -- E, b, rho ------------------------------------------------------------------

@pytest.mark.parametrize("n, r", [(1100, 0), (1411, 1), (1705, 2)])
def test_E_thresholds(n, r):
    v = eval_E(n)
    assert v.provably_greater(r + 1)
    assert inside(v, mp_E(n))


def test_E_domain():
    with pytest.raises(DomainError):
        eval_E(1)


def test_E_monotone():
    rng = random.Random(5)
    for _ in range(200):
        a = rng.randint(3, 10 ** 6 - 1)
        b = rng.randint(a + 1, 10 ** 6)
        ok, _ = decide_greater(lambda bits: eval_E(b, bits) - eval_E(a, bits), 0)
        assert ok


def test_E_factored_identity():
    for n in [2, 3, 10, 1100, 12345, 10 ** 6, 10 ** 9]:
        assert eval_E(n).intersects(eval_E_factored(n))
        assert inside(eval_E_factored(n), mp_E(n))


def test_b_examples():
    v = eval_b(2)
    assert inside(v, 2 * MP_C / mpmath.log(2))
    assert abs(float(v) - 3.6216) < 1e-3
    assert v.provably_greater(0)
    assert eval_b(8).provably_greater(4)  # pi(8) = 4


def test_b_above_pi_1e6(table_1e6):
    assert eval_b(10 ** 6).lower > table_1e6.prime_count(10 ** 6) == 78498


def test_rho():
    t = build_table(3000)
    assert eval_rho(1123, t.prime_count(1123)).provably_greater(1)
    # the scan with 60-digit arithmetic puts rho(1122) at 0.99834
    v = eval_rho(1122, t.prime_count(1122))
    assert not v.provably_greater(1) and v.provably_less(1)
    assert eval_rho(500, 0).contains(0)
    with pytest.raises(DomainError):
        eval_rho(10, -1)


def test_rho_boundary_is_1123():
    t = build_table(3000)
    above = [n for n in range(2, 3001) if eval_rho(n, t.prime_count(n)).provably_greater(1)]
    assert above[0] == 1123
    assert above == list(range(1123, 3001))


def test_theta_coefficient_near_620634():
    assert eval_theta_coefficient(620634).provably_greater(Fraction(1, 20))
    assert eval_theta_coefficient(620633).provably_less(Fraction(1, 20))


# -- central binomial --------------------------------------------------------------

def test_central_binomial_n1():
    lo, hi = central_binomial_bounds(1)
    assert inside(lo, 4 / mpmath.sqrt(1.5 * mpmath.pi))
    assert inside(hi, 4 / mpmath.sqrt(mpmath.pi))
    assert lo.upper < 2 < hi.lower


def test_central_binomial_containment():
    for n in range(1, 65):
        lo, hi = central_binomial_bounds(n)
        exact = math.comb(2 * n, n)
        assert lo.upper <= exact <= hi.lower


def test_central_binomial_domain():
    with pytest.raises(DomainError):
        central_binomial_bounds(0)


# -- precision escalation ----------------------------------------------------------

def test_escalate_E():
    v = escalate_precision(lambda bits: eval_E(1100, bits), Fraction(1, 10 ** 9))
    assert v.radius <= 1e-9 and v.provably_greater(1)


def test_escalate_k():
    v = escalate_precision(lambda bits: eval_k(2, 2, bits), Fraction(1, 10 ** 12))
    assert v.radius <= 1e-12
    assert inside(v, mpmath.log(6) / mpmath.log(4))


def test_escalate_tightens():
    radii = [float(eval_E(1100, bits).radius) for bits in Precision().levels()]
    assert radii == sorted(radii, reverse=True)
    assert radii[-1] < 1e-200


def test_escalate_impossible():
    with pytest.raises(InconclusiveEvaluationError) as info:
        escalate_precision(lambda bits: eval_E(1100, bits), 0)
    assert info.value.best is not None


def test_decide_tie_is_inconclusive():
    with pytest.raises(InconclusiveEvaluationError):
        decide_greater(lambda bits: eval_g(5, 5, 0, bits), 1)


def test_log1p_within_budget():
    # the double-precision k path budgets 16 ulp per log1p call
    import numpy as np

    rng = np.random.default_rng(0)
    m = rng.integers(2, 10 ** 6, 20_000)
    i = rng.integers(1, 10 ** 4, 20_000)
    q = m / i
    got = np.log1p(q)
    worst = 0.0
    for qi, gi in zip(q.tolist(), got.tolist()):
        ref = mpmath.log1p(mpmath.mpf(qi))
        worst = max(worst, float(abs(mpmath.mpf(gi) - ref)) / math.ulp(gi))
    assert worst <= 4
