"""Certified evaluation of the analytic bound functions.

Values are carried as balls ``mid +/- radius``. Midpoints and radii are raw
mpmath ``libmp`` tuples manipulated with an explicit precision and rounding
mode on every call, so nothing depends on mpmath's global context and the
functions are safe to call from several threads or processes at once.

Error model
-----------
* Round-to-nearest at ``bits`` of precision moves a value by at most
  ``|mid| * 2**-bits``; that amount is added to the radius of every rounded
  result.
* Radii are accumulated with upward rounding on a short mantissa.
* ``log``/``sqrt``/``pi`` are evaluated by libmp, which works with guard bits
  and is accurate to about one ulp. The radius budgets ``2**(1-bits)``
  relative (twice the rounding allowance) for them.
* The double-precision fast path of :func:`eval_k` relies on the platform
  ``log1p``; glibc documents at most a couple of ulps, the radius budgets 16.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Callable, Union

import mpmath
import numpy as np
from mpmath import libmp as L

from .errors import DomainError, InconclusiveEvaluationError

DEFAULT_BITS = 53
DEFAULT_MAX_ESCALATIONS = 4
#: Mantissa length used for radii (always rounded upward).
RADIUS_BITS = 30

#: The constant C = 1.25506 as an exact rational.
C_EXACT = Fraction(125506, 100000)
#: Ceiling quoted for log(4)/C - 1.
RATIO_CEILING = Fraction("0.104565")

Real = Union[int, Fraction, float]

_RN = L.round_nearest
_UP = L.round_ceiling
_DN = L.round_floor
_ZERO = L.fzero


@dataclass(frozen=True)
class Precision:
    """Working precision and how far it may be escalated (doubling each time)."""

    bits: int = DEFAULT_BITS
    max_escalations: int = DEFAULT_MAX_ESCALATIONS

    def __post_init__(self):
        if self.bits < 24:
            raise DomainError(f"precision must be at least 24 bits, got {self.bits}")
        if self.max_escalations < 0:
            raise DomainError("max_escalations must be >= 0")

    def levels(self) -> list[int]:
        return [self.bits << i for i in range(self.max_escalations + 1)]

    def to_dict(self) -> dict:
        return {"bits": self.bits, "max_escalations": self.max_escalations}


# -- radius helpers -----------------------------------------------------------

def _radd(*vals):
    out = _ZERO
    for v in vals:
        out = L.mpf_add(out, v, RADIUS_BITS, _UP)
    return out


def _rmul(a, b):
    return L.mpf_mul(a, b, RADIUS_BITS, _UP)


def _rounding_err(mid, bits: int, factor_log2: int = 0):
    """|mid| * 2**(factor_log2 - bits); bounds a round-to-nearest error when factor_log2=0."""
    return L.mpf_shift(L.mpf_abs(mid), factor_log2 - bits)


def _to_fraction(x) -> Fraction:
    p, q = L.to_rational(x)
    return Fraction(int(p), int(q))


def _as_fraction(t: Real) -> Fraction:
    if isinstance(t, Fraction):
        return t
    if isinstance(t, float):
        if not math.isfinite(t):
            raise DomainError(f"non-finite threshold {t}")
        return Fraction(t)
    return Fraction(t)


class CertifiedValue:
    """A real number known to lie in ``[mid - radius, mid + radius]``."""

    def __init__(self, mid, rad, bits: int = DEFAULT_BITS):
        if L.mpf_sign(rad) < 0:
            raise ValueError("radius must be non-negative")
        self._mid = mid
        self._rad = rad
        self.bits = bits

    # -- construction ---------------------------------------------------------

    @classmethod
    def exact(cls, value: Real, bits: int = DEFAULT_BITS) -> "CertifiedValue":
        """Ball around an exact integer, rational or binary float."""
        if isinstance(value, bool):
            value = int(value)
        if isinstance(value, int):
            mid = L.from_int(value, bits, _RN)
            err = L.mpf_abs(L.mpf_sub(L.from_int(value), mid))
            return cls(mid, L.mpf_pos(err, RADIUS_BITS, _UP), bits)
        frac = _as_fraction(value)
        mid = L.from_rational(frac.numerator, frac.denominator, bits, _RN)
        err = _rounding_err(mid, bits)
        return cls(mid, err, bits)

    @classmethod
    def from_float_bound(cls, mid: float, radius: float, bits: int = DEFAULT_BITS) -> "CertifiedValue":
        return cls(L.from_float(mid), L.mpf_pos(L.from_float(abs(radius)), RADIUS_BITS, _UP), bits)

    @classmethod
    def pi(cls, bits: int = DEFAULT_BITS) -> "CertifiedValue":
        mid = L.mpf_pi(bits, _RN)
        return cls(mid, _rounding_err(mid, bits, 1), bits)

    # -- accessors ------------------------------------------------------------

    @property
    def mid(self) -> mpmath.mpf:
        return mpmath.mp.make_mpf(self._mid)

    @property
    def radius(self) -> mpmath.mpf:
        return mpmath.mp.make_mpf(self._rad)

    @cached_property
    def lower(self) -> Fraction:
        return _to_fraction(L.mpf_sub(self._mid, self._rad))

    @cached_property
    def upper(self) -> Fraction:
        return _to_fraction(L.mpf_add(self._mid, self._rad))

    def __float__(self) -> float:
        return L.to_float(self._mid)

    def __repr__(self) -> str:
        return (
            f"CertifiedValue({L.to_str(self._mid, 20)} +/- "
            f"{L.to_str(self._rad, 3)}, bits={self.bits})"
        )

    def contains(self, x: Real) -> bool:
        f = _as_fraction(x)
        return self.lower <= f <= self.upper

    def intersects(self, other: "CertifiedValue") -> bool:
        return self.lower <= other.upper and other.lower <= self.upper

    def provably_greater(self, threshold: Real) -> bool:
        return self.lower > _as_fraction(threshold)

    def provably_less(self, threshold: Real) -> bool:
        return self.upper < _as_fraction(threshold)

    def provably_at_most(self, threshold: Real) -> bool:
        return self.upper <= _as_fraction(threshold)

    def floor_if_determined(self) -> int | None:
        """floor(value) when the whole ball shares one integer part, else None."""
        lo, hi = math.floor(self.lower), math.floor(self.upper)
        return lo if lo == hi else None

    def to_dict(self, digits: int = 20) -> dict:
        return {
            "mid": L.to_str(self._mid, digits),
            "radius": _decimal_str(_to_fraction(self._rad), digits=4, upward=True),
            "lower": _decimal_str(self.lower, digits, upward=False),
            "upper": _decimal_str(self.upper, digits, upward=True),
            "bits": self.bits,
        }

    # -- arithmetic -----------------------------------------------------------

    def _coerce(self, other) -> "CertifiedValue":
        if isinstance(other, CertifiedValue):
            return other
        if isinstance(other, (int, Fraction, float)):
            return CertifiedValue.exact(other, self.bits)
        return NotImplemented

    def __neg__(self) -> "CertifiedValue":
        return CertifiedValue(L.mpf_neg(self._mid), self._rad, self.bits)

    def __add__(self, other) -> "CertifiedValue":
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        bits = max(self.bits, o.bits)
        mid = L.mpf_add(self._mid, o._mid, bits, _RN)
        return CertifiedValue(mid, _radd(self._rad, o._rad, _rounding_err(mid, bits)), bits)

    __radd__ = __add__

    def __sub__(self, other) -> "CertifiedValue":
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self + (-o)

    def __rsub__(self, other) -> "CertifiedValue":
        return (-self) + other

    def __mul__(self, other) -> "CertifiedValue":
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        bits = max(self.bits, o.bits)
        x, r, y, s = self._mid, self._rad, o._mid, o._rad
        mid = L.mpf_mul(x, y, bits, _RN)
        rad = _radd(
            _rmul(L.mpf_abs(x), s),
            _rmul(L.mpf_abs(y), r),
            _rmul(r, s),
            _rounding_err(mid, bits),
        )
        return CertifiedValue(mid, rad, bits)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "CertifiedValue":
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        bits = max(self.bits, o.bits)
        x, r, y, s = self._mid, self._rad, o._mid, o._rad
        denom_lo = L.mpf_sub(L.mpf_abs(y), s, RADIUS_BITS, _DN)
        if L.mpf_sign(denom_lo) <= 0:
            raise DomainError(f"division by a ball that may contain zero: {o!r}")
        q = L.mpf_div(x, y, bits, _RN)
        q_err = _rounding_err(q, bits)
        q_abs = _radd(L.mpf_abs(q), q_err)
        spread = L.mpf_div(_radd(r, _rmul(q_abs, s)), denom_lo, RADIUS_BITS, _UP)
        return CertifiedValue(q, _radd(spread, q_err), bits)

    def __rtruediv__(self, other) -> "CertifiedValue":
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o / self

    def log(self) -> "CertifiedValue":
        bits = self.bits
        x, r = self._mid, self._rad
        x_lo = L.mpf_sub(x, r, RADIUS_BITS + bits, _DN)
        if L.mpf_sign(x_lo) <= 0:
            raise DomainError(f"log of a ball reaching non-positive values: {self!r}")
        mid = L.mpf_pos(L.mpf_log(x, bits + 16, _RN), bits, _RN)
        spread = L.mpf_div(r, x_lo, RADIUS_BITS, _UP) if L.mpf_sign(r) else _ZERO
        eval_err = _radd(_rounding_err(mid, bits, 1), L.mpf_shift(L.fone, -2 * bits))
        return CertifiedValue(mid, _radd(spread, eval_err), bits)

    def sqrt(self) -> "CertifiedValue":
        bits = self.bits
        x, r = self._mid, self._rad
        x_lo = L.mpf_sub(x, r, RADIUS_BITS + bits, _DN)
        if L.mpf_sign(x_lo) < 0:
            raise DomainError(f"sqrt of a ball reaching negative values: {self!r}")
        mid = L.mpf_sqrt(x, bits, _RN)
        if L.mpf_sign(r):
            denom = L.mpf_add(
                L.mpf_sqrt(x_lo, RADIUS_BITS, _DN), L.mpf_sqrt(x, RADIUS_BITS, _DN),
                RADIUS_BITS, _DN,
            )
            spread = L.mpf_div(r, denom, RADIUS_BITS, _UP)
        else:
            spread = _ZERO
        return CertifiedValue(mid, _radd(spread, _rounding_err(mid, bits, 1)), bits)


def _decimal_str(f: Fraction, digits: int, upward: bool) -> str:
    """Decimal rendering of f rounded outward (up if ``upward`` else down)."""
    from decimal import ROUND_CEILING, ROUND_FLOOR, Context

    ctx = Context(prec=digits, rounding=ROUND_CEILING if upward else ROUND_FLOOR)
    return str(ctx.divide(ctx.create_decimal(f.numerator), f.denominator))


def provably_greater(v: CertifiedValue, threshold: Real) -> bool:
    """True only when every point of ``v`` exceeds ``threshold``; False means unproven."""
    return v.provably_greater(threshold)


# -- constants ----------------------------------------------------------------

@dataclass(frozen=True)
class Constants:
    C: CertifiedValue
    LOG2: CertifiedValue
    LOG4: CertifiedValue
    PI: CertifiedValue


@lru_cache(maxsize=None)
def constants(bits: int = DEFAULT_BITS) -> Constants:
    return Constants(
        C=CertifiedValue.exact(C_EXACT, bits),
        LOG2=CertifiedValue.exact(2, bits).log(),
        LOG4=CertifiedValue.exact(4, bits).log(),
        PI=CertifiedValue.pi(bits),
    )


def _log_int(x: int, bits: int) -> CertifiedValue:
    return CertifiedValue.exact(x, bits).log()


# -- the analytic functions ---------------------------------------------------

def eval_g(m: int, n: int, x: Real = 0, bits: int = DEFAULT_BITS) -> CertifiedValue:
    """log(m + x) / log(n + x)."""
    if not (m >= n >= 2):
        raise DomainError(f"need m >= n >= 2, got m={m}, n={n}")
    xf = _as_fraction(x)
    if xf < 0:
        raise DomainError(f"need x >= 0, got {x}")
    num = CertifiedValue.exact(m + xf, bits).log()
    den = CertifiedValue.exact(n + xf, bits).log()
    return num / den


def _check_mn(m: int, n: int) -> None:
    if not (m >= n >= 2):
        raise DomainError(f"need m >= n >= 2, got m={m}, n={n}")


_U = 2.0 ** -53
_TERM_REL = 2.0 ** -48  # 16 ulp per log1p evaluation


def _k_numerator_float(m: int, n: int) -> CertifiedValue:
    i = np.arange(1, n + 1, dtype=np.float64)
    terms = np.log1p(m / i)
    total = math.fsum(terms.tolist())
    # per term: library error + the rounding of m/i (at most one unit roundoff
    # after passing through log1p); fsum is correctly rounded
    bound = _TERM_REL * total + n * _U + 2 * _U * total
    return CertifiedValue.from_float_bound(total, bound * (1 + 2.0 ** -40), DEFAULT_BITS)


def _k_numerator_ball(m: int, n: int, bits: int) -> CertifiedValue:
    total = CertifiedValue.exact(0, bits)
    for i in range(1, n + 1):
        total = total + CertifiedValue.exact(Fraction(m + i, i), bits).log()
    return total


def eval_k_sum(m: int, n: int, bits: int = DEFAULT_BITS) -> CertifiedValue:
    """sum_{i<=n} log(1 + m/i) / log(m + n), summed term by term."""
    _check_mn(m, n)
    if bits <= DEFAULT_BITS and m + n < 2 ** 52:
        num = _k_numerator_float(m, n)
    else:
        num = _k_numerator_ball(m, n, bits)
    return num / _log_int(m + n, max(bits, DEFAULT_BITS))


def eval_k_logfact(m: int, n: int, bits: int = DEFAULT_BITS) -> CertifiedValue:
    """(log((m+n)!/m!) - log(n!)) / log(m + n), from exact integer products."""
    _check_mn(m, n)
    rising = math.perm(m + n, n)
    return (_log_int(rising, bits) - _log_int(math.factorial(n), bits)) / _log_int(m + n, bits)


def eval_k(m: int, n: int, bits: int = DEFAULT_BITS, method: str = "sum") -> CertifiedValue:
    if method == "sum":
        return eval_k_sum(m, n, bits)
    if method == "logfact":
        return eval_k_logfact(m, n, bits)
    raise DomainError(f"unknown k evaluation method {method!r}")


def eval_k_checked(m: int, n: int, bits: int = DEFAULT_BITS) -> CertifiedValue:
    """Evaluate k both ways and return the intersection-checked summation value."""
    a = eval_k_sum(m, n, bits)
    b = eval_k_logfact(m, n, bits)
    if not a.intersects(b):
        raise InconclusiveEvaluationError(
            f"k({m},{n}) evaluation paths disagree: {a!r} vs {b!r}", best=a
        )
    return a


def _check_n(n: int) -> None:
    if n < 2:
        raise DomainError(f"need n >= 2, got {n}")


def density_margin(n: int, bits: int = DEFAULT_BITS) -> CertifiedValue:
    """log 4 - C - log 2 * log 4 / log(2n), the factor shared by E, rho and theta."""
    _check_n(n)
    k = constants(bits)
    return k.LOG4 - k.C - (k.LOG2 * k.LOG4) / _log_int(2 * n, bits)


def eval_E(n: int, bits: int = DEFAULT_BITS) -> CertifiedValue:
    """(n / log n) * (log 4 - C - log 2 log 4 / log(2n))."""
    _check_n(n)
    return CertifiedValue.exact(n, bits) / _log_int(n, bits) * density_margin(n, bits)


def eval_E_factored(n: int, bits: int = DEFAULT_BITS) -> CertifiedValue:
    """E(n) rewritten as (n/log n)(log 4 - C)(1 - log 2 log 4 / ((log 4 - C) log(2n)))."""
    _check_n(n)
    k = constants(bits)
    head = k.LOG4 - k.C
    tail = 1 - (k.LOG2 * k.LOG4) / (head * _log_int(2 * n, bits))
    return CertifiedValue.exact(n, bits) / _log_int(n, bits) * head * tail


def eval_b(n: int, bits: int = DEFAULT_BITS) -> CertifiedValue:
    """C n / log n."""
    _check_n(n)
    return constants(bits).C * n / _log_int(n, bits)


def eval_rho(n: int, pi_n: int, bits: int = DEFAULT_BITS) -> CertifiedValue:
    """(pi(n) / C) * (log 4 - C - log 2 log 4 / log(2n)); pi_n is supplied exactly."""
    _check_n(n)
    if pi_n < 0:
        raise DomainError(f"pi_n must be >= 0, got {pi_n}")
    return CertifiedValue.exact(pi_n, bits) / constants(bits).C * density_margin(n, bits)


def eval_theta_coefficient(n: int, bits: int = DEFAULT_BITS) -> CertifiedValue:
    """(1/C)(log 4 - C - log 2 log 4 / log(2n)); increasing in n."""
    return density_margin(n, bits) / constants(bits).C


def ratio_ceiling(bits: int = DEFAULT_BITS) -> CertifiedValue:
    """log(4)/C - 1, the supremum of the attainable theta."""
    k = constants(bits)
    return k.LOG4 / k.C - 1


def central_binomial_bounds(n: int, bits: int = DEFAULT_BITS) -> tuple[CertifiedValue, CertifiedValue]:
    """(4^n / sqrt(pi (n + 1/2)), 4^n / sqrt(pi n))."""
    if n < 1:
        raise DomainError(f"need n >= 1, got {n}")
    k = constants(bits)
    four_n = CertifiedValue.exact(4 ** n, bits)
    lo = four_n / (k.PI * Fraction(2 * n + 1, 2)).sqrt()
    hi = four_n / (k.PI * n).sqrt()
    return lo, hi


# -- precision control --------------------------------------------------------

Producer = Callable[[int], CertifiedValue]


def escalate_precision(
    producer: Producer, target_radius: Real, precision: Precision = Precision()
) -> CertifiedValue:
    """Re-run ``producer(bits)`` at doubling precision until radius <= target."""
    target = _as_fraction(target_radius)
    best = None
    for bits in precision.levels():
        best = producer(bits)
        if _to_fraction(best._rad) <= target:
            return best
    raise InconclusiveEvaluationError(
        f"radius {best.radius} still above target {target_radius} at {best.bits} bits",
        best=best,
    )


def decide_greater(
    producer: Producer, threshold: Real, precision: Precision = Precision()
) -> tuple[bool, CertifiedValue]:
    """Decide value > threshold, escalating precision while the ball straddles it.

    Returns (True, v) if proven greater and (False, v) if proven <= threshold.
    """
    best = None
    for bits in precision.levels():
        best = producer(bits)
        if best.provably_greater(threshold):
            return True, best
        if best.provably_at_most(threshold):
            return False, best
    raise InconclusiveEvaluationError(
        f"cannot separate {best!r} from {threshold} within {best.bits} bits", best=best
    )


def certified_floor(producer: Producer, precision: Precision = Precision()) -> tuple[int, bool, CertifiedValue]:
    """Floor of a certified quantity.

    Returns (floor, determined, value). When escalation cannot settle the
    integer part, the floor of the lower endpoint is returned, which never
    exceeds the true floor.
    """
    best = None
    for bits in precision.levels():
        best = producer(bits)
        fl = best.floor_if_determined()
        if fl is not None:
            return fl, True, best
    return math.floor(best.lower), False, best
