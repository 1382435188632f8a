"""Verification campaigns for "more than r large primes divide P(m, n)" claims.

A claim (r, n_min) is settled in two parts. Above a threshold n_star with a
certified E(n_star) > r + 1 the analytic argument covers every m >= n. Below
it, each n gets a cutoff m_star with a certified k(m_star, n) > pi(n) + r
(monotone in m), and the finitely many m in [n, m_star) are checked by
counting the large prime divisors directly.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Iterator

import numpy as np

from . import __version__
from .bounds import (
    C_EXACT,
    RATIO_CEILING,
    CertifiedValue,
    Precision,
    certified_floor,
    decide_greater,
    eval_b,
    eval_E,
    eval_k,
    eval_rho,
    eval_theta_coefficient,
)
from .errors import (
    DomainError,
    InconclusiveEvaluationError,
    ResourceLimitError,
    SylvkitError,
)
from .primes import MAX_TABLE_LIMIT, PrimeTable, build_table
from .valuations import ConsecutiveProduct, large_prime_count, large_prime_divisors

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_SEARCH_CAP = 10 ** 7
DEFAULT_M_CAP = 10 ** 9
E_BOUND_MIN_N = 1100
RHO_BOUND_MIN_N = 1123
FLOOR_POLICY = (
    "floor read from the certified interval when it contains no integer; "
    "otherwise escalate precision, and if still ambiguous use floor(lower endpoint)"
)

VERIFIED, FAILED, PENDING = "verified", "failed", "pending"
PROVEN, REFUTED, INCOMPLETE = "proven", "refuted", "incomplete"


# -- domain types ---------------------------------------------------------------

@dataclass(frozen=True)
class SylvesterClaim:
    """For every m >= n >= n_min, more than r distinct primes > n divide P(m, n)."""

    r: int
    n_min: int

    def __post_init__(self):
        if self.r < 0:
            raise DomainError(f"r must be >= 0, got {self.r}")
        if self.n_min < 2:
            raise DomainError(f"n_min must be >= 2, got {self.n_min}")


@dataclass(frozen=True)
class Threshold:
    """Result of a monotone threshold search.

    ``true_minimal`` is False when the comparison one step below could not be
    decided; the value is then only the smallest *certified* threshold.
    """

    n: int
    value: CertifiedValue
    true_minimal: bool

    def __int__(self) -> int:
        return self.n

    def to_dict(self) -> dict:
        return {"n": self.n, "value": self.value.to_dict(), "true_minimal": self.true_minimal}


@dataclass
class PerNRecord:
    n: int
    pi_n: int
    m_star: int
    checked_m_range: tuple[int, int]
    failures: list[int] = field(default_factory=list)
    status: str = PENDING

    def to_dict(self) -> dict:
        d = asdict(self)
        d["checked_m_range"] = list(self.checked_m_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PerNRecord":
        return cls(
            n=d["n"],
            pi_n=d["pi_n"],
            m_star=d["m_star"],
            checked_m_range=tuple(d["checked_m_range"]),
            failures=list(d["failures"]),
            status=d["status"],
        )


@dataclass
class CheckFragment:
    """Outcome of scanning m in [m_lo, m_hi) for one n."""

    n: int
    r: int
    m_lo: int
    m_hi: int
    failures: list[int]


@dataclass
class VerificationCertificate:
    claim: SylvesterClaim
    n_star: dict
    records: list[PerNRecord]
    verdict: str
    witness: dict | None
    environment: dict
    boundary_witnesses: list[dict] = field(default_factory=list)
    timestamp: str = ""

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "claim": asdict(self.claim),
            "n_star": self.n_star,
            "verdict": self.verdict,
            "witness": self.witness,
            "boundary_witnesses": self.boundary_witnesses,
            "environment": self.environment,
            "timestamp": self.timestamp,
            "records": [r.to_dict() for r in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "VerificationCertificate":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise DomainError(f"unsupported schema_version {d.get('schema_version')!r}")
        return cls(
            claim=SylvesterClaim(**d["claim"]),
            n_star=d["n_star"],
            records=[PerNRecord.from_dict(r) for r in d["records"]],
            verdict=d["verdict"],
            witness=d["witness"],
            environment=d["environment"],
            boundary_witnesses=d["boundary_witnesses"],
            timestamp=d["timestamp"],
        )

    @classmethod
    def from_json(cls, text: str) -> "VerificationCertificate":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class CampaignConfig:
    precision: Precision = Precision()
    workers: int = 1
    checkpoint: Path | None = None
    resume: bool = False
    probe_below: int = 0
    max_records: int | None = None
    n_star_cap: int = DEFAULT_SEARCH_CAP
    m_cap: int = DEFAULT_M_CAP
    sieve_limit: int | None = None
    max_table_limit: int = MAX_TABLE_LIMIT


class CampaignError(SylvkitError):
    """A campaign aborted; ``partial`` holds the certificate assembled so far."""

    def __init__(self, cause: SylvkitError, partial: VerificationCertificate):
        super().__init__(str(cause))
        self.cause = cause
        self.partial = partial


# -- threshold searches -----------------------------------------------------------

def _proven(producer, threshold, precision: Precision) -> tuple[bool, bool, CertifiedValue]:
    """(proven_greater, decided, value) after escalation; never raises on a tie."""
    try:
        ok, v = decide_greater(producer, threshold, precision)
        return ok, True, v
    except InconclusiveEvaluationError as exc:
        return False, False, exc.best


def _monotone_search(
    predicate: Callable[[int], bool], start: int, cap: int, what: str
) -> int:
    """Smallest n >= start with predicate(n), for a predicate monotone in n."""
    if predicate(start):
        return start
    lo, step = start, 1
    while True:
        hi = start + step
        if hi > cap:
            raise ResourceLimitError(f"{what}: search exceeded cap {cap}")
        if predicate(hi):
            break
        lo, step = hi, step * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if predicate(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _threshold(producer_for: Callable[[int], Callable], threshold, start: int,
               precision: Precision, cap: int, what: str) -> Threshold:
    cache: dict[int, tuple[bool, bool, CertifiedValue]] = {}

    def check(n: int):
        if n not in cache:
            cache[n] = _proven(producer_for(n), threshold, precision)
        return cache[n]

    n = _monotone_search(lambda k: check(k)[0], start, cap, what)
    _, _, value = check(n)
    if n == start:
        true_min = True
    else:
        _, decided, _ = check(n - 1)
        true_min = decided
    return Threshold(n, value, true_min)


def find_n_star(r: int, precision: Precision = Precision(), cap: int = DEFAULT_SEARCH_CAP) -> Threshold:
    """Smallest n >= 3 with a certified E(n) > r + 1 (E increases for n >= 3)."""
    if r < 0:
        raise DomainError(f"r must be >= 0, got {r}")
    return _threshold(
        lambda n: (lambda bits: eval_E(n, bits)), r + 1, 3, precision, cap, "n_star"
    )


def theta_threshold(theta, precision: Precision = Precision(), cap: int = DEFAULT_SEARCH_CAP) -> Threshold:
    """Smallest n with (1/C)(log 4 - C - log 2 log 4 / log 2n) certified above theta."""
    t = Fraction(str(theta)) if isinstance(theta, float) else Fraction(theta)
    if not (0 < t < RATIO_CEILING):
        raise DomainError(f"theta must lie strictly between 0 and {RATIO_CEILING}, got {theta}")
    return _threshold(
        lambda n: (lambda bits: eval_theta_coefficient(n, bits)), t, 2, precision, cap, "theta"
    )


def find_m_star(
    n: int, r: int, pi_n: int, precision: Precision = Precision(), cap: int = DEFAULT_M_CAP
) -> int:
    """Smallest m >= n with a certified k(m, n) > pi(n) + r (k increases in m)."""
    if n < 2 or r < 0 or pi_n < 0:
        raise DomainError(f"bad arguments n={n}, r={r}, pi_n={pi_n}")
    target = pi_n + r

    def pred(m: int) -> bool:
        ok, _ = decide_greater(lambda bits: eval_k(m, n, bits), target, precision)
        return ok

    return _monotone_search(pred, n, cap, f"m_star(n={n})")


# -- finite checks ------------------------------------------------------------------

def exhaustive_check(n: int, r: int, m_lo: int, m_hi: int, table: PrimeTable) -> CheckFragment:
    """Flag every m in [m_lo, m_hi) for which at most r primes > n divide P(m, n)."""
    if not (2 <= n <= m_lo <= m_hi):
        raise DomainError(f"need 2 <= n <= m_lo <= m_hi, got n={n}, [{m_lo}, {m_hi})")
    if m_hi == m_lo:
        return CheckFragment(n, r, m_lo, m_hi, [])
    table._check(m_hi - 1 + n)
    ms = np.arange(m_lo, m_hi, dtype=np.int64)
    cum = table.cumulative_counts
    # primes inside ]m, m+n] are terms of the product; most m are settled here
    direct = cum[ms + n] - cum[ms]
    failures = [
        int(m)
        for m in ms[direct <= r]
        if large_prime_count(ConsecutiveProduct(int(m), n), table) <= r
    ]
    return CheckFragment(n, r, m_lo, m_hi, failures)


def replay_record(record: PerNRecord, r: int, table: PrimeTable) -> str:
    """Re-run the finite check behind a record and return the status it implies."""
    lo, hi = record.checked_m_range
    frag = exhaustive_check(record.n, r, lo, hi, table)
    return VERIFIED if not frag.failures else FAILED


# -- worker plumbing ----------------------------------------------------------------

_WORKER_TABLE: PrimeTable | None = None


def _init_worker(table: PrimeTable | None) -> None:
    global _WORKER_TABLE
    _WORKER_TABLE = table


def _m_star_task(args) -> int:
    n, r, pi_n, precision, cap = args
    return find_m_star(n, r, pi_n, precision, cap)


def _check_task(args) -> list[int]:
    n, r, m_star = args
    return exhaustive_check(n, r, n, m_star, _WORKER_TABLE).failures


def _pmap(fn, items: list, workers: int, table: PrimeTable | None) -> Iterator:
    if workers <= 1 or len(items) < 2:
        _init_worker(table)
        return map(fn, items)
    pool = ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(table,))
    chunk = max(1, len(items) // (workers * 8))

    def gen():
        with pool:
            yield from pool.map(fn, items, chunksize=chunk)

    return gen()


# -- checkpoints --------------------------------------------------------------------

def _checkpoint_header(claim: SylvesterClaim, precision: Precision) -> dict:
    return {
        "type": "header",
        "schema_version": SCHEMA_VERSION,
        "claim": asdict(claim),
        "precision": precision.to_dict(),
    }


def read_checkpoint(path: Path, claim: SylvesterClaim, precision: Precision) -> dict[int, PerNRecord]:
    """Completed records from a checkpoint file, keyed by n."""
    path = Path(path)
    if not path.exists():
        return {}
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        return {}
    header = json.loads(lines[0])
    expected = _checkpoint_header(claim, precision)
    if header != expected:
        raise DomainError(f"checkpoint {path} belongs to a different campaign: {header}")
    records = {}
    for ln in lines[1:]:
        try:
            d = json.loads(ln)
        except json.JSONDecodeError:
            break  # torn final line from an interrupted write
        if d.get("type") == "record":
            rec = PerNRecord.from_dict(d["record"])
            records[rec.n] = rec
    return records


class _CheckpointWriter:
    def __init__(self, path: Path | None, claim: SylvesterClaim, precision: Precision, append: bool):
        self._fh = None
        if path is None:
            return
        path = Path(path)
        fresh = not (append and path.exists() and path.stat().st_size > 0)
        self._fh = path.open("w" if fresh else "a")
        if fresh:
            self._write(_checkpoint_header(claim, precision))

    def _write(self, obj: dict) -> None:
        self._fh.write(json.dumps(obj, sort_keys=True) + "\n")
        self._fh.flush()

    def record(self, rec: PerNRecord) -> None:
        if self._fh is not None:
            self._write({"type": "record", "record": rec.to_dict()})

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()


# -- campaign -------------------------------------------------------------------------

def _environment(config: CampaignConfig, sieve_limit: int) -> dict:
    return {
        "toolkit_version": __version__,
        "precision": config.precision.to_dict(),
        "sieve_limit": sieve_limit,
        "floor_policy": FLOOR_POLICY,
        "m_cap": config.m_cap,
        "n_star_cap": config.n_star_cap,
    }


def _witness(n: int, m: int, table: PrimeTable) -> dict:
    return large_prime_divisors(ConsecutiveProduct(m, n), table).to_dict()


def verify_claim(
    claim: SylvesterClaim,
    config: CampaignConfig = CampaignConfig(),
    progress: Callable[[int, int], None] | None = None,
) -> VerificationCertificate:
    """Run the full campaign for ``claim`` and return its certificate."""
    precision = config.precision
    records: dict[int, PerNRecord] = {}
    n_star: Threshold | None = None
    sieve_limit = 0
    table: PrimeTable | None = None
    boundary: list[dict] = []

    def assemble(final: bool) -> VerificationCertificate:
        ordered = [records[n] for n in sorted(records)]
        failed = [rec for rec in ordered if rec.status == FAILED]
        witness = None
        if failed and table is not None:
            first = failed[0]
            witness = _witness(first.n, first.failures[0], table)
        if failed:
            verdict = REFUTED
        elif (
            final
            and n_star is not None
            and all(n in records and records[n].status == VERIFIED
                    for n in range(claim.n_min, n_star.n))
        ):
            verdict = PROVEN
        else:
            verdict = INCOMPLETE
        return VerificationCertificate(
            claim=claim,
            n_star=n_star.to_dict() if n_star is not None else {},
            records=ordered,
            verdict=verdict,
            witness=witness,
            environment=_environment(config, sieve_limit),
            boundary_witnesses=boundary,
            timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        )

    writer = None
    try:
        if config.resume and config.checkpoint is not None:
            records.update(read_checkpoint(config.checkpoint, claim, precision))
        writer = _CheckpointWriter(config.checkpoint, claim, precision, append=config.resume)
        n_star = find_n_star(claim.r, precision, config.n_star_cap)
        log.info("n_star(r=%d) = %d", claim.r, n_star.n)
        probe_lo = max(2, claim.n_min - config.probe_below)
        campaign_ns = list(range(claim.n_min, n_star.n))
        probe_ns = list(range(probe_lo, claim.n_min))
        todo = [n for n in campaign_ns if n not in records]

        # phase 1: cutoffs, needing pi(n) only
        small = build_table(max(n_star.n, claim.n_min, 2), max_limit=config.max_table_limit)
        phase1 = probe_ns + todo
        tasks = [(n, claim.r, small.prime_count(n), precision, config.m_cap) for n in phase1]
        m_stars = dict(zip(phase1, _pmap(_m_star_task, tasks, config.workers, None)))

        # phase 2: one sieve sized for the largest window
        need = max([m + n for n, m in m_stars.items()] + [n_star.n, 2])
        sieve_limit = max(need, config.sieve_limit or 0)
        table = build_table(sieve_limit, max_limit=config.max_table_limit)

        for n in probe_ns:
            for m in exhaustive_check(n, claim.r, n, m_stars[n], table).failures:
                boundary.append(_witness(n, m, table))

        if config.max_records is not None:
            todo = todo[: config.max_records]
        check_tasks = [(n, claim.r, m_stars[n]) for n in todo]
        results = _pmap(_check_task, check_tasks, config.workers, table)
        for i, (n, failures) in enumerate(zip(todo, results), 1):
            m_star = m_stars[n]
            rec = PerNRecord(
                n=n,
                pi_n=table.prime_count(n),
                m_star=m_star,
                checked_m_range=(n, m_star),
                failures=failures,
                status=FAILED if failures else VERIFIED,
            )
            records[n] = rec
            writer.record(rec)
            if progress is not None:
                progress(i, len(todo))
    except SylvkitError as exc:
        raise CampaignError(exc, assemble(final=False)) from exc
    finally:
        if writer is not None:
            writer.close()
    return assemble(final=True)


# -- prime counts in ]n, 2n[ -------------------------------------------------------

@dataclass(frozen=True)
class BertrandRow:
    n: int
    actual: int
    bound: int
    ok: bool
    floor_determined: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


def bertrand_lower_bound_check(
    n: int,
    table: PrimeTable,
    kind: str = "E",
    *,
    theta=None,
    theta_n_star: int | None = None,
    precision: Precision = Precision(),
) -> BertrandRow:
    """Compare the exact number of primes in ]n, 2n[ with floor(E), floor(rho) or floor(theta pi(n))."""
    if kind == "E":
        if n < E_BOUND_MIN_N:
            raise DomainError(f"the E bound needs n >= {E_BOUND_MIN_N}, got {n}")
        actual = table.count_in_open_interval(n, 2 * n)
        bound, determined, _ = certified_floor(lambda bits: eval_E(n, bits), precision)
    elif kind == "rho":
        if n < RHO_BOUND_MIN_N:
            raise DomainError(f"the rho bound needs n >= {RHO_BOUND_MIN_N}, got {n}")
        actual = table.count_in_open_interval(n, 2 * n)
        pi_n = table.prime_count(n)
        bound, determined, _ = certified_floor(lambda bits: eval_rho(n, pi_n, bits), precision)
    elif kind == "theta":
        if theta is None:
            raise DomainError("the theta bound needs a theta value")
        t = Fraction(str(theta)) if isinstance(theta, float) else Fraction(theta)
        if theta_n_star is None:
            theta_n_star = theta_threshold(t, precision).n
        if n < max(theta_n_star, RHO_BOUND_MIN_N):
            raise DomainError(
                f"the theta={theta} bound needs n >= {max(theta_n_star, RHO_BOUND_MIN_N)}, got {n}"
            )
        actual = table.count_in_open_interval(n, 2 * n)
        bound, determined = math.floor(t * table.prime_count(n)), True
    else:
        raise DomainError(f"unknown bound kind {kind!r}")
    return BertrandRow(n, actual, bound, actual >= bound, determined)


def bertrand_range(
    n_lo: int,
    n_hi: int,
    table: PrimeTable,
    kind: str = "E",
    *,
    theta=None,
    precision: Precision = Precision(),
) -> Iterable[BertrandRow]:
    """Rows for every n in [n_lo, n_hi]."""
    theta_n_star = None
    if kind == "theta":
        theta_n_star = theta_threshold(theta, precision).n
    for n in range(n_lo, n_hi + 1):
        yield bertrand_lower_bound_check(
            n, table, kind, theta=theta, theta_n_star=theta_n_star, precision=precision
        )


# -- analytic sweeps --------------------------------------------------------------------

def key_inequality_holds(n: int, pi_n: int, precision: Precision = Precision()) -> bool:
    """Certified k(n, n) > pi(n) + E(n) - 1, i.e. k(n, n) - E(n) > pi(n) - 1."""
    if n < 3:
        raise DomainError(f"need n >= 3, got {n}")
    ok, _ = decide_greater(
        lambda bits: eval_k(n, n, bits) - eval_E(n, bits), pi_n - 1, precision
    )
    return ok


def rosser_violations(
    table: PrimeTable, n_lo: int, n_hi: int, precision: Precision = Precision()
) -> list[int]:
    """Every n in [n_lo, n_hi] where pi(n) < C n / log n could not be certified.

    A vectorised double-precision pass clears n with a relative gap of at least
    1e-9 (orders of magnitude above any libm error); the rest go through the
    certified evaluator.
    """
    if n_lo < 2:
        raise DomainError(f"need n >= 2, got {n_lo}")
    table._check(n_hi)
    ns = np.arange(n_lo, n_hi + 1, dtype=np.int64)
    b = float(C_EXACT) * ns / np.log(ns)
    pi = table.cumulative_counts[n_lo : n_hi + 1]
    close = ns[(b - pi) <= 1e-9 * b]
    bad = []
    for n in close.tolist():
        ok, _ = _proven(lambda bits: eval_b(n, bits), table.prime_count(n), precision)[:2]
        if not ok:
            bad.append(n)
    return bad
