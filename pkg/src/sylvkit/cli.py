"""Command-line front end: ``sylvkit {verify,thresholds,bertrand,theta}``."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

from .bounds import RATIO_CEILING, Precision, ratio_ceiling
from .engine import (
    E_BOUND_MIN_N,
    INCOMPLETE,
    PROVEN,
    REFUTED,
    RHO_BOUND_MIN_N,
    SCHEMA_VERSION,
    CampaignConfig,
    CampaignError,
    SylvesterClaim,
    bertrand_range,
    find_n_star,
    theta_threshold,
    verify_claim,
)
from .errors import DomainError, SylvkitError
from .primes import build_table

EXIT_OK = 0
EXIT_REFUTED = 2
EXIT_INCOMPLETE = 3
EXIT_USAGE = 64
EXIT_RESOURCE = 70

CACHE_ENV = "SYLVKIT_CACHE_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _fraction_list(text: str) -> list[Fraction]:
    try:
        return [Fraction(x.strip()) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv", "human"), default="human")
    common.add_argument("--precision-bits", type=int, default=53,
                        help="working precision before escalation (default: 53)")
    common.add_argument("--max-escalations", type=int, default=4)
    common.add_argument("--sieve-limit", type=int, default=None,
                        help="override the prime table size")
    common.add_argument("--checkpoint", type=Path, default=None)
    common.add_argument("--resume", action="store_true")
    common.add_argument("--workers", type=int, default=None,
                        help="worker processes (default: available CPUs)")

    parser = _Parser(prog="sylvkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("verify", parents=[common],
                       help="verify that P(m,n) has more than r primes > n for all m >= n >= n-min")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--n-min", type=int, required=True)
    p.add_argument("--probe", type=int, default=0, metavar="K",
                   help="also scan the K values of n just below n-min for witnesses")
    p.add_argument("--output", type=Path, default=None, help="certificate path")
    p.add_argument("--max-records", type=int, default=None,
                   help="stop after this many new per-n records (certificate is incomplete)")

    p = sub.add_parser("thresholds", parents=[common], help="smallest n with certified E(n) > r+1")
    p.add_argument("--r", type=_int_list, required=True)

    p = sub.add_parser("bertrand", parents=[common],
                       help="compare prime counts in ]n,2n[ against floor(E), floor(rho) or floor(theta pi(n))")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--from", dest="n_from", type=int, default=None)
    p.add_argument("--to", dest="n_to", type=int, default=None)
    p.add_argument("--bound", choices=("E", "rho", "theta"), default="E")
    p.add_argument("--theta", type=Fraction, default=None)

    p = sub.add_parser("theta", parents=[common],
                       help="smallest n where the theta coefficient is certified above theta")
    p.add_argument("--theta", type=_fraction_list, required=True)
    return parser


# -- output -------------------------------------------------------------------------

def _flatten(row: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in row.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = json.dumps(v)
        else:
            out[key] = v
    return out


def emit(rows: list[dict], fmt: str, out=None, extra: dict | None = None) -> None:
    out = out or sys.stdout
    if fmt == "json":
        doc = {"schema_version": SCHEMA_VERSION, **(extra or {}), "rows": rows}
        out.write(json.dumps(doc, indent=1) + "\n")
        return
    flat = [_flatten(r) for r in rows]
    if fmt == "csv":
        if not flat:
            return
        w = csv.DictWriter(out, fieldnames=list(flat[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(flat)
        return
    for k, v in (extra or {}).items():
        if isinstance(v, dict) and {"lower", "upper"} <= v.keys():
            v = f"[{v['lower']}, {v['upper']}]"
        out.write(f"{k}: {v}\n")
    if not flat:
        return
    cols = list(flat[0])
    widths = {c: max(len(c), *(len(str(r[c])) for r in flat)) for c in cols}
    out.write("  ".join(c.ljust(widths[c]) for c in cols) + "\n")
    for r in flat:
        out.write("  ".join(str(r[c]).ljust(widths[c]) for c in cols) + "\n")


def _diag(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


# -- commands ---------------------------------------------------------------------------

def _precision(args) -> Precision:
    if args.precision_bits < 24:
        raise UsageError("--precision-bits must be >= 24")
    if args.max_escalations < 0:
        raise UsageError("--max-escalations must be >= 0")
    return Precision(args.precision_bits, args.max_escalations)


def _workers(args) -> int:
    if args.workers is None:
        return os.cpu_count() or 1
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    return args.workers


def _cache_dir() -> Path:
    return Path(os.environ.get(CACHE_ENV) or ".")


def cmd_verify(args) -> int:
    if args.r < 0:
        raise UsageError("--r must be >= 0")
    if args.n_min < 2:
        raise UsageError("--n-min must be >= 2")
    if args.probe < 0:
        raise UsageError("--probe must be >= 0")
    if args.max_records is not None and args.max_records < 0:
        raise UsageError("--max-records must be >= 0")
    precision = _precision(args)
    stem = f"r{args.r}-n{args.n_min}"
    cache = _cache_dir()
    checkpoint = args.checkpoint or cache / f"checkpoint-{stem}.jsonl"
    output = args.output or cache / f"certificate-{stem}.json"
    config = CampaignConfig(
        precision=precision,
        workers=_workers(args),
        checkpoint=checkpoint,
        resume=args.resume,
        probe_below=args.probe,
        max_records=args.max_records,
        sieve_limit=args.sieve_limit,
    )
    claim = SylvesterClaim(args.r, args.n_min)

    def progress(done: int, total: int) -> None:
        if done == total or done % max(1, total // 10) == 0:
            _diag(f"verify r={args.r}: {done}/{total} n checked")

    try:
        cert = verify_claim(claim, config, progress)
    except CampaignError as exc:
        output.write_text(exc.partial.to_json())
        _diag(f"error: {exc.cause} (partial certificate: {output}; checkpoint: {checkpoint})")
        return _exit_for(exc.cause)
    output.write_text(cert.to_json())

    if args.format == "csv":
        emit([_record_row(r) for r in cert.records], "csv")
    else:
        summary = {
            "claim": f"r={claim.r}, n_min={claim.n_min}",
            "verdict": cert.verdict,
            "n_star": cert.n_star.get("n"),
            "certificate": str(output),
        }
        if args.format == "json":
            summary = {
                "claim": cert.to_dict()["claim"],
                "verdict": cert.verdict,
                "n_star": cert.n_star,
                "witness": cert.witness,
                "boundary_witnesses": cert.boundary_witnesses,
                "certificate": str(output),
            }
            emit([], "json", extra=summary)
        else:
            if cert.witness:
                summary["witness"] = _witness_text(cert.witness)
            for w in cert.boundary_witnesses:
                _diag(f"boundary witness: {_witness_text(w)}")
            emit([], "human", extra=summary)
    return {PROVEN: EXIT_OK, REFUTED: EXIT_REFUTED, INCOMPLETE: EXIT_INCOMPLETE}[cert.verdict]


def _witness_text(w: dict) -> str:
    primes = ", ".join(f"{q} | {t}" for q, t in w["primes"]) or "none"
    return f"n={w['n']}, m={w['m']}: large primes [{primes}]"


def _record_row(rec) -> dict:
    return {
        "n": rec.n,
        "pi_n": rec.pi_n,
        "m_star": rec.m_star,
        "m_lo": rec.checked_m_range[0],
        "m_hi": rec.checked_m_range[1],
        "failures": len(rec.failures),
        "status": rec.status,
    }


def cmd_thresholds(args) -> int:
    if not args.r or any(r < 0 for r in args.r):
        raise UsageError("--r values must be >= 0")
    precision = _precision(args)
    rows = []
    for r in args.r:
        t = find_n_star(r, precision)
        rows.append({"r": r, "n_star": t.n, "true_minimal": t.true_minimal, "E": _interval(t.value)})
    emit(rows, args.format)
    return EXIT_OK


def _interval(v) -> dict:
    d = v.to_dict()
    return {"lower": d["lower"], "upper": d["upper"]}


def cmd_theta(args) -> int:
    for t in args.theta:
        if not (0 < t < RATIO_CEILING):
            raise UsageError(f"--theta must lie strictly between 0 and {RATIO_CEILING}")
    precision = _precision(args)
    ceiling = ratio_ceiling(precision.bits)
    rows = []
    for t in args.theta:
        th = theta_threshold(t, precision)
        rows.append({
            "theta": str(float(t)),
            "n_star": th.n,
            "true_minimal": th.true_minimal,
            "coefficient": _interval(th.value),
        })
    extra = {
        "ceiling": _interval(ceiling),
        "ceiling_below_0.104565": ceiling.provably_less(RATIO_CEILING),
    }
    emit(rows, args.format, extra=extra)
    return EXIT_OK


def cmd_bertrand(args) -> int:
    if args.n is not None:
        if args.n_from is not None or args.n_to is not None:
            raise UsageError("use either --n or --from/--to")
        lo = hi = args.n
    else:
        if args.n_from is None or args.n_to is None:
            raise UsageError("--n or both --from and --to are required")
        lo, hi = args.n_from, args.n_to
    if lo > hi:
        raise UsageError("--from must not exceed --to")
    floor_n = {"E": E_BOUND_MIN_N, "rho": RHO_BOUND_MIN_N, "theta": RHO_BOUND_MIN_N}[args.bound]
    if lo < floor_n:
        raise UsageError(f"--bound {args.bound} requires n >= {floor_n}")
    if args.bound == "theta":
        if args.theta is None or not (0 < args.theta < RATIO_CEILING):
            raise UsageError(f"--bound theta needs --theta strictly between 0 and {RATIO_CEILING}")
    elif args.theta is not None:
        raise UsageError("--theta only applies to --bound theta")
    precision = _precision(args)
    limit = max(2 * hi, args.sieve_limit or 0)
    table = build_table(limit)
    rows = [row.to_dict() for row in bertrand_range(lo, hi, table, args.bound,
                                                     theta=args.theta, precision=precision)]
    bad = sum(not r["ok"] for r in rows)
    if bad:
        _diag(f"{bad} of {len(rows)} rows violate the bound")
    emit(rows, args.format)
    return EXIT_OK if not bad else EXIT_REFUTED


def _exit_for(exc: BaseException) -> int:
    if isinstance(exc, (UsageError, DomainError)):
        return EXIT_USAGE
    return EXIT_RESOURCE


COMMANDS = {
    "verify": cmd_verify,
    "thresholds": cmd_thresholds,
    "bertrand": cmd_bertrand,
    "theta": cmd_theta,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        _diag(f"sylvkit {args.command}: error: {exc}")
        return EXIT_USAGE
    except SylvkitError as exc:
        _diag(f"sylvkit {args.command}: {type(exc).__name__}: {exc}")
        return _exit_for(exc)


if __name__ == "__main__":
    sys.exit(main())
