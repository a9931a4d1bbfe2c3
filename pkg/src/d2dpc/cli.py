"""Command line front end: run sessions, sweep tradeoffs, audit privacy."""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from typing import Optional, Sequence

from .combinatorics import binom

from .analysis import table_to_csv, tradeoff_table
from .errors import SchemeError
from .placement import build_placement, random_library, validate_params
from .delivery import run_delivery
from .privacy_audit import audit_colluding
from .session import run_session


def _default_seed() -> int:
    return int(os.environ.get("D2DPC_SEED", "0"))


def _parse_demands(text: str, num_users: int, num_files: int, seed: int) -> tuple:
    if text == "random":
        from .combinatorics import derive_stream

        gen = derive_stream(seed, ("demands",)).generator
        return tuple(int(v) for v in gen.integers(1, num_files + 1, size=num_users))
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise SystemExit(f"cannot parse demands {text!r}; want e.g. 1,2 or random")


def _add_instance_args(p: argparse.ArgumentParser, need_rep: bool = True) -> None:
    p.add_argument("--users", "--k", type=int, required=True, help="number of users K")
    p.add_argument("--files", "--n", type=int, required=True, help="library size N")
    if need_rep:
        p.add_argument(
            "--rep-factor",
            "--t",
            type=int,
            default=None,
            help="cache replication degree of the coded scheme",
        )
    p.add_argument("--file-bits", "--b", type=int, default=None, help="bits per file")
    p.add_argument("--seed", type=int, default=None, help="root seed (env D2DPC_SEED)")


def _min_file_bits(num_users: int, num_files: int, rep_factor: int) -> int:
    u = (num_users - 1) * num_files
    return num_users * binom(u, rep_factor - 1)


def _cmd_run(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    if args.file_bits is None:
        raise SystemExit("run requires --file-bits")
    demands = _parse_demands(args.demands, args.users, args.files, seed)
    blob = None
    if args.library:
        with open(args.library, "rb") as fh:
            blob = fh.read()
    report = run_session(
        args.scheme,
        args.users,
        args.files,
        demands,
        args.file_bits,
        seed,
        rep_factor=args.rep_factor,
        memory=args.memory,
        out=args.transcript,
        shuffle_retained=args.shuffle,
        library_blob=blob,
    )
    json.dump(report.to_dict(), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0 if report.all_ok else 1


def _cmd_sweep(args) -> int:
    rows = tradeoff_table(args.users, args.files)
    text = table_to_csv(rows, args.users, args.files)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_audit(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    file_bits = args.file_bits
    if file_bits is None:
        file_bits = _min_file_bits(args.users, args.files, args.rep_factor)
    params = validate_params(args.users, args.files, args.rep_factor, file_bits)
    library = random_library(params, seed)
    observers = tuple(int(v) for v in args.observers.split(","))
    report = audit_colluding(
        params,
        library,
        observers,
        mode=args.mode,
        samples=args.samples,
        seed=seed,
        budget=args.budget,
        tolerance=args.tolerance,
        variant=args.variant,
        engine=args.engine,
        backend=args.backend,
    )
    json.dump(report.to_dict(), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0 if report.all_ok else 1


GOLDEN_FIRST = [((2, 2), (1, 1)), ((2, 3), (3, 1)), ((1, 3), (3, 2))]
GOLDEN_SECOND = [((1, 5), (2, 4)), ((1, 6), (3, 4)), ((2, 6), (3, 5))]


def _cmd_selftest(args) -> int:
    ok = True

    def check(name: str, cond: bool) -> None:
        nonlocal ok
        print(f"{'PASS' if cond else 'FAIL'}: {name}")
        ok = ok and cond

    params = validate_params(2, 3, 2, 6)
    forced = {(i, 1): (1, 2, 3) for i in range(1, 4)}
    forced.update({(i, 2): (4, 5, 6) for i in range(1, 4)})
    record = build_placement(params, 0, forced=forced)
    library = random_library(params, 0)
    identity = {1: (2, 3, 4), 2: (1, 3, 4)}
    signals = run_delivery(record, library, (1, 2), 0, forced_relabel=identity)
    check(
        "worked example, first sender compositions",
        [m.composition for m in signals[0].messages] == GOLDEN_FIRST,
    )
    check(
        "worked example, second sender compositions",
        [m.composition for m in signals[1].messages] == GOLDEN_SECOND,
    )
    coded = run_session("coded", 2, 3, (1, 2), 6, 0, rep_factor=2)
    check("coded session decodes and hits the load formula", coded.all_ok)
    uncoded = run_session("uncoded", 2, 3, (1, 2), 6, 0, memory=2)
    check("uncoded session decodes and hits the load formula", uncoded.all_ok)
    wcsl = run_session("wc-sl", 2, 2, (1, 2), 4, 0, rep_factor=1)
    check("shared-link session decodes and hits the load formula", wcsl.all_ok)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="d2dpc",
        description="Device-to-device coded caching with private demands: "
        "run sessions, sweep the memory-load tradeoff, audit privacy.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one delivery session and verify it")
    _add_instance_args(p_run)
    p_run.add_argument(
        "--scheme",
        choices=("coded", "uncoded", "wc-sl"),
        default="coded",
        help="coded, uncoded baseline, or worst-case shared-link baseline",
    )
    p_run.add_argument(
        "--memory", "--m", type=Fraction, default=None, help="uncoded cache size in files"
    )
    p_run.add_argument("--demands", default="random", help="comma list or 'random'")
    p_run.add_argument(
        "--transcript", "--out", default=None, help="write signals to this path"
    )
    p_run.add_argument("--library", default=None, help="read file contents from this path")
    p_run.add_argument(
        "--shuffle", action="store_true", help="shuffle retained messages per sender"
    )
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="memory-load tradeoff table as CSV")
    p_sweep.add_argument("--users", "--k", type=int, required=True)
    p_sweep.add_argument("--files", "--n", type=int, required=True)
    p_sweep.add_argument("--out", default=None, help="CSV path (default stdout)")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_audit = sub.add_parser("audit", help="compare view distributions across demands")
    _add_instance_args(p_audit)
    p_audit.add_argument(
        "--observers", "--audit-observer", default="1", help="comma list of colluding users"
    )
    p_audit.add_argument(
        "--mode", "--audit-mode", choices=("auto", "exhaustive", "sampled"), default="auto"
    )
    p_audit.add_argument("--samples", type=int, default=100_000)
    p_audit.add_argument("--budget", type=int, default=1_000_000)
    p_audit.add_argument("--tolerance", type=float, default=None)
    p_audit.add_argument(
        "--variant",
        choices=("honest", "disclosed"),
        default="honest",
        help="disclosed mutates the scheme to leak its bookkeeping",
    )
    p_audit.add_argument("--engine", choices=("reference", "kernel"), default=None)
    p_audit.add_argument("--backend", choices=("numba", "numpy"), default=None)
    p_audit.set_defaults(func=_cmd_audit)

    p_self = sub.add_parser("selftest", help="replay the worked example and one session per scheme")
    p_self.set_defaults(func=_cmd_selftest)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "rep_factor", "missing") is None and args.command in ("audit",):
        parser.error("audit requires --rep-factor")
    try:
        return args.func(args)
    except SchemeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
