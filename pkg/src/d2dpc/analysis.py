"""Exact rational load formulas and memory-rate tradeoff tables.

All arithmetic uses fractions.Fraction; floats appear only at the CSV
boundary, printed with 12 significant digits.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .combinatorics import binom
from .errors import InvalidParameter


def load_coded(num_users: int, num_files: int, rep_factor: int) -> tuple[Fraction, Fraction]:
    """Memory-load corner of the coded scheme at one replication factor.

    M = (N + rep - 1)/K, R = (C(U, rep) - C(U - N, rep)) / C(U, rep - 1).
    """
    if num_users < 2 or num_files < 2:
        raise InvalidParameter(
            f"need at least 2 users and 2 files, got K={num_users}, N={num_files}"
        )
    u = (num_users - 1) * num_files
    if not 1 <= rep_factor <= u + 1:
        raise InvalidParameter(f"rep factor {rep_factor} outside [1, {u + 1}]")
    mem = Fraction(num_files + rep_factor - 1, num_users)
    if rep_factor == u + 1:
        return mem, Fraction(0)
    rate = Fraction(
        binom(u, rep_factor) - binom(u - num_files, rep_factor),
        binom(u, rep_factor - 1),
    )
    return mem, rate


def load_uncoded(num_users: int, num_files: int, memory: Fraction) -> Fraction:
    """Uncoded private load K*(N - M)/(K - 1) for M in [N/K, N]."""
    mem = Fraction(memory)
    lo, hi = Fraction(num_files, num_users), Fraction(num_files)
    if not lo <= mem <= hi:
        raise InvalidParameter(f"memory {mem} outside [{lo}, {hi}]")
    return Fraction(num_users, num_users - 1) * (num_files - mem)


@dataclass(frozen=True)
class Envelope:
    """Lower convex envelope of (M, R) points; exact piecewise-linear."""

    vertices: tuple  # ((M, R), ...) with strictly increasing M

    def evaluate(self, memory) -> Fraction:
        mem = Fraction(memory)
        vs = self.vertices
        if not vs[0][0] <= mem <= vs[-1][0]:
            raise InvalidParameter(f"memory {mem} outside [{vs[0][0]}, {vs[-1][0]}]")
        for (m0, r0), (m1, r1) in zip(vs, vs[1:]):
            if m0 <= mem <= m1:
                return r0 + (r1 - r0) * (mem - m0) / (m1 - m0)
        return vs[-1][1]


def convex_envelope(points: Iterable[tuple]) -> Envelope:
    """Lower hull by memory; ties on M keep the smallest R."""
    best: dict[Fraction, Fraction] = {}
    for m, r in points:
        m, r = Fraction(m), Fraction(r)
        if m not in best or r < best[m]:
            best[m] = r
    if not best:
        raise InvalidParameter("need at least one point")
    pts = sorted(best.items())
    hull: list[tuple[Fraction, Fraction]] = []
    for p in pts:
        while len(hull) >= 2:
            (ax, ay), (bx, by) = hull[-2], hull[-1]
            # drop b when it lies on or above segment a-p
            if (by - ay) * (p[0] - ax) >= (p[1] - ay) * (bx - ax):
                hull.pop()
            else:
                break
        hull.append(p)
    return Envelope(tuple(hull))


def tradeoff_table(num_users: int, num_files: int) -> list[tuple]:
    """Rows (rep, M, R_coded, R_uncoded_at_M, R_envelope_at_M) for all corners."""
    u = (num_users - 1) * num_files
    corners = [load_coded(num_users, num_files, t) for t in range(1, u + 2)]
    env = convex_envelope(corners)
    rows = []
    for t, (mem, rate) in enumerate(corners, start=1):
        rows.append(
            (t, mem, rate, load_uncoded(num_users, num_files, mem), env.evaluate(mem))
        )
    return rows


def _fmt(value: Fraction) -> str:
    return f"{float(value):.12g}"


def table_to_csv(rows: Sequence[tuple], num_users: int, num_files: int) -> str:
    """Mandated sweep format: scheme,K,N,t,M,R with header and LF endings."""
    lines = ["scheme,K,N,t,M,R"]
    for t, mem, r_coded, r_uncoded, r_env in rows:
        for scheme, rate in (("coded", r_coded), ("uncoded", r_uncoded), ("envelope", r_env)):
            lines.append(
                f"{scheme},{num_users},{num_files},{t},{_fmt(mem)},{_fmt(rate)}"
            )
    return "\n".join(lines) + "\n"
