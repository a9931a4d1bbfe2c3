"""Subset enumeration, ranking, and labeled deterministic randomness.

Binomials follow the zero convention used throughout the scheme:
out-of-range arguments yield 0 rather than an error. Subset order is
always lexicographic on ascending integer tuples. Randomness comes from
counter-style streams: a root seed plus a structured label fully
determines every draw, so identical configurations replay bit-identically.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidParameter


def binom(n: int, r: int) -> int:
    """Binomial coefficient with C(n, r) = 0 whenever 0 <= r <= n fails."""
    if n < 0 or r < 0 or r > n:
        return 0
    return math.comb(n, r)


def lex_subsets(ground: Iterable[int], r: int) -> list[tuple[int, ...]]:
    """All r-subsets of ground as ascending tuples, in lexicographic order."""
    elems = sorted(ground)
    if len(set(elems)) != len(elems):
        raise InvalidParameter(f"ground set has repeated elements: {elems}")
    if r < 0:
        raise InvalidParameter(f"subset size must be nonnegative, got {r}")
    return list(combinations(elems, r))


def subset_rank(subset: Iterable[int], ground: Iterable[int]) -> int:
    """1-based lexicographic rank of subset among same-size subsets of ground."""
    elems = sorted(ground)
    sub = sorted(subset)
    index = {v: i for i, v in enumerate(elems)}
    try:
        ords = [index[v] for v in sub]
    except KeyError as exc:
        raise InvalidParameter(f"{exc.args[0]} not in ground set") from None
    n, r = len(elems), len(sub)
    if len(set(ords)) != r:
        raise InvalidParameter(f"subset has repeated elements: {sub}")
    # combinadic: count subsets that precede by their first differing element
    rank = 0
    prev = -1
    for j, w in enumerate(ords):
        for v in range(prev + 1, w):
            rank += binom(n - 1 - v, r - 1 - j)
        prev = w
    return rank + 1


def subset_unrank(rank: int, ground: Iterable[int], r: int) -> tuple[int, ...]:
    """Inverse of subset_rank: the rank-th (1-based) r-subset of ground."""
    elems = sorted(ground)
    n = len(elems)
    total = binom(n, r)
    if not 1 <= rank <= total:
        raise InvalidParameter(f"rank {rank} outside [1, {total}]")
    remaining = rank - 1
    out = []
    prev = -1
    for j in range(r):
        for v in range(prev + 1, n):
            block = binom(n - 1 - v, r - 1 - j)
            if remaining < block:
                out.append(elems[v])
                prev = v
                break
            remaining -= block
    return tuple(out)


def _label_words(label: Sequence) -> list[int]:
    words = []
    for part in label:
        if isinstance(part, str):
            words.append(zlib.crc32(part.encode("utf-8")))
        elif isinstance(part, (int, np.integer)):
            words.append(int(part) & 0xFFFFFFFF)
            words.append((int(part) >> 32) & 0xFFFFFFFF)
        else:
            raise InvalidParameter(f"stream label parts must be str or int, got {part!r}")
    return words


@dataclass
class RngStream:
    """One labeled randomness stream: (root_seed, label) -> generator."""

    root_seed: int
    label: tuple
    _gen: np.random.Generator = field(repr=False, default=None)

    def __post_init__(self):
        if self._gen is None:
            seq = np.random.SeedSequence(self.root_seed, spawn_key=_label_words(self.label))
            self._gen = np.random.Generator(np.random.PCG64(seq))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen


def derive_stream(root_seed: int, label: Sequence) -> RngStream:
    """Stream for a (purpose, indices...) label under the given root seed."""
    if root_seed < 0:
        raise InvalidParameter(f"root seed must be nonnegative, got {root_seed}")
    return RngStream(int(root_seed), tuple(label))


def random_permutation(stream: RngStream, domain: Sequence[int]) -> tuple[int, ...]:
    """Uniform permutation of domain, consumed from the stream."""
    arr = np.asarray(sorted(domain), dtype=np.int64)
    return tuple(int(v) for v in stream.generator.permutation(arr))


def random_index(stream: RngStream, bound: int) -> int:
    """Uniform draw from [0, bound)."""
    if bound <= 0:
        raise InvalidParameter(f"bound must be positive, got {bound}")
    return int(stream.generator.integers(0, bound))
