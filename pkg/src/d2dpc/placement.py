"""Parameter validation, file splitting, and private cache placement.

Each file is cut into num_users * C(U, rep-1) pieces, where U is the
number of effective users. Pieces are grouped in per-sender blocks of
C(U, rep-1) consecutive global indices; a secret per-(file, sender)
permutation assigns block indices to subfile labels W, the (rep-1)-subsets
of that sender's effective ids. User u caches the piece of subfile
(sender k, file i, label W) exactly when u == k or u is in W. Cache
metadata exposes global piece indices only; labels stay server-side.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

import numpy as np

from .combinatorics import (
    RngStream,
    binom,
    derive_stream,
    lex_subsets,
    random_permutation,
    subset_rank,
)
from .errors import DivisibilityError, InstanceTooLarge, InvalidParameter

# size guards: keep instances enumerable and payload arrays in memory
MAX_PIECES_PER_FILE = 1_000_000
MAX_LIBRARY_BITS = 200_000_000


@dataclass(frozen=True)
class SchemeParams:
    """Validated instance sizes plus derived quantities."""

    num_users: int
    num_files: int
    rep_factor: int
    file_bits: int

    @property
    def num_effective(self) -> int:
        """Effective users per transmission: (K-1)*N."""
        return (self.num_users - 1) * self.num_files

    @property
    def block_size(self) -> int:
        """Pieces per (file, sender) block: C(U, rep-1)."""
        return binom(self.num_effective, self.rep_factor - 1)

    @property
    def pieces_per_file(self) -> int:
        return self.num_users * self.block_size

    @property
    def piece_bits(self) -> int:
        return self.file_bits // self.pieces_per_file

    @property
    def cache_files(self) -> Fraction:
        """Per-user memory in files: (N + rep - 1) / K."""
        return Fraction(self.num_files + self.rep_factor - 1, self.num_users)

    @property
    def cached_per_file(self) -> int:
        """Cached pieces per file per user: C(U, rep-1) + (K-1)*C(U-1, rep-2)."""
        u = self.num_effective
        return binom(u, self.rep_factor - 1) + (self.num_users - 1) * binom(
            u - 1, self.rep_factor - 2
        )

    def effective_ids(self, sender: int) -> tuple[int, ...]:
        """Effective user ids for a sender: [1 .. U+1] minus the sender."""
        self._check_sender(sender)
        return tuple(v for v in range(1, self.num_effective + 2) if v != sender)

    def block_range(self, sender: int) -> range:
        """Global piece ids owned by a sender's block, 1-based inclusive."""
        self._check_sender(sender)
        p = self.block_size
        return range((sender - 1) * p + 1, sender * p + 1)

    def piece_sender(self, piece: int) -> int:
        """Which sender's block a global piece id belongs to."""
        if not 1 <= piece <= self.pieces_per_file:
            raise InvalidParameter(f"piece id {piece} outside [1, {self.pieces_per_file}]")
        return (piece - 1) // self.block_size + 1

    def _check_sender(self, sender: int) -> None:
        if not 1 <= sender <= self.num_users:
            raise InvalidParameter(f"sender {sender} outside [1, {self.num_users}]")


def validate_params(num_users: int, num_files: int, rep_factor: int, file_bits: int) -> SchemeParams:
    """Check instance preconditions and return the derived parameter set."""
    if num_users < 2 or num_files < 2:
        raise InvalidParameter(
            f"need at least 2 users and 2 files, got K={num_users}, N={num_files}"
        )
    u = (num_users - 1) * num_files
    if not 1 <= rep_factor <= u + 1:
        raise InvalidParameter(f"rep factor {rep_factor} outside [1, {u + 1}]")
    params = SchemeParams(num_users, num_files, rep_factor, file_bits)
    if params.pieces_per_file > MAX_PIECES_PER_FILE:
        raise InstanceTooLarge(
            f"{params.pieces_per_file} pieces per file exceeds cap {MAX_PIECES_PER_FILE}"
        )
    if file_bits <= 0 or file_bits % params.pieces_per_file != 0:
        raise DivisibilityError(
            f"file_bits={file_bits} not divisible into {params.pieces_per_file} pieces"
        )
    if file_bits * num_files > MAX_LIBRARY_BITS:
        raise InstanceTooLarge(
            f"library of {file_bits * num_files} bits exceeds cap {MAX_LIBRARY_BITS}"
        )
    return params


@dataclass
class Library:
    """The N files as bit arrays of shape (num_files, file_bits)."""

    params: SchemeParams
    bits: np.ndarray

    def piece(self, file_i: int, piece_s: int) -> np.ndarray:
        """Bits of global piece piece_s of file file_i (both 1-based)."""
        p = self.params
        view = self.bits[file_i - 1].reshape(p.pieces_per_file, p.piece_bits)
        return view[piece_s - 1]


def split_files(library: Library) -> np.ndarray:
    """View of the library as (num_files, pieces_per_file, piece_bits)."""
    p = library.params
    return library.bits.reshape(p.num_files, p.pieces_per_file, p.piece_bits)


def load_library(params: SchemeParams, blob: bytes) -> Library:
    """Library from a packed binary blob, file i at bit offset (i-1)*file_bits."""
    total_bits = params.num_files * params.file_bits
    if len(blob) * 8 < total_bits:
        raise InvalidParameter(
            f"blob has {len(blob) * 8} bits, need {total_bits}"
        )
    bits = np.unpackbits(np.frombuffer(blob, dtype=np.uint8))[:total_bits]
    return Library(params, bits.reshape(params.num_files, params.file_bits).copy())


def seeded_file_bits(num_files: int, file_bits: int, seed: int) -> np.ndarray:
    """Random-fill bits for any scheme (stream label ('files',))."""
    stream = derive_stream(seed, ("files",))
    return stream.generator.integers(0, 2, size=(num_files, file_bits), dtype=np.uint8)


def random_library(params: SchemeParams, seed: int) -> Library:
    """Seeded random-fill library (stream label ('files',))."""
    return Library(params, seeded_file_bits(params.num_files, params.file_bits, seed))


@dataclass
class PlacementRecord:
    """Server-side secret: per-(file, sender) piece permutations.

    perms[(i, k)] lists global piece ids; entry j-1 is the piece holding
    subfile (k, i, W(j)) where W(j) is the j-th label in lex order.
    """

    params: SchemeParams
    perms: dict = field(repr=False)

    def labels(self, sender: int) -> list[tuple[int, ...]]:
        p = self.params
        return lex_subsets(p.effective_ids(sender), p.rep_factor - 1)

    def subfile_piece(self, sender: int, file_i: int, label: Sequence[int]) -> int:
        """Global piece id storing subfile (sender, file_i, label)."""
        p = self.params
        rank = subset_rank(label, p.effective_ids(sender))
        return self.perms[(file_i, sender)][rank - 1]

    def piece_label(self, file_i: int, piece: int) -> tuple[int, tuple[int, ...]]:
        """Inverse lookup: (sender, label) of a global piece of file_i."""
        p = self.params
        sender = p.piece_sender(piece)
        perm = self.perms[(file_i, sender)]
        j = perm.index(piece)
        return sender, self.labels(sender)[j]


def build_placement(
    params: SchemeParams,
    seed: int,
    forced: Optional[Mapping[tuple[int, int], Sequence[int]]] = None,
) -> PlacementRecord:
    """Draw the secret permutations (stream label ('placement', i, k)).

    forced overrides individual (file, sender) permutations; values must be
    permutations of that sender's block range. Used by tests and the auditor.
    """
    perms = {}
    for i in range(1, params.num_files + 1):
        for k in range(1, params.num_users + 1):
            block = list(params.block_range(k))
            if forced is not None and (i, k) in forced:
                perm = tuple(int(v) for v in forced[(i, k)])
                if sorted(perm) != block:
                    raise InvalidParameter(
                        f"forced perm for file {i}, sender {k} is not a permutation "
                        f"of block {block[0]}..{block[-1]}"
                    )
            else:
                stream = derive_stream(seed, ("placement", i, k))
                perm = random_permutation(stream, block)
            perms[(i, k)] = perm
    return PlacementRecord(params, perms)


@dataclass
class CacheState:
    """One user's cache: payload bits keyed by (file, global piece id)."""

    user: int
    params: SchemeParams
    pieces: dict = field(repr=False)

    def metadata(self) -> dict[int, tuple[int, ...]]:
        """Per-file sorted tuple of cached global piece ids."""
        out: dict[int, list[int]] = {i: [] for i in range(1, self.params.num_files + 1)}
        for (i, s) in self.pieces:
            out[i].append(s)
        return {i: tuple(sorted(v)) for i, v in out.items()}

    def has(self, file_i: int, piece: int) -> bool:
        return (file_i, piece) in self.pieces

    def total_bits(self) -> int:
        return sum(arr.size for arr in self.pieces.values())


def build_caches(record: PlacementRecord, library: Library) -> list[CacheState]:
    """Fill every user's cache according to the placement rule."""
    params = record.params
    caches = [CacheState(u, params, {}) for u in range(1, params.num_users + 1)]
    for k in range(1, params.num_users + 1):
        labels = record.labels(k)
        for i in range(1, params.num_files + 1):
            perm = record.perms[(i, k)]
            for j, label in enumerate(labels):
                piece = perm[j]
                holders = {k}.union(v for v in label if v <= params.num_users)
                for u in holders:
                    caches[u - 1].pieces[(i, piece)] = library.piece(i, piece)
    return caches


def memory_violations(cache: CacheState, params: SchemeParams) -> list[str]:
    """Diagnostics for any cache-size rule the state breaks."""
    problems = []
    expected = params.cached_per_file
    meta = cache.metadata()
    for i in range(1, params.num_files + 1):
        got = len(meta.get(i, ()))
        if got != expected:
            problems.append(f"file {i}: {got} cached pieces, expected {expected}")
    budget = params.cache_files * params.file_bits
    total = Fraction(cache.total_bits())
    if total != budget:
        problems.append(f"total {total} bits, budget {budget} bits")
    return problems


def memory_check(cache: CacheState, params: SchemeParams) -> bool:
    """True when the cache meets the per-file counts and exact bit budget."""
    return not memory_violations(cache, params)
