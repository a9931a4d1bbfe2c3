"""Reference schemes: private uncoded D2D and the shared-link worst case.

The uncoded scheme memory-shares two trivial corners: split each file
into K segments, give user k all of segment k plus the leading beta
fraction of every other segment, and let user k broadcast the trailing
(1-beta) fraction of segment k of every file. Transmissions never
depend on demands, so the scheme is private by construction, with load
K*(N-M)/(K-1).

The shared-link worst-case reference serves N*K effective users from a
server: placement over C(NK, t_sl)-piece files with secret per-file
permutations, delivery of all C(NK, t_sl+1) XOR messages in a secretly
permuted order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .combinatorics import (
    binom,
    derive_stream,
    lex_subsets,
    random_permutation,
    subset_rank,
)
from .delivery import MulticastMessage, Signal
from .errors import DivisibilityError, InstanceTooLarge, InvalidParameter, ProtocolViolation

MAX_SL_PIECES = 1_000_000


@dataclass(frozen=True)
class UncodedParams:
    """Validated sizes for the uncoded memory-sharing scheme."""

    num_users: int
    num_files: int
    memory: Fraction
    file_bits: int

    @property
    def share(self) -> Fraction:
        """beta = (K*M - N) / (N*(K-1)), the cached fraction of foreign segments."""
        return Fraction(
            self.num_users * self.memory - self.num_files,
            self.num_files * (self.num_users - 1),
        )

    @property
    def segment_bits(self) -> int:
        return self.file_bits // self.num_users

    @property
    def prefix_bits(self) -> int:
        return int(self.share * self.segment_bits)


def uncoded_place(
    num_users: int, num_files: int, memory, file_bits: int, seed: int = 0
) -> UncodedParams:
    """Validate sizes; the placement itself is deterministic (seed unused)."""
    del seed
    if num_users < 2 or num_files < 2:
        raise InvalidParameter(
            f"need at least 2 users and 2 files, got K={num_users}, N={num_files}"
        )
    mem = Fraction(memory)
    lo, hi = Fraction(num_files, num_users), Fraction(num_files)
    if not lo <= mem <= hi:
        raise InvalidParameter(f"memory {mem} outside [{lo}, {hi}]")
    if file_bits <= 0 or file_bits % num_users != 0:
        raise DivisibilityError(f"file_bits={file_bits} not divisible into {num_users} segments")
    params = UncodedParams(num_users, num_files, mem, file_bits)
    if (params.share * params.segment_bits).denominator != 1:
        raise DivisibilityError(
            f"prefix of {params.share} * {params.segment_bits} bits is not integral"
        )
    return params


def uncoded_cache_mask(params: UncodedParams, user: int) -> np.ndarray:
    """Boolean (num_files, file_bits) mask of what one user stores."""
    seg, pre = params.segment_bits, params.prefix_bits
    mask = np.zeros(params.file_bits, dtype=bool)
    for k in range(1, params.num_users + 1):
        start = (k - 1) * seg
        mask[start : start + (seg if k == user else pre)] = True
    return np.broadcast_to(mask, (params.num_files, params.file_bits)).copy()


def uncoded_deliver(params: UncodedParams, library_bits: np.ndarray) -> list[Signal]:
    """Every user broadcasts its segment suffixes; demands never enter."""
    seg, pre = params.segment_bits, params.prefix_bits
    signals = []
    for k in range(1, params.num_users + 1):
        start = (k - 1) * seg + pre
        messages = [
            MulticastMessage((k,), ((i, k),), library_bits[i - 1, start : k * seg].copy())
            for i in range(1, params.num_files + 1)
        ]
        signals.append(Signal(k, messages))
    return signals


def uncoded_decode(params: UncodedParams, user: int, cached_bits: np.ndarray, signals) -> np.ndarray:
    """Rebuild the whole library from own cache plus everyone's suffixes."""
    seg, pre = params.segment_bits, params.prefix_bits
    out = cached_bits.copy()
    for signal in signals:
        k = signal.sender
        start = (k - 1) * seg + pre
        for message in signal.messages:
            (file_i, _seg_tag), = message.composition
            out[file_i - 1, start : k * seg] = message.payload
    return out


@dataclass
class SharedLinkInstance:
    """Shared-link placement: per-file secret piece permutations."""

    num_users: int
    num_files: int
    rep_factor: int  # t_sl, cached replication across NK effective users
    file_bits: int
    perms: dict = field(repr=False)  # file -> tuple of piece ids by label rank

    @property
    def num_effective(self) -> int:
        return self.num_users * self.num_files

    @property
    def pieces_per_file(self) -> int:
        return binom(self.num_effective, self.rep_factor)

    @property
    def piece_bits(self) -> int:
        return self.file_bits // self.pieces_per_file

    def subfile_piece(self, file_i: int, label: Sequence[int]) -> int:
        rank = subset_rank(label, range(1, self.num_effective + 1))
        return self.perms[file_i][rank - 1]

    def cached_pieces(self, user: int) -> dict:
        """(file, piece) -> label, for every piece the real user stores."""
        out = {}
        labels = lex_subsets(range(1, self.num_effective + 1), self.rep_factor)
        for i in range(1, self.num_files + 1):
            for j, label in enumerate(labels):
                if user in label:
                    out[(i, self.perms[i][j])] = label
        return out


def wc_sl_place(
    num_users: int, num_files: int, rep_factor: int, file_bits: int, seed: int
) -> SharedLinkInstance:
    """Secret placement over N*K effective users (stream ('sl_placement', i))."""
    if num_users < 2 or num_files < 2:
        raise InvalidParameter(
            f"need at least 2 users and 2 files, got K={num_users}, N={num_files}"
        )
    nk = num_users * num_files
    if not 0 <= rep_factor <= nk:
        raise InvalidParameter(f"rep factor {rep_factor} outside [0, {nk}]")
    pieces = binom(nk, rep_factor)
    if pieces > MAX_SL_PIECES:
        raise InstanceTooLarge(f"{pieces} pieces per file exceeds cap {MAX_SL_PIECES}")
    if file_bits <= 0 or file_bits % pieces != 0:
        raise DivisibilityError(f"file_bits={file_bits} not divisible into {pieces} pieces")
    perms = {
        i: random_permutation(derive_stream(seed, ("sl_placement", i)), range(1, pieces + 1))
        for i in range(1, num_files + 1)
    }
    return SharedLinkInstance(num_users, num_files, rep_factor, file_bits, perms)


def sl_effective_demands(inst: SharedLinkInstance, demands: Sequence[int]) -> dict:
    """Real demands plus virtual fill so each file is demanded exactly K times."""
    d = tuple(int(v) for v in demands)
    if len(d) != inst.num_users:
        raise InvalidParameter(f"need {inst.num_users} demands, got {len(d)}")
    for v in d:
        if not 1 <= v <= inst.num_files:
            raise InvalidParameter(f"demand {v} outside [1, {inst.num_files}]")
    assignment = {u: d[u - 1] for u in range(1, inst.num_users + 1)}
    counts = [0] * (inst.num_files + 1)
    for v in d:
        counts[v] += 1
    nxt = inst.num_users + 1
    for i in range(1, inst.num_files + 1):
        for _ in range(inst.num_users - counts[i]):
            assignment[nxt] = i
            nxt += 1
    if nxt != inst.num_effective + 1:
        raise ProtocolViolation("virtual fill does not tile the effective users")
    return assignment


def sl_caches(inst: SharedLinkInstance, library_bits: np.ndarray) -> list[dict]:
    """Payload bits each real user stores: (file, piece) -> bit array."""
    pieces = library_bits.reshape(inst.num_files, inst.pieces_per_file, inst.piece_bits)
    return [
        {
            (i, s): pieces[i - 1, s - 1]
            for (i, s) in inst.cached_pieces(user)
        }
        for user in range(1, inst.num_users + 1)
    ]


def wc_sl_deliver(
    inst: SharedLinkInstance,
    library_bits: np.ndarray,
    demands: Sequence[int],
    seed: int,
) -> Signal:
    """All C(NK, t_sl+1) XOR messages over the given library, order permuted."""
    assignment = sl_effective_demands(inst, demands)
    nk = inst.num_effective
    pieces = library_bits.reshape(inst.num_files, inst.pieces_per_file, inst.piece_bits)
    messages = []
    for pos_set in lex_subsets(range(1, nk + 1), inst.rep_factor + 1):
        composition = []
        payload = np.zeros(inst.piece_bits, dtype=np.uint8)
        for j in pos_set:
            file_i = assignment[j]
            label = tuple(v for v in pos_set if v != j)
            piece = inst.subfile_piece(file_i, label)
            composition.append((file_i, piece))
            payload ^= pieces[file_i - 1, piece - 1]
        messages.append(MulticastMessage(pos_set, tuple(composition), payload))
    order = random_permutation(derive_stream(seed, ("sl_order",)), range(len(messages)))
    return Signal(0, [messages[j] for j in order])


def wc_sl_decode(
    inst: SharedLinkInstance,
    user: int,
    demand: int,
    cached: dict,
    signal: Signal,
) -> np.ndarray:
    """Peel one-unknown messages and assemble the demanded file."""
    resolved = {}
    for message in signal.messages:
        unknowns = [
            (f, s) for (f, s) in message.composition if (f, s) not in cached
        ]
        if len(unknowns) != 1:
            continue
        value = message.payload.copy()
        for f, s in message.composition:
            if (f, s) in cached:
                value ^= cached[(f, s)]
        resolved[unknowns[0]] = value
    out = np.zeros((inst.pieces_per_file, inst.piece_bits), dtype=np.uint8)
    for s in range(1, inst.pieces_per_file + 1):
        if (demand, s) in cached:
            out[s - 1] = cached[(demand, s)]
        elif (demand, s) in resolved:
            out[s - 1] = resolved[(demand, s)]
        else:
            raise ProtocolViolation(f"user {user}: piece {s} of file {demand} undetermined")
    return out.reshape(inst.file_bits)
