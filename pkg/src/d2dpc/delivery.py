"""Demand-private XOR multicast delivery.

Each user k in turn acts as sender for U = (K-1)*N effective users: the
other K-1 real users plus (K-1)*(N-1) virtual ones, filled so every file
is demanded by exactly K-1 effective users. A secret bijection q from
positions [1..U] to effective ids relabels the audience; for every
position subset S of size rep the sender XORs the subfiles of the
demanded files labeled by the other selected ids. Messages whose id set
misses the per-file leader draw are dropped; the rest are emitted in
lexicographic position order (optionally shuffled).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .combinatorics import (
    binom,
    derive_stream,
    lex_subsets,
    random_index,
    random_permutation,
)
from .errors import InvalidParameter, ProtocolViolation
from .placement import Library, PlacementRecord, SchemeParams


def check_demands(demands: Sequence[int], params: SchemeParams) -> tuple[int, ...]:
    d = tuple(int(v) for v in demands)
    if len(d) != params.num_users:
        raise InvalidParameter(f"need {params.num_users} demands, got {len(d)}")
    for v in d:
        if not 1 <= v <= params.num_files:
            raise InvalidParameter(f"demand {v} outside [1, {params.num_files}]")
    return d


@dataclass(frozen=True)
class EffectiveDemands:
    """Demand of every effective user of one sender."""

    sender: int
    assignment: dict  # effective id -> file index

    def demanders(self, file_i: int) -> tuple[int, ...]:
        return tuple(sorted(u for u, i in self.assignment.items() if i == file_i))


def assign_virtual_demands(
    demands: Sequence[int], sender: int, params: SchemeParams
) -> EffectiveDemands:
    """Copy real demands and fill virtual ids so each file has K-1 demanders.

    Virtual ids K+1 .. U+1 are assigned file-by-file in consecutive runs
    whose lengths shrink by the file's real-demand count.
    """
    d = check_demands(demands, params)
    k_users, n_files = params.num_users, params.num_files
    assignment = {u: d[u - 1] for u in range(1, k_users + 1) if u != sender}
    counts = [0] * (n_files + 1)
    for u, file_i in assignment.items():
        counts[file_i] += 1
    cum = 0
    for i in range(1, n_files + 1):
        lo = 1 + k_users + (i - 1) * (k_users - 1) - cum
        cum += counts[i]
        hi = k_users + i * (k_users - 1) - cum
        for u in range(lo, hi + 1):
            assignment[u] = i
    eff = EffectiveDemands(sender, assignment)
    if sorted(assignment) != [v for v in range(1, params.num_effective + 2) if v != sender]:
        raise ProtocolViolation(f"virtual fill for sender {sender} does not tile the ids")
    return eff


@dataclass(frozen=True)
class LeaderSet:
    """One chosen demander per file for one sender's transmission."""

    sender: int
    leaders: dict  # file index -> effective id

    def ids(self) -> frozenset:
        return frozenset(self.leaders.values())


def select_leaders(
    eff: EffectiveDemands,
    params: SchemeParams,
    seed: Optional[int] = None,
    choice: Optional[Sequence[int]] = None,
) -> LeaderSet:
    """Uniformly pick a leader per file (stream label ('leader', k, i)).

    choice, when given, lists for each file an index into the sorted
    demander tuple; this is the demand-independent tape form used by the
    auditor and by forced-replay tests.
    """
    if choice is None and seed is None:
        raise InvalidParameter("select_leaders needs a seed or an explicit choice")
    leaders = {}
    for i in range(1, params.num_files + 1):
        who = eff.demanders(i)
        if len(who) != params.num_users - 1:
            raise ProtocolViolation(
                f"file {i} has {len(who)} effective demanders, expected {params.num_users - 1}"
            )
        if choice is not None:
            idx = choice[i - 1]
            if not 0 <= idx < len(who):
                raise InvalidParameter(f"leader choice {idx} outside [0, {len(who)})")
        else:
            stream = derive_stream(seed, ("leader", eff.sender, i))
            idx = random_index(stream, len(who))
        leaders[i] = who[idx]
    return LeaderSet(eff.sender, leaders)


@dataclass
class MulticastMessage:
    """One XOR message: selected positions, per-term (file, piece), payload."""

    position_set: tuple[int, ...]
    composition: tuple[tuple[int, int], ...]
    payload: np.ndarray = field(repr=False)


@dataclass
class Signal:
    """Everything one sender puts on the air."""

    sender: int
    messages: list


def retained_count(params: SchemeParams) -> int:
    """Messages surviving the leader filter: C(U, rep) - C(U-N, rep)."""
    u = params.num_effective
    return binom(u, params.rep_factor) - binom(u - params.num_files, params.rep_factor)


def build_transmission(
    record: PlacementRecord,
    library: Library,
    eff: EffectiveDemands,
    leaders: LeaderSet,
    relabel: Sequence[int],
    shuffle_stream=None,
) -> Signal:
    """Assemble one sender's retained messages in lex position order.

    relabel is the secret bijection q: entry j-1 is the effective id at
    position j.
    """
    params = record.params
    sender = eff.sender
    u = params.num_effective
    ids = params.effective_ids(sender)
    if tuple(sorted(relabel)) != ids:
        raise InvalidParameter(f"relabel is not a bijection onto ids of sender {sender}")
    leader_ids = leaders.ids()
    messages = []
    for pos_set in lex_subsets(range(1, u + 1), params.rep_factor):
        selected = tuple(relabel[j - 1] for j in pos_set)
        id_set = frozenset(selected)
        if not id_set & leader_ids:
            continue
        composition = []
        payload = np.zeros(params.piece_bits, dtype=np.uint8)
        for ident in selected:
            file_i = eff.assignment[ident]
            label = tuple(sorted(id_set - {ident}))
            piece = record.subfile_piece(sender, file_i, label)
            composition.append((file_i, piece))
            payload ^= library.piece(file_i, piece)
        messages.append(MulticastMessage(pos_set, tuple(composition), payload))
    if len(messages) != retained_count(params):
        raise ProtocolViolation(
            f"sender {sender} retained {len(messages)} messages, "
            f"expected {retained_count(params)}"
        )
    if shuffle_stream is not None:
        order = random_permutation(shuffle_stream, range(len(messages)))
        messages = [messages[j] for j in order]
    return Signal(sender, messages)


def run_delivery(
    record: PlacementRecord,
    library: Library,
    demands: Sequence[int],
    seed: int,
    forced_relabel: Optional[dict] = None,
    forced_leader_choice: Optional[dict] = None,
    shuffle_retained: bool = False,
) -> list[Signal]:
    """All K transmissions for one demand vector.

    Per-sender randomness comes from labels ('relabel', k), ('leader', k, i)
    and ('shuffle', k); forced_* override entries by sender for replay.
    """
    params = record.params
    d = check_demands(demands, params)
    signals = []
    for k in range(1, params.num_users + 1):
        eff = assign_virtual_demands(d, k, params)
        choice = None if forced_leader_choice is None else forced_leader_choice.get(k)
        leaders = select_leaders(eff, params, seed=seed, choice=choice)
        if forced_relabel is not None and k in forced_relabel:
            relabel = tuple(forced_relabel[k])
        else:
            relabel = random_permutation(
                derive_stream(seed, ("relabel", k)), params.effective_ids(k)
            )
        shuffle_stream = derive_stream(seed, ("shuffle", k)) if shuffle_retained else None
        signals.append(
            build_transmission(record, library, eff, leaders, relabel, shuffle_stream)
        )
    return signals
