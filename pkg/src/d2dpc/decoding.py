"""Receiver-side decoding from cache plus overheard signals.

Receivers never see the placement record: a ReceiverView carries only
the user's own cache and the public signals. Two decoders are provided.
The peeling decoder repeatedly resolves messages with a single unknown
piece; it is fast but can stall when the leader filter removed the
message that would have isolated a piece. The GF(2) elimination decoder
is the correctness oracle: it solves the full linear system and
determines every piece the received span determines.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._kernels import gf2_determined, gf2_rref
from .errors import ProtocolViolation
from .placement import CacheState, SchemeParams

FULLY_KNOWN = "fully_known"
ONE_UNKNOWN = "one_unknown"
MULTI_UNKNOWN = "multi_unknown"


@dataclass
class ReceiverView:
    """What one user can legitimately see after delivery."""

    params: SchemeParams
    user: int
    demand: int
    cache: CacheState
    signals: list


def _unknown_terms(view: ReceiverView, message, resolved=None) -> list[tuple[int, int]]:
    out = []
    for file_i, piece in message.composition:
        if view.cache.has(file_i, piece):
            continue
        if resolved is not None and (file_i, piece) in resolved:
            continue
        out.append((file_i, piece))
    return out


def classify_message(view: ReceiverView, message) -> str:
    """fully_known / one_unknown / multi_unknown relative to the cache."""
    unknowns = set(_unknown_terms(view, message))
    if not unknowns:
        return FULLY_KNOWN
    if len(unknowns) == 1:
        return ONE_UNKNOWN
    return MULTI_UNKNOWN


def peel_decode(view: ReceiverView) -> dict:
    """Resolve single-unknown messages to a fixpoint.

    Returns {(file, piece): bits} for every piece resolved; possibly a
    strict subset of what elimination would determine.
    """
    resolved: dict = {}
    progress = True
    while progress:
        progress = False
        for signal in view.signals:
            for message in signal.messages:
                unknowns = set(_unknown_terms(view, message, resolved))
                if len(unknowns) != 1:
                    continue
                target = next(iter(unknowns))
                value = message.payload.copy()
                for file_i, piece in message.composition:
                    if (file_i, piece) == target:
                        continue
                    if view.cache.has(file_i, piece):
                        value ^= view.cache.pieces[(file_i, piece)]
                    else:
                        value ^= resolved[(file_i, piece)]
                resolved[target] = value
                progress = True
    return resolved


@dataclass
class LinearSystem:
    """GF(2) system over uncached pieces referenced by the signals."""

    unknowns: tuple  # (file, piece) pairs, sorted
    matrix: np.ndarray = field(repr=False)  # rows x unknowns, uint8
    rhs: np.ndarray = field(repr=False)  # rows x piece_bits, uint8


def build_linear_system(view: ReceiverView) -> LinearSystem:
    """One equation per received message, in transcript order.

    Cached terms fold into the right-hand side; unknown columns are
    sorted by (file, piece).
    """
    unknowns = sorted(
        {
            (f, p)
            for signal in view.signals
            for message in signal.messages
            for (f, p) in message.composition
            if not view.cache.has(f, p)
        }
    )
    index = {fp: j for j, fp in enumerate(unknowns)}
    rows = []
    rhs = []
    for signal in view.signals:
        for message in signal.messages:
            row = np.zeros(len(unknowns), dtype=np.uint8)
            acc = message.payload.copy()
            for file_i, piece in message.composition:
                if view.cache.has(file_i, piece):
                    acc ^= view.cache.pieces[(file_i, piece)]
                else:
                    row[index[(file_i, piece)]] ^= 1
            rows.append(row)
            rhs.append(acc)
    matrix = (
        np.array(rows, dtype=np.uint8)
        if rows
        else np.zeros((0, len(unknowns)), dtype=np.uint8)
    )
    rhs_arr = (
        np.array(rhs, dtype=np.uint8)
        if rhs
        else np.zeros((0, view.params.piece_bits), dtype=np.uint8)
    )
    return LinearSystem(tuple(unknowns), matrix, rhs_arr)


def gf2_decode(view: ReceiverView, backend: Optional[str] = None) -> dict:
    """Determine every piece the received equations pin down.

    Raises ProtocolViolation on an inconsistent system (corrupted payloads).
    """
    system = build_linear_system(view)
    n_unk = len(system.unknowns)
    aug = np.concatenate([system.matrix, system.rhs], axis=1).astype(np.uint8)
    pivot_col = gf2_rref(aug, n_unk, backend=backend)
    for r in range(aug.shape[0]):
        if pivot_col[r] < 0 and aug[r, :n_unk].sum() == 0 and aug[r, n_unk:].any():
            raise ProtocolViolation("inconsistent signal equations")
    decoded = {}
    for col, row in gf2_determined(aug, pivot_col, n_unk):
        decoded[system.unknowns[col]] = aug[row, n_unk:].copy()
    return decoded


def demanded_pieces(view: ReceiverView) -> list[int]:
    """Global piece ids of the demanded file missing from the cache."""
    p = view.params
    return [
        s
        for s in range(1, p.pieces_per_file + 1)
        if not view.cache.has(view.demand, s)
    ]


def recover_file(view: ReceiverView, decoded: dict) -> np.ndarray:
    """Assemble the demanded file from cache plus decoded pieces, bit-exact."""
    p = view.params
    out = np.zeros((p.pieces_per_file, p.piece_bits), dtype=np.uint8)
    for s in range(1, p.pieces_per_file + 1):
        key = (view.demand, s)
        if view.cache.has(*key):
            out[s - 1] = view.cache.pieces[key]
        elif key in decoded:
            out[s - 1] = decoded[key]
        else:
            raise ProtocolViolation(
                f"user {view.user}: piece {s} of file {view.demand} undetermined"
            )
    return out.reshape(p.file_bits)
