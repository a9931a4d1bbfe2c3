"""Demand-privacy audit: compare observer view distributions across demands.

The server's secret randomness is a tape: one piece permutation per
(file, sender) block, one position relabel per sender, and one leader
choice index per (sender, file). The scheme keeps demands private from an
observer set exactly when the joint distribution of everything those users
see is the same for any two demand vectors that agree on the observers'
own demands.

Two modes:
  exhaustive - enumerate every tape, compare exact distributions of raw
      views (cache contents plus all signals); distances are Fractions.
  sampled    - draw tapes, compare empirical distributions of canonical
      transcripts: raw views are keyed by secret piece ids and are almost
      surely unique per tape, so raw two-sample statistics never converge
      within any feasible budget. The canonical transcript quotients out
      the id bookkeeping an observer cannot interpret (piece ids become
      first-occurrence names, cache contents become per-block payload
      multisets) while keeping everything decision-relevant: message
      structure, file indices, which terms the observers hold, payloads.

The sampled path has a batch kernel (numba or numpy, see _kernels) that
packs each transcript into a few uint64 words, plus a pure-python
reference used to validate it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from . import _kernels
from .combinatorics import binom, derive_stream, lex_subsets, subset_rank
from .delivery import assign_virtual_demands, check_demands, retained_count, run_delivery
from .errors import BudgetExceeded, InstanceTooLarge, InvalidParameter
from .placement import Library, SchemeParams, build_caches, build_placement

DEFAULT_BUDGET = 1_000_000
DEFAULT_SAMPLES = 100_000
DEFAULT_TOLERANCE = 0.02
DEFAULT_CHUNK = 1 << 18
MAX_KERNEL_EFFECTIVE = 20  # rank tables are 2**U entries


# ---------------------------------------------------------------------------
# tapes


@dataclass(frozen=True)
class RandomTape:
    """One realization of all server secrets for one session."""

    perms: dict  # (file, sender) -> tuple of global piece ids
    relabel: dict  # sender -> tuple, position j holds entry j-1
    leader_choice: dict  # sender -> tuple of per-file indices into sorted demanders


def tape_count(params: SchemeParams, variant: str = "honest") -> int:
    """Number of distinct tapes; the disclosed variant fixes relabels/leaders."""
    n, k = params.num_files, params.num_users
    perms = _factorial(params.block_size) ** (n * k)
    if variant == "disclosed":
        return perms
    relabels = _factorial(params.num_effective) ** k
    leaders = (k - 1) ** (n * k)
    return perms * relabels * leaders


def _factorial(n: int) -> int:
    out = 1
    for v in range(2, n + 1):
        out *= v
    return out


def _identity_relabel(params: SchemeParams) -> dict:
    return {
        k: params.effective_ids(k) for k in range(1, params.num_users + 1)
    }


def _zero_choice(params: SchemeParams) -> dict:
    return {
        k: (0,) * params.num_files for k in range(1, params.num_users + 1)
    }


def enumerate_randomness(
    params: SchemeParams, budget: int = DEFAULT_BUDGET, variant: str = "honest"
) -> Iterator[RandomTape]:
    """Yield every tape, or raise BudgetExceeded before yielding any."""
    total = tape_count(params, variant)
    if total > budget:
        raise BudgetExceeded(
            f"{total} tapes exceed the enumeration budget {budget}"
        )
    n, k_users = params.num_files, params.num_users
    blocks = {k: list(params.block_range(k)) for k in range(1, k_users + 1)}
    perm_keys = [(i, k) for i in range(1, n + 1) for k in range(1, k_users + 1)]
    perm_opts = [list(itertools.permutations(blocks[k])) for (_, k) in perm_keys]
    if variant == "disclosed":
        fixed_q = _identity_relabel(params)
        fixed_c = _zero_choice(params)
        for combo in itertools.product(*perm_opts):
            yield RandomTape(dict(zip(perm_keys, combo)), fixed_q, fixed_c)
        return
    relabel_opts = [
        list(itertools.permutations(params.effective_ids(k)))
        for k in range(1, k_users + 1)
    ]
    choice_opts = list(itertools.product(range(k_users - 1), repeat=n))
    for combo in itertools.product(*perm_opts):
        perms = dict(zip(perm_keys, combo))
        for qs in itertools.product(*relabel_opts):
            relabel = {k: qs[k - 1] for k in range(1, k_users + 1)}
            for cs in itertools.product(choice_opts, repeat=k_users):
                choice = {k: cs[k - 1] for k in range(1, k_users + 1)}
                yield RandomTape(perms, relabel, choice)


def run_with_tape(
    params: SchemeParams,
    library: Library,
    demands: Sequence[int],
    tape: RandomTape,
) -> tuple[list, list]:
    """Replay one session under a fully forced tape; returns (caches, signals)."""
    record = build_placement(params, 0, forced=tape.perms)
    caches = build_caches(record, library)
    signals = run_delivery(
        record,
        library,
        demands,
        0,
        forced_relabel=tape.relabel,
        forced_leader_choice=tape.leader_choice,
    )
    return caches, signals


# ---------------------------------------------------------------------------
# view keys (reference engine)


def raw_view(
    params: SchemeParams,
    caches: list,
    signals: list,
    observers: Sequence[int],
    disclosed: Optional[RandomTape] = None,
) -> tuple:
    """Everything the observer set sees, verbatim (hashable)."""
    zsec = []
    for o in observers:
        cache = caches[o - 1]
        per_file = []
        for i in range(1, params.num_files + 1):
            entries = tuple(
                (s, tuple(int(b) for b in bits))
                for (fi, s), bits in sorted(cache.pieces.items())
                if fi == i
            )
            per_file.append(entries)
        zsec.append((o, tuple(per_file)))
    xsec = tuple(
        (
            sig.sender,
            tuple(
                (m.position_set, m.composition, tuple(int(b) for b in m.payload))
                for m in sig.messages
            ),
        )
        for sig in signals
    )
    view = (("caches", tuple(zsec)), ("signals", xsec))
    if disclosed is not None:
        psec = tuple(sorted(disclosed.perms.items()))
        view = view + (("perms", psec),)
    return view


def canonical_transcript(
    params: SchemeParams,
    caches: list,
    signals: list,
    observers: Sequence[int],
    disclosed: Optional[RandomTape] = None,
) -> tuple:
    """Observer view modulo piece-id bookkeeping.

    Piece ids are replaced by first-occurrence names over the signal scan
    (sender, message, term order); cache contents become per-(file, block)
    payload multisets plus per-term cached flags.
    """
    names: dict = {}
    xsec = []
    for sig in signals:
        msgs = []
        for m in sig.messages:
            srank = subset_rank(m.position_set, range(1, params.num_effective + 1))
            terms = []
            for file_i, piece in m.composition:
                key = (file_i, piece)
                if key not in names:
                    names[key] = len(names) + 1
                flags = tuple(
                    1 if caches[o - 1].has(file_i, piece) else 0 for o in observers
                )
                terms.append((file_i, flags, names[key]))
            msgs.append((srank, tuple(terms), tuple(int(b) for b in m.payload)))
        xsec.append(tuple(msgs))
    zsec = []
    for o in observers:
        cache = caches[o - 1]
        per_file = []
        for i in range(1, params.num_files + 1):
            per_block = []
            for k in range(1, params.num_users + 1):
                block = params.block_range(k)
                payloads = sorted(
                    tuple(int(b) for b in cache.pieces[(i, s)])
                    for s in block
                    if (i, s) in cache.pieces
                )
                per_block.append(tuple(payloads))
            per_file.append(tuple(per_block))
        zsec.append(tuple(per_file))
    out = (("Z", tuple(zsec)), ("X", tuple(xsec)))
    if disclosed is not None:
        psec = []
        for i in range(1, params.num_files + 1):
            for k in range(1, params.num_users + 1):
                start = params.block_range(k)[0]
                psec.append(tuple(v - start for v in disclosed.perms[(i, k)]))
        out = out + (("P", tuple(psec)),)
    return out


# ---------------------------------------------------------------------------
# packed layout shared by the kernels and the reference packer


@dataclass(frozen=True)
class AuditLayout:
    """Bit positions of every transcript field inside the packed row."""

    f_word: np.ndarray
    f_shift: np.ndarray
    f_width: np.ndarray
    n_words: int


def _bits_for(max_value: int) -> int:
    return max(1, int(max_value).bit_length())


def plan_layout(params: SchemeParams, n_obs: int, disclose: bool) -> AuditLayout:
    """Assign fields to words so no field straddles a word boundary."""
    n, k, block = params.num_files, params.num_users, params.block_size
    rep, u = params.rep_factor, params.num_effective
    n_sub = binom(u, rep)
    ret = retained_count(params)
    total_terms = k * ret * rep
    widths: list[int] = []
    widths += [_bits_for(block)] * (n_obs * n * k)
    if ret:
        per_msg = [_bits_for(n_sub - 1)]
        for _ in range(rep):
            per_msg += [_bits_for(n - 1), n_obs, _bits_for(total_terms - 1)]
        per_msg += [1]
        widths += per_msg * (k * ret)
    if disclose:
        widths += [_bits_for(block - 1)] * (n * k * block)
    f_word, f_shift = [], []
    word, used = 0, 0
    for w in widths:
        if w > 64:
            raise InstanceTooLarge(f"packed field of {w} bits does not fit a word")
        if used + w > 64:
            word, used = word + 1, 0
        f_word.append(word)
        f_shift.append(used)
        used += w
    return AuditLayout(
        np.asarray(f_word, dtype=np.int64),
        np.asarray(f_shift, dtype=np.int64),
        np.asarray(widths, dtype=np.int64),
        word + 1 if widths else 1,
    )


def pack_transcript(
    transcript: tuple,
    params: SchemeParams,
    n_obs: int,
    layout: AuditLayout,
) -> bytes:
    """Pack a canonical transcript exactly as the batch kernels do."""
    if params.piece_bits != 1:
        raise InvalidParameter("packed transcripts require piece_bits == 1")
    sections = dict(transcript)
    values: list[int] = []
    for per_file in sections["Z"]:
        for per_block in per_file:
            for payloads in per_block:
                values.append(sum(bits[0] for bits in payloads))
    for msgs in sections["X"]:
        for srank, terms, payload in msgs:
            values.append(srank - 1)
            for file_i, flags, name in terms:
                values.append(file_i - 1)
                values.append(sum(b << oi for oi, b in enumerate(flags)))
                values.append(name - 1)
            values.append(payload[0])
    if "P" in sections:
        for offsets in sections["P"]:
            values.extend(offsets)
    if len(values) != len(layout.f_word):
        raise InvalidParameter(
            f"transcript has {len(values)} fields, layout expects {len(layout.f_word)}"
        )
    words = [0] * layout.n_words
    for fi, v in enumerate(values):
        if v < 0 or v >> int(layout.f_width[fi]):
            raise InvalidParameter(f"field {fi} value {v} overflows its width")
        words[int(layout.f_word[fi])] |= v << int(layout.f_shift[fi])
    return np.asarray(words, dtype=np.uint64).tobytes()


# ---------------------------------------------------------------------------
# kernel engine tables and tape batches


def _kernel_guard(params: SchemeParams) -> None:
    if params.piece_bits != 1:
        raise InvalidParameter("kernel audit engine requires piece_bits == 1")
    if params.num_effective > MAX_KERNEL_EFFECTIVE:
        raise InstanceTooLarge(
            f"kernel audit engine caps effective users at {MAX_KERNEL_EFFECTIVE}"
        )


def _instance_tables(params: SchemeParams, library: Library, observers) -> dict:
    u, k, n = params.num_effective, params.num_users, params.num_files
    block, rep = params.block_size, params.rep_factor
    ids0 = np.zeros((k, u), dtype=np.int64)
    idpos = np.full((k, u + 1), -1, dtype=np.int64)
    for k0 in range(k):
        ids = [v for v in range(u + 1) if v != k0]
        ids0[k0] = ids
        for pos, v in enumerate(ids):
            idpos[k0, v] = pos
    labels = lex_subsets(range(u), rep - 1)
    wmem_ord = np.zeros((block, u), dtype=np.uint8)
    for j, lab in enumerate(labels):
        for v in lab:
            wmem_ord[j, v] = 1
    rankmask = np.zeros(1 << u, dtype=np.int64)
    for j, lab in enumerate(labels):
        rankmask[sum(1 << v for v in lab)] = j
    subs = lex_subsets(range(u), rep)
    pos_subsets = np.asarray(subs, dtype=np.int64).reshape(len(subs), rep)
    filebits = np.ascontiguousarray(library.bits.astype(np.uint8))
    blocksum = filebits.reshape(n, k, block).sum(axis=2).astype(np.int64)
    obs0 = np.asarray([o - 1 for o in observers], dtype=np.int64)
    return {
        "ids0": ids0,
        "idpos": idpos,
        "wmem_ord": wmem_ord,
        "rankmask": rankmask,
        "pos_subsets": pos_subsets,
        "filebits": filebits,
        "blocksum": blocksum,
        "obs0": obs0,
    }


def _demand_tables(params: SchemeParams, demands: Sequence[int]) -> dict:
    u, k, n = params.num_effective, params.num_users, params.num_files
    effd0 = np.full((k, u + 1), -1, dtype=np.int64)
    dem0 = np.zeros((k, n, k - 1), dtype=np.int64)
    for k0 in range(k):
        eff = assign_virtual_demands(demands, k0 + 1, params)
        for ident, file_i in eff.assignment.items():
            effd0[k0, ident - 1] = file_i - 1
        for i in range(1, n + 1):
            dem0[k0, i - 1] = [v - 1 for v in eff.demanders(i)]
    return {"effd0": effd0, "dem0": dem0}


@lru_cache(maxsize=8)
def _perm_table(m: int) -> np.ndarray:
    return np.asarray(list(itertools.permutations(range(m))), dtype=np.uint8)


def sample_tapes(
    params: SchemeParams, n: int, rng: np.random.Generator, variant: str = "honest"
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw n tapes as (pp, qq, cc) offset/ordinal/index arrays."""
    nf, k = params.num_files, params.num_users
    block, u = params.block_size, params.num_effective
    keys = rng.integers(0, 1 << 62, size=(n, nf * k, block), dtype=np.int64)
    pp = np.argsort(keys, axis=2).astype(np.uint8).reshape(n, nf, k, block)
    if variant == "disclosed":
        qq = np.broadcast_to(np.arange(u, dtype=np.uint8), (n, k, u)).copy()
        cc = np.zeros((n, k, nf), dtype=np.uint8)
        return pp, qq, cc
    keys = rng.integers(0, 1 << 62, size=(n, k, u), dtype=np.int64)
    qq = np.argsort(keys, axis=2).astype(np.uint8)
    if k > 2:
        cc = rng.integers(0, k - 1, size=(n, k, nf), dtype=np.uint8)
    else:
        cc = np.zeros((n, k, nf), dtype=np.uint8)
    return pp, qq, cc


def tapes_from_indices(
    params: SchemeParams, idx: np.ndarray, variant: str = "honest"
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Decode tape ranks (mixed radix, perm blocks first) into tape arrays."""
    nf, k = params.num_files, params.num_users
    block, u = params.block_size, params.num_effective
    n = idx.shape[0]
    radices = [_factorial(block)] * (nf * k)
    if variant != "disclosed":
        radices += [_factorial(u)] * k
        radices += [k - 1] * (k * nf)
    digits = []
    rem = idx.astype(np.int64).copy()
    for radix in reversed(radices):
        digits.append(rem % radix)
        rem //= radix
    digits.reverse()
    pp = np.zeros((n, nf, k, block), dtype=np.uint8)
    pt = _perm_table(block)
    pos = 0
    for i in range(nf):
        for k0 in range(k):
            pp[:, i, k0, :] = pt[digits[pos]]
            pos += 1
    if variant == "disclosed":
        qq = np.broadcast_to(np.arange(u, dtype=np.uint8), (n, k, u)).copy()
        cc = np.zeros((n, k, nf), dtype=np.uint8)
        return pp, qq, cc
    qq = np.zeros((n, k, u), dtype=np.uint8)
    qt = _perm_table(u)
    for k0 in range(k):
        qq[:, k0, :] = qt[digits[pos]]
        pos += 1
    cc = np.zeros((n, k, nf), dtype=np.uint8)
    for k0 in range(k):
        for i in range(nf):
            cc[:, k0, i] = digits[pos]
            pos += 1
    return pp, qq, cc


def tape_arrays_to_record(
    params: SchemeParams,
    pp: np.ndarray,
    qq: np.ndarray,
    cc: np.ndarray,
    row: int,
) -> RandomTape:
    """One row of tape arrays as a RandomTape over global 1-based ids."""
    perms = {}
    for i in range(1, params.num_files + 1):
        for k in range(1, params.num_users + 1):
            start = params.block_range(k)[0]
            perms[(i, k)] = tuple(int(start + e) for e in pp[row, i - 1, k - 1])
    relabel = {}
    for k in range(1, params.num_users + 1):
        ids = params.effective_ids(k)
        relabel[k] = tuple(ids[int(o)] for o in qq[row, k - 1])
    choice = {
        k: tuple(int(c) for c in cc[row, k - 1])
        for k in range(1, params.num_users + 1)
    }
    return RandomTape(perms, relabel, choice)


# ---------------------------------------------------------------------------
# distributions


@dataclass
class ViewDistribution:
    """Counts of view keys; exact when total covers the whole tape space."""

    kind: str  # "exact" or "empirical"
    counts: dict = field(repr=False)
    total: int = 0

    def support(self) -> int:
        return len(self.counts)


def tv_distance(a: ViewDistribution, b: ViewDistribution):
    """Total variation distance; Fraction for exact pairs, float otherwise."""
    if a.kind != b.kind:
        raise InvalidParameter("cannot mix exact and empirical distributions")
    if a.total <= 0 or b.total <= 0:
        raise InvalidParameter("empty distribution")
    acc = 0
    for key in a.counts.keys() | b.counts.keys():
        acc += abs(a.counts.get(key, 0) * b.total - b.counts.get(key, 0) * a.total)
    if a.kind == "exact":
        return Fraction(acc, 2 * a.total * b.total)
    return acc / (2 * a.total * b.total)


def _reference_distribution(
    params: SchemeParams,
    library: Library,
    demands: Sequence[int],
    observers: Sequence[int],
    mode: str,
    samples: int,
    seed: int,
    budget: int,
    variant: str,
    key: str,
    packed: bool,
) -> ViewDistribution:
    layout = (
        plan_layout(params, len(observers), variant == "disclosed") if packed else None
    )

    def make_key(tape: RandomTape):
        caches, signals = run_with_tape(params, library, demands, tape)
        shown = tape if variant == "disclosed" else None
        if key == "raw":
            return raw_view(params, caches, signals, observers, shown)
        tr = canonical_transcript(params, caches, signals, observers, shown)
        if packed:
            return pack_transcript(tr, params, len(observers), layout)
        return tr

    counts: dict = {}
    if mode == "exhaustive":
        total = 0
        for tape in enumerate_randomness(params, budget, variant):
            kk = make_key(tape)
            counts[kk] = counts.get(kk, 0) + 1
            total += 1
        return ViewDistribution("exact", counts, total)
    rng = derive_stream(seed, ("audit", variant) + tuple(demands)).generator
    pp, qq, cc = sample_tapes(params, samples, rng, variant)
    for row in range(samples):
        tape = tape_arrays_to_record(params, pp, qq, cc, row)
        kk = make_key(tape)
        counts[kk] = counts.get(kk, 0) + 1
    return ViewDistribution("empirical", counts, samples)


def _kernel_distribution(
    params: SchemeParams,
    library: Library,
    demands: Sequence[int],
    observers: Sequence[int],
    mode: str,
    samples: int,
    seed: int,
    budget: int,
    variant: str,
    backend: Optional[str],
    chunk: int,
) -> ViewDistribution:
    _kernel_guard(params)
    disclose = variant == "disclosed"
    layout = plan_layout(params, len(observers), disclose)
    tables = _instance_tables(params, library, observers)
    tables.update(_demand_tables(params, demands))
    counts: dict = {}

    def absorb(pp, qq, cc):
        rows = _kernels.audit_rows(
            pp,
            qq,
            cc,
            tables,
            layout.f_word,
            layout.f_shift,
            layout.n_words,
            disclose,
            backend=backend,
        )
        order = np.lexsort(rows.T[::-1])
        rows = rows[order]
        changed = np.any(rows[1:] != rows[:-1], axis=1)
        starts = np.flatnonzero(np.concatenate(([True], changed)))
        sizes = np.diff(np.concatenate((starts, [len(rows)])))
        for start, size in zip(starts, sizes):
            kk = rows[start].tobytes()
            counts[kk] = counts.get(kk, 0) + int(size)

    if mode == "exhaustive":
        total = tape_count(params, variant)
        if total > budget:
            raise BudgetExceeded(
                f"{total} tapes exceed the enumeration budget {budget}"
            )
        done = 0
        while done < total:
            m = min(chunk, total - done)
            idx = np.arange(done, done + m, dtype=np.int64)
            absorb(*tapes_from_indices(params, idx, variant))
            done += m
        return ViewDistribution("exact", counts, total)
    rng = derive_stream(seed, ("audit", variant) + tuple(demands)).generator
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        absorb(*sample_tapes(params, m, rng, variant))
        done += m
    return ViewDistribution("empirical", counts, samples)


def view_distribution(
    params: SchemeParams,
    library: Library,
    demands: Sequence[int],
    observers: Sequence[int],
    mode: str,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    budget: int = DEFAULT_BUDGET,
    variant: str = "honest",
    engine: Optional[str] = None,
    key: Optional[str] = None,
    packed: bool = False,
    backend: Optional[str] = None,
    chunk: int = DEFAULT_CHUNK,
) -> ViewDistribution:
    """Distribution of the observers' view under one demand vector.

    engine "reference" replays sessions object by object; "kernel" maps
    tape batches straight to packed rows. Exhaustive mode defaults to
    reference with raw keys, sampled mode to the kernel with canonical
    keys (falling back to reference when the kernel guards reject the
    instance).
    """
    check_demands(demands, params)
    obs = _check_observers(params, observers)
    if variant not in ("honest", "disclosed"):
        raise InvalidParameter(f"unknown variant {variant!r}")
    if mode not in ("exhaustive", "sampled"):
        raise InvalidParameter(f"unknown audit mode {mode!r}")
    if key not in (None, "raw", "canonical"):
        raise InvalidParameter(f"unknown key kind {key!r}")
    if engine is None:
        if mode == "exhaustive":
            engine = "reference"
        else:
            engine = (
                "kernel"
                if params.piece_bits == 1
                and params.num_effective <= MAX_KERNEL_EFFECTIVE
                else "reference"
            )
    if engine == "kernel":
        return _kernel_distribution(
            params, library, demands, obs, mode, samples, seed, budget, variant,
            backend, chunk,
        )
    if engine != "reference":
        raise InvalidParameter(f"unknown engine {engine!r}")
    if key is None:
        key = "raw" if mode == "exhaustive" else "canonical"
    if packed and key != "canonical":
        raise InvalidParameter("packed keys require canonical transcripts")
    return _reference_distribution(
        params, library, demands, obs, mode, samples, seed, budget, variant, key,
        packed,
    )


# ---------------------------------------------------------------------------
# audits


@dataclass(frozen=True)
class PairResult:
    """Distance between the view distributions of two comparable demands."""

    demands_a: tuple
    demands_b: tuple
    distance: object
    ok: bool


@dataclass
class AuditReport:
    """Outcome of one observer-set audit over all comparable demand pairs."""

    observers: tuple
    mode: str
    variant: str
    engine: str
    tolerance: object
    total: int
    pairs: list
    params: dict = field(default_factory=dict)

    @property
    def all_ok(self) -> bool:
        return all(p.ok for p in self.pairs)

    @property
    def max_distance(self):
        return max((p.distance for p in self.pairs), default=0)

    def to_dict(self) -> dict:
        return {
            "params": self.params,
            "observers": list(self.observers),
            "mode": self.mode,
            "variant": self.variant,
            "engine": self.engine,
            "tolerance": float(self.tolerance),
            "total": self.total,
            "verdict": "PASS" if self.all_ok else "FAIL",
            "pairs": [
                {
                    "demands_a": list(p.demands_a),
                    "demands_b": list(p.demands_b),
                    "distance": float(p.distance),
                    "verdict": "PASS" if p.ok else "FAIL",
                }
                for p in self.pairs
            ],
        }


def _check_observers(params: SchemeParams, observers: Sequence[int]) -> tuple:
    obs = tuple(sorted(set(int(o) for o in observers)))
    if not obs:
        raise InvalidParameter("observer set is empty")
    for o in obs:
        if not 1 <= o <= params.num_users:
            raise InvalidParameter(f"observer {o} outside [1, {params.num_users}]")
    return obs


def demand_vectors(params: SchemeParams) -> list[tuple[int, ...]]:
    """All N**K demand vectors in lex order."""
    return list(
        itertools.product(range(1, params.num_files + 1), repeat=params.num_users)
    )


def comparable_pairs(
    params: SchemeParams, observers: Sequence[int]
) -> list[tuple[tuple, tuple]]:
    """Demand-vector pairs that agree on every observer's own demand."""
    obs = _check_observers(params, observers)
    groups: dict = {}
    for d in demand_vectors(params):
        groups.setdefault(tuple(d[o - 1] for o in obs), []).append(d)
    pairs = []
    for group in groups.values():
        pairs.extend(itertools.combinations(group, 2))
    return pairs


def audit_colluding(
    params: SchemeParams,
    library: Library,
    observers: Sequence[int],
    mode: str = "auto",
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    budget: int = DEFAULT_BUDGET,
    tolerance=None,
    variant: str = "honest",
    engine: Optional[str] = None,
    backend: Optional[str] = None,
    chunk: int = DEFAULT_CHUNK,
) -> AuditReport:
    """Compare view distributions for every demand pair an observer set
    should not be able to tell apart."""
    obs = _check_observers(params, observers)
    if mode == "auto":
        mode = "exhaustive" if tape_count(params, variant) <= budget else "sampled"
    if tolerance is None:
        tolerance = Fraction(0) if mode == "exhaustive" else DEFAULT_TOLERANCE
    pairs = comparable_pairs(params, obs)
    needed = sorted({d for pair in pairs for d in pair})
    dists = {
        d: view_distribution(
            params, library, d, obs, mode,
            samples=samples, seed=seed, budget=budget, variant=variant,
            engine=engine, backend=backend, chunk=chunk,
        )
        for d in needed
    }
    results = []
    for da, db in pairs:
        dist = tv_distance(dists[da], dists[db])
        results.append(PairResult(da, db, dist, dist <= tolerance))
    if engine is None:
        engine = "reference" if mode == "exhaustive" else "kernel"
    total = next(iter(dists.values())).total if dists else 0
    return AuditReport(
        observers=obs,
        mode=mode,
        variant=variant,
        engine=engine,
        tolerance=tolerance,
        total=total,
        pairs=results,
        params={
            "num_users": params.num_users,
            "num_files": params.num_files,
            "rep_factor": params.rep_factor,
            "file_bits": params.file_bits,
        },
    )


def audit_privacy(
    params: SchemeParams,
    library: Library,
    user: int,
    **kwargs,
) -> AuditReport:
    """Single-observer audit: can user k learn anything about the others'
    demands beyond their own?"""
    return audit_colluding(params, library, (user,), **kwargs)
