"""Hot numeric kernels with numba and pure-numpy twins.

Two code paths implement each kernel: a numba @njit loop and a
vectorized numpy fallback. Selection order: explicit argument, the
D2DPC_BACKEND environment variable ("numba" or "numpy"), then numba
when importable. Both paths are bit-identical; tests enforce parity.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import InvalidParameter

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


def resolve_backend(backend=None) -> str:
    """Pick the kernel implementation: argument, env var, then autodetect."""
    choice = backend or os.environ.get("D2DPC_BACKEND", "").lower() or None
    if choice is None:
        return "numba" if HAS_NUMBA else "numpy"
    if choice not in ("numba", "numpy"):
        raise InvalidParameter(f"unknown backend {choice!r}, expected numba or numpy")
    if choice == "numba" and not HAS_NUMBA:
        raise InvalidParameter("backend numba requested but numba is not importable")
    return choice


@njit(cache=True)
def _gf2_rref_numba(aug, active):  # pragma: no cover - measured via parity tests
    rows, cols = aug.shape
    pivot_col = np.full(rows, -1, dtype=np.int64)
    r = 0
    for c in range(active):
        if r >= rows:
            break
        piv = -1
        for i in range(r, rows):
            if aug[i, c]:
                piv = i
                break
        if piv < 0:
            continue
        if piv != r:
            for j in range(cols):
                tmp = aug[r, j]
                aug[r, j] = aug[piv, j]
                aug[piv, j] = tmp
        for i in range(rows):
            if i != r and aug[i, c]:
                for j in range(cols):
                    aug[i, j] ^= aug[r, j]
        r += 1
        pivot_col[r - 1] = c
    return pivot_col


def _gf2_rref_numpy(aug, active):
    rows, _ = aug.shape
    pivot_col = np.full(rows, -1, dtype=np.int64)
    r = 0
    for c in range(active):
        if r >= rows:
            break
        hits = np.nonzero(aug[r:, c])[0]
        if hits.size == 0:
            continue
        piv = r + int(hits[0])
        if piv != r:
            aug[[r, piv]] = aug[[piv, r]]
        mask = aug[:, c].astype(bool).copy()
        mask[r] = False
        aug[mask] ^= aug[r]
        pivot_col[r] = c
        r += 1
    return pivot_col


def gf2_rref(aug: np.ndarray, active: int, backend=None) -> np.ndarray:
    """In-place reduced row echelon form over GF(2).

    Eliminates over columns [0, active); remaining columns ride along as
    the right-hand side. Returns per-row pivot column indices (-1 for
    zero rows), rows ordered by pivot column.
    """
    if aug.dtype != np.uint8 or aug.ndim != 2:
        raise InvalidParameter("augmented matrix must be 2-D uint8")
    if not 0 <= active <= aug.shape[1]:
        raise InvalidParameter(f"active column count {active} outside matrix width")
    if resolve_backend(backend) == "numba":
        return _gf2_rref_numba(aug, active)
    return _gf2_rref_numpy(aug, active)


@njit(cache=True)
def _audit_rows_numba(
    pp,
    qq,
    cc,
    ids0,
    idpos,
    effd0,
    dem0,
    wmem_ord,
    rankmask,
    pos_subsets,
    filebits,
    blocksum,
    obs0,
    f_word,
    f_shift,
    disclose,
    out,
):  # pragma: no cover - measured via parity tests
    n, n_files, n_users, block = pp.shape
    n_eff = qq.shape[2]
    n_sub, rep = pos_subsets.shape
    n_obs = obs0.shape[0]
    pinv = np.empty((n_files, n_users, block), dtype=np.int64)
    leadmask = np.zeros((n_users, n_eff + 1), dtype=np.uint8)
    stamp = np.full(n_files * n_users * block, -1, dtype=np.int64)
    nameval = np.zeros(n_files * n_users * block, dtype=np.int64)
    for row in range(n):
        for i in range(n_files):
            for k in range(n_users):
                for j in range(block):
                    pinv[i, k, pp[row, i, k, j]] = j
        for k in range(n_users):
            for v in range(n_eff + 1):
                leadmask[k, v] = 0
            for i in range(n_files):
                leadmask[k, dem0[k, i, cc[row, k, i]]] = 1
        fi = 0
        # cache section: ones count of cached pieces per (observer, file, block)
        for oi in range(n_obs):
            o = obs0[oi]
            for i in range(n_files):
                for k in range(n_users):
                    if k == o:
                        cnt = int(blocksum[i, k])
                    else:
                        cnt = 0
                        op = idpos[k, o]
                        for e in range(block):
                            j = pinv[i, k, e]
                            if wmem_ord[j, op]:
                                cnt += filebits[i, k * block + e]
                    out[row, f_word[fi]] |= np.uint64(cnt) << np.uint64(f_shift[fi])
                    fi += 1
        # signal sections in emission order
        namecount = 0
        for k in range(n_users):
            for si in range(n_sub):
                smask = 0
                hit = False
                for tau in range(rep):
                    ordv = int(qq[row, k, pos_subsets[si, tau]])
                    smask |= 1 << ordv
                    if leadmask[k, ids0[k, ordv]]:
                        hit = True
                if not hit:
                    continue
                out[row, f_word[fi]] |= np.uint64(si) << np.uint64(f_shift[fi])
                fi += 1
                pay = 0
                for tau in range(rep):
                    ordv = int(qq[row, k, pos_subsets[si, tau]])
                    idv = ids0[k, ordv]
                    f = int(effd0[k, idv])
                    wmask = smask ^ (1 << ordv)
                    j = int(rankmask[wmask])
                    e = int(pp[row, f, k, j])
                    out[row, f_word[fi]] |= np.uint64(f) << np.uint64(f_shift[fi])
                    fi += 1
                    flags = 0
                    for oj in range(n_obs):
                        o = obs0[oj]
                        if o == k or wmem_ord[j, idpos[k, o]]:
                            flags |= 1 << oj
                    out[row, f_word[fi]] |= np.uint64(flags) << np.uint64(f_shift[fi])
                    fi += 1
                    g = (f * n_users + k) * block + e
                    if stamp[g] != row:
                        stamp[g] = row
                        nameval[g] = namecount
                        namecount += 1
                    out[row, f_word[fi]] |= np.uint64(nameval[g]) << np.uint64(f_shift[fi])
                    fi += 1
                    pay ^= filebits[f, k * block + e]
                out[row, f_word[fi]] |= np.uint64(pay) << np.uint64(f_shift[fi])
                fi += 1
        if disclose:
            for i in range(n_files):
                for k in range(n_users):
                    for j in range(block):
                        out[row, f_word[fi]] |= np.uint64(pp[row, i, k, j]) << np.uint64(
                            f_shift[fi]
                        )
                        fi += 1


def _first_occurrence_names(seq: np.ndarray) -> np.ndarray:
    """Per row: rename values to 0,1,2,... in order of first occurrence."""
    n, width = seq.shape
    if width == 0:
        return np.zeros((n, 0), dtype=np.int64)
    order = np.argsort(seq, axis=1, kind="stable")
    sorted_seq = np.take_along_axis(seq, order, axis=1)
    first = np.ones((n, width), dtype=bool)
    first[:, 1:] = sorted_seq[:, 1:] != sorted_seq[:, :-1]
    pos = np.arange(width, dtype=np.int64)[None, :]
    last_first = np.maximum.accumulate(np.where(first, pos, 0), axis=1)
    group_first_sorted = np.take_along_axis(order, last_first, axis=1)
    first_pos = np.empty_like(order)
    np.put_along_axis(first_pos, order, group_first_sorted, axis=1)
    is_first = np.zeros((n, width), dtype=bool)
    np.put_along_axis(is_first, order, first, axis=1)
    prefix = np.cumsum(is_first, axis=1)
    return np.take_along_axis(prefix, first_pos, axis=1) - 1


def _audit_rows_numpy(
    pp,
    qq,
    cc,
    ids0,
    idpos,
    effd0,
    dem0,
    wmem_ord,
    rankmask,
    pos_subsets,
    filebits,
    blocksum,
    obs0,
    f_word,
    f_shift,
    disclose,
    out,
):
    n, n_files, n_users, block = pp.shape
    n_sub, rep = pos_subsets.shape
    n_obs = obs0.shape[0]
    rows = np.arange(n)

    def emit(fi, values):
        out[:, f_word[fi]] |= values.astype(np.uint64) << np.uint64(f_shift[fi])

    fi = 0
    for oi in range(n_obs):
        o = int(obs0[oi])
        for i in range(n_files):
            for k in range(n_users):
                if k == o:
                    cnt = np.full(n, int(blocksum[i, k]), dtype=np.int64)
                else:
                    op = int(idpos[k, o])
                    pinv_ik = np.argsort(pp[:, i, k, :], axis=1)
                    cnt = np.zeros(n, dtype=np.int64)
                    for e in range(block):
                        j = pinv_ik[:, e]
                        cnt += wmem_ord[j, op].astype(np.int64) * int(filebits[i, k * block + e])
                emit(fi, cnt)
                fi += 1
    # per-sender message fields, then retained-selection, then naming
    n_ret = None
    sel_all, files_all, flags_all, names_g, pay_all = [], [], [], [], []
    for k in range(n_users):
        lead = dem0[k, np.arange(n_files)[None, :], cc[:, k, :]]  # (n, N) leader ids
        hitm = np.zeros((n, n_sub), dtype=bool)
        files_a = np.zeros((n, n_sub, rep), dtype=np.int64)
        flags_a = np.zeros((n, n_sub, rep), dtype=np.int64)
        g_a = np.zeros((n, n_sub, rep), dtype=np.int64)
        pay_a = np.zeros((n, n_sub), dtype=np.int64)
        for si in range(n_sub):
            ords = qq[:, k, pos_subsets[si]].astype(np.int64)  # (n, rep)
            smask = np.bitwise_or.reduce(1 << ords, axis=1)
            idv = ids0[k][ords]  # (n, rep)
            hitm[:, si] = (idv[:, :, None] == lead[:, None, :]).any(axis=(1, 2))
            pay = np.zeros(n, dtype=np.int64)
            for tau in range(rep):
                wmask = smask ^ (1 << ords[:, tau])
                j = rankmask[wmask].astype(np.int64)
                f = effd0[k][idv[:, tau]].astype(np.int64)
                e = pp[rows, f, k, j].astype(np.int64)
                files_a[:, si, tau] = f
                flags = np.zeros(n, dtype=np.int64)
                for oj in range(n_obs):
                    o = int(obs0[oj])
                    if o == k:
                        cached = np.ones(n, dtype=np.int64)
                    else:
                        cached = wmem_ord[j, int(idpos[k, o])].astype(np.int64)
                    flags |= cached << oj
                flags_a[:, si, tau] = flags
                g_a[:, si, tau] = (f * n_users + k) * block + e
                pay ^= filebits[f, k * block + e].astype(np.int64)
            pay_a[:, si] = pay
        ret = int(hitm[0].sum()) if n else 0
        if n and not (hitm.sum(axis=1) == ret).all():
            raise AssertionError("retained count varies across tapes")
        n_ret = ret if n_ret is None else n_ret
        sel = np.argsort(~hitm, axis=1, kind="stable")[:, :ret]  # (n, ret) srank0
        sel_all.append(sel)
        files_all.append(np.take_along_axis(files_a, sel[:, :, None], axis=1))
        flags_all.append(np.take_along_axis(flags_a, sel[:, :, None], axis=1))
        names_g.append(np.take_along_axis(g_a, sel[:, :, None], axis=1))
        pay_all.append(np.take_along_axis(pay_a, sel, axis=1))
    seq = (
        np.concatenate([g.reshape(n, -1) for g in names_g], axis=1)
        if names_g
        else np.zeros((n, 0), dtype=np.int64)
    )
    names = _first_occurrence_names(seq)
    cursor = 0
    for k in range(n_users):
        sel, files_k, flags_k, pay_k = sel_all[k], files_all[k], flags_all[k], pay_all[k]
        ret = sel.shape[1]
        for r in range(ret):
            emit(fi, sel[:, r])
            fi += 1
            for tau in range(rep):
                emit(fi, files_k[:, r, tau])
                fi += 1
                emit(fi, flags_k[:, r, tau])
                fi += 1
                emit(fi, names[:, cursor + r * rep + tau])
                fi += 1
            emit(fi, pay_k[:, r])
            fi += 1
        cursor += ret * rep
    if disclose:
        for i in range(n_files):
            for k in range(n_users):
                for j in range(block):
                    emit(fi, pp[:, i, k, j].astype(np.int64))
                    fi += 1


def audit_rows(
    pp,
    qq,
    cc,
    tables: dict,
    f_word: np.ndarray,
    f_shift: np.ndarray,
    n_words: int,
    disclose: bool,
    backend=None,
) -> np.ndarray:
    """Map a batch of randomness tapes to packed canonical-transcript rows.

    Both backends fill the same little-endian-within-word bit layout; rows
    from different backends for the same tapes are byte-identical.
    """
    n = pp.shape[0]
    out = np.zeros((n, n_words), dtype=np.uint64)
    args = (
        pp,
        qq,
        cc,
        tables["ids0"],
        tables["idpos"],
        tables["effd0"],
        tables["dem0"],
        tables["wmem_ord"],
        tables["rankmask"],
        tables["pos_subsets"],
        tables["filebits"],
        tables["blocksum"],
        tables["obs0"],
        f_word,
        f_shift,
        disclose,
        out,
    )
    if resolve_backend(backend) == "numba":
        _audit_rows_numba(*args)
    else:
        _audit_rows_numpy(*args)
    return out


def gf2_determined(aug: np.ndarray, pivot_col: np.ndarray, active: int) -> list[tuple[int, int]]:
    """After RREF: (column, row) pairs whose unknown is uniquely determined.

    A pivot row determines its unknown when no other active column is set
    in that row. Rows with empty active support but nonzero remainder mark
    an inconsistent system; callers detect that separately.
    """
    out = []
    for r in range(aug.shape[0]):
        c = pivot_col[r]
        if c < 0:
            continue
        row = aug[r, :active]
        if int(row.sum()) == 1:
            out.append((int(c), r))
    return out
