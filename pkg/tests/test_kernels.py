"""Backend parity: numba and numpy kernels must match bit for bit."""

import numpy as np
import pytest

from d2dpc import _kernels
from d2dpc.combinatorics import derive_stream
from d2dpc.errors import InvalidParameter
from d2dpc.placement import random_library, validate_params
from d2dpc.privacy_audit import (
    _demand_tables,
    _instance_tables,
    canonical_transcript,
    pack_transcript,
    plan_layout,
    run_with_tape,
    sample_tapes,
    tape_arrays_to_record,
)


def test_resolve_backend(monkeypatch):
    monkeypatch.delenv("D2DPC_BACKEND", raising=False)
    assert _kernels.resolve_backend() in ("numba", "numpy")
    assert _kernels.resolve_backend("numpy") == "numpy"
    monkeypatch.setenv("D2DPC_BACKEND", "numpy")
    assert _kernels.resolve_backend() == "numpy"
    monkeypatch.setenv("D2DPC_BACKEND", "bogus")
    with pytest.raises(InvalidParameter):
        _kernels.resolve_backend()


def test_gf2_rref_known_system():
    # x0 ^ x1 = 1, x1 = 1, x0 ^ x1 (dup) = 1 -> x0 = 0, x1 = 1
    aug = np.array(
        [
            [1, 1, 1],
            [0, 1, 1],
            [1, 1, 1],
        ],
        dtype=np.uint8,
    )
    pivots = _kernels.gf2_rref(aug, 2, backend="numpy")
    assert pivots.tolist() == [0, 1, -1]
    assert aug[:2].tolist() == [[1, 0, 0], [0, 1, 1]]
    determined = _kernels.gf2_determined(aug, pivots, 2)
    assert determined == [(0, 0), (1, 1)]


def test_gf2_rref_backend_parity_random():
    rng = np.random.default_rng(12)
    for _ in range(40):
        rows = int(rng.integers(1, 40))
        cols = int(rng.integers(1, 40))
        extra = int(rng.integers(1, 5))
        aug = rng.integers(0, 2, size=(rows, cols + extra), dtype=np.uint8)
        a, b = aug.copy(), aug.copy()
        pa = _kernels.gf2_rref(a, cols, backend="numba")
        pb = _kernels.gf2_rref(b, cols, backend="numpy")
        assert np.array_equal(a, b)
        assert np.array_equal(pa, pb)


def test_gf2_rref_rejects_bad_input():
    with pytest.raises(InvalidParameter):
        _kernels.gf2_rref(np.zeros((2, 2), dtype=np.int64), 2)
    with pytest.raises(InvalidParameter):
        _kernels.gf2_rref(np.zeros((2, 2), dtype=np.uint8), 3)


def test_first_occurrence_names():
    seq = np.array([[7, 3, 7, 9, 3, 7], [1, 1, 2, 0, 2, 5]], dtype=np.int64)
    names = _kernels._first_occurrence_names(seq)
    assert names.tolist() == [[0, 1, 0, 2, 1, 0], [0, 0, 1, 2, 1, 3]]
    assert _kernels._first_occurrence_names(np.zeros((3, 0), dtype=np.int64)).shape == (3, 0)


def _audit_setup(observers, demands, variant="honest"):
    params = validate_params(2, 3, 2, 6)
    library = random_library(params, 3)
    layout = plan_layout(params, len(observers), variant == "disclosed")
    tables = _instance_tables(params, library, observers)
    tables.update(_demand_tables(params, demands))
    return params, library, layout, tables


@pytest.mark.parametrize("variant", ["honest", "disclosed"])
@pytest.mark.parametrize("observers", [(1,), (2,), (1, 2)])
def test_audit_rows_backend_parity(observers, variant):
    params, library, layout, tables = _audit_setup(observers, (1, 2), variant)
    rng = derive_stream(0, ("test", "parity")).generator
    tapes = sample_tapes(params, 400, rng, variant)
    rows_nb = _kernels.audit_rows(
        *tapes, tables, layout.f_word, layout.f_shift, layout.n_words,
        variant == "disclosed", backend="numba",
    )
    rows_np = _kernels.audit_rows(
        *tapes, tables, layout.f_word, layout.f_shift, layout.n_words,
        variant == "disclosed", backend="numpy",
    )
    assert np.array_equal(rows_nb, rows_np)


@pytest.mark.parametrize("variant", ["honest", "disclosed"])
def test_audit_rows_match_reference_packer(variant):
    # kernels vs the object-level pipeline, same tapes, byte for byte
    observers = (1,)
    demands = (2, 3)
    params, library, layout, tables = _audit_setup(observers, demands, variant)
    rng = derive_stream(1, ("test", "pack")).generator
    tapes = sample_tapes(params, 60, rng, variant)
    rows = _kernels.audit_rows(
        *tapes, tables, layout.f_word, layout.f_shift, layout.n_words,
        variant == "disclosed", backend="numba",
    )
    for row in range(60):
        tape = tape_arrays_to_record(params, *tapes, row)
        caches, signals = run_with_tape(params, library, demands, tape)
        shown = tape if variant == "disclosed" else None
        transcript = canonical_transcript(params, caches, signals, observers, shown)
        packed = pack_transcript(transcript, params, len(observers), layout)
        assert packed == rows[row].tobytes()
