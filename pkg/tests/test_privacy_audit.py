"""Privacy audits: tape spaces, view distributions, and distances."""

from fractions import Fraction

import numpy as np
import pytest

from d2dpc.errors import BudgetExceeded, InvalidParameter
from d2dpc.placement import random_library, validate_params
from d2dpc.privacy_audit import (
    ViewDistribution,
    audit_colluding,
    audit_privacy,
    comparable_pairs,
    demand_vectors,
    enumerate_randomness,
    run_with_tape,
    tape_arrays_to_record,
    tape_count,
    tapes_from_indices,
    tv_distance,
    view_distribution,
)


def _instance(num_users, num_files, rep, file_bits=None, lib_seed=0):
    if file_bits is None:
        params = validate_params(num_users, num_files, rep, 1)
        file_bits = 0  # unreachable; validate_params(B=1) raises first
    params = validate_params(num_users, num_files, rep, file_bits)
    return params, random_library(params, lib_seed)


def test_tape_counts():
    # (P!)^(N*K) placements * (U!)^K relabels * (K-1)^(N*K) leader choices
    assert tape_count(validate_params(2, 2, 1, 2)) == 4
    assert tape_count(validate_params(2, 2, 2, 4)) == 64
    assert tape_count(validate_params(2, 3, 2, 6)) == 1_679_616
    assert tape_count(validate_params(3, 2, 1, 3)) == 884_736
    # disclosed variant freezes everything except the placement permutations
    assert tape_count(validate_params(2, 2, 2, 4), "disclosed") == 16
    assert tape_count(validate_params(2, 3, 2, 6), "disclosed") == 46_656


def test_enumerate_covers_the_tape_space():
    params = validate_params(2, 2, 2, 4)
    tapes = list(enumerate_randomness(params, budget=100))
    assert len(tapes) == 64
    assert len(set(map(repr, tapes))) == 64
    for tape in tapes[:4]:
        for (i, k), perm in tape.perms.items():
            assert sorted(perm) == list(params.block_range(k))


def test_enumerate_respects_budget():
    params = validate_params(2, 3, 2, 6)
    with pytest.raises(BudgetExceeded):
        list(enumerate_randomness(params))  # 1679616 > default 1000000


def test_mixed_radix_indexing_matches_enumeration_order():
    params = validate_params(2, 2, 2, 4)
    tapes = list(enumerate_randomness(params, budget=100))
    pp, qq, cc = tapes_from_indices(params, np.arange(64), "honest")
    assert [tape_arrays_to_record(params, pp, qq, cc, i) for i in range(64)] == tapes


def test_run_with_tape_is_deterministic():
    params, library = _instance(2, 2, 1, 2)
    tapes = list(enumerate_randomness(params, budget=10))
    assert len(tapes) == 4
    for tape in tapes:
        caches_a, signals_a = run_with_tape(params, library, (1, 2), tape)
        caches_b, signals_b = run_with_tape(params, library, (1, 2), tape)
        blob = lambda sigs: [
            (s.sender, [(m.position_set, m.composition, m.payload.tobytes()) for m in s.messages])
            for s in sigs
        ]
        assert blob(signals_a) == blob(signals_b)


def test_demand_vectors_and_comparable_pairs():
    params = validate_params(2, 3, 2, 6)
    vectors = demand_vectors(params)
    assert len(vectors) == 9
    assert vectors[0] == (1, 1) and vectors[-1] == (3, 3)
    # observer 1 fixes its own demand: 3 groups of 3 vectors, 3 pairs each
    assert len(comparable_pairs(params, (1,))) == 9
    # both users observing leaves nothing to compare
    assert comparable_pairs(params, (1, 2)) == []


def test_check_observers_rejections():
    params = validate_params(2, 2, 1, 2)
    with pytest.raises(InvalidParameter):
        comparable_pairs(params, ())
    with pytest.raises(InvalidParameter):
        comparable_pairs(params, (0,))
    with pytest.raises(InvalidParameter):
        comparable_pairs(params, (3,))


def test_exhaustive_raw_views_identically_distributed():
    params, library = _instance(2, 2, 2, 4)
    report = audit_colluding(params, library, (1,), mode="exhaustive")
    assert report.mode == "exhaustive"
    assert report.tolerance == Fraction(0)
    assert report.total == 64
    assert len(report.pairs) == 2
    assert report.all_ok
    assert report.max_distance == Fraction(0)
    assert all(isinstance(p.distance, Fraction) for p in report.pairs)


def test_exhaustive_kernel_agrees_on_exact_equality():
    params, library = _instance(2, 2, 2, 4)
    report = audit_colluding(params, library, (1,), mode="exhaustive", engine="kernel")
    assert report.all_ok and report.max_distance == 0
    # canonical transcripts quotient the raw views without merging demands
    d_raw = view_distribution(params, library, (1, 2), (1,), "exhaustive")
    d_ker = view_distribution(params, library, (1, 2), (1,), "exhaustive", engine="kernel")
    assert d_raw.total == d_ker.total == 64
    assert len(d_raw.counts) == 64  # every raw view distinct here
    assert len(d_ker.counts) == 16


def test_disclosed_variant_leaks_exhaustively():
    params, library = _instance(2, 2, 2, 4)
    report = audit_colluding(
        params, library, (1,), mode="exhaustive", variant="disclosed"
    )
    assert report.total == 16
    assert not report.all_ok
    # revealed permutations plus identity relabel pin the demand exactly
    assert report.max_distance == Fraction(1)


def test_disclosed_variant_leaks_in_sampled_mode():
    params, library = _instance(2, 2, 2, 4)
    report = audit_colluding(
        params, library, (1,), mode="sampled", samples=3000, variant="disclosed"
    )
    assert not report.all_ok
    assert float(report.max_distance) >= 0.2


def test_sampled_kernel_within_tolerance_and_deterministic():
    params, library = _instance(2, 2, 1, 2, lib_seed=3)
    reports = [
        audit_colluding(params, library, (1,), mode="sampled", samples=20_000, seed=11)
        for _ in range(2)
    ]
    for report in reports:
        assert report.engine == "kernel"
        assert report.all_ok
        assert float(report.max_distance) <= 0.02
    assert [p.distance for p in reports[0].pairs] == [p.distance for p in reports[1].pairs]
    other = audit_colluding(params, library, (1,), mode="sampled", samples=20_000, seed=12)
    assert [p.distance for p in other.pairs] != [p.distance for p in reports[0].pairs]


def test_sampled_reference_engine_agrees_with_kernel():
    params, library = _instance(2, 2, 1, 2, lib_seed=3)
    kernel = view_distribution(
        params, library, (1, 2), (1,), "sampled", samples=5_000, seed=2, engine="kernel"
    )
    reference = view_distribution(
        params, library, (1, 2), (1,), "sampled", samples=5_000, seed=2,
        engine="reference", packed=True,
    )
    assert kernel.counts == reference.counts


def test_auto_mode_picks_by_tape_count():
    small, lib_small = _instance(2, 2, 1, 2)
    assert audit_colluding(small, lib_small, (1,)).mode == "exhaustive"
    big, lib_big = _instance(2, 3, 2, 6)
    report = audit_colluding(big, lib_big, (1,), samples=2_000)
    assert report.mode == "sampled"
    assert report.total == 2_000


def test_audit_privacy_is_single_observer_collusion():
    params, library = _instance(2, 2, 2, 4)
    single = audit_privacy(params, library, 1, mode="exhaustive")
    colluding = audit_colluding(params, library, (1,), mode="exhaustive")
    assert [(p.demands_a, p.demands_b, p.distance) for p in single.pairs] == [
        (p.demands_a, p.demands_b, p.distance) for p in colluding.pairs
    ]


def test_full_collusion_is_vacuous():
    params, library = _instance(2, 2, 2, 4)
    report = audit_colluding(params, library, (1, 2), mode="exhaustive")
    assert report.pairs == []
    assert report.all_ok


def test_report_to_dict_shape():
    params, library = _instance(2, 2, 2, 4)
    doc = audit_colluding(params, library, (2,), mode="exhaustive").to_dict()
    assert doc["verdict"] == "PASS"
    assert doc["observers"] == [2]
    assert doc["total"] == 64
    assert all(p["verdict"] == "PASS" and p["distance"] == 0.0 for p in doc["pairs"])


def test_kernel_guard_requires_single_bit_pieces():
    params, library = _instance(2, 2, 1, 4)  # piece_bits = 2
    with pytest.raises(InvalidParameter):
        view_distribution(
            params, library, (1, 2), (1,), "sampled", samples=10, engine="kernel"
        )
    # auto engine falls back to the reference path instead
    dist = view_distribution(params, library, (1, 2), (1,), "sampled", samples=50, seed=0)
    assert dist.total == 50


def test_view_distribution_argument_validation():
    params, library = _instance(2, 2, 1, 2)
    with pytest.raises(InvalidParameter):
        view_distribution(params, library, (1, 2), (1,), "bogus")
    with pytest.raises(InvalidParameter):
        view_distribution(params, library, (1, 2), (1,), "sampled", variant="evil")
    with pytest.raises(InvalidParameter):
        view_distribution(params, library, (1, 2), (1,), "sampled", engine="gpu")
    with pytest.raises(InvalidParameter):
        view_distribution(params, library, (1, 2), (1,), "sampled", key="sha1")
    with pytest.raises(InvalidParameter):
        view_distribution(params, library, (1, 3), (1,), "sampled")  # bad demand


def test_tv_distance_edge_cases():
    exact = lambda counts, total: ViewDistribution("exact", counts, total)
    with pytest.raises(InvalidParameter):
        tv_distance(exact({b"x": 1}, 1), ViewDistribution("empirical", {b"x": 1}, 1))
    with pytest.raises(InvalidParameter):
        tv_distance(exact({}, 0), exact({}, 0))
    # equal distributions at different resolutions
    assert tv_distance(exact({b"x": 2, b"y": 2}, 4), exact({b"x": 1, b"y": 1}, 2)) == 0
    assert tv_distance(exact({b"x": 3, b"y": 1}, 4), exact({b"x": 1, b"y": 3}, 4)) == Fraction(1, 2)
    assert tv_distance(exact({b"x": 1}, 1), exact({b"y": 1}, 1)) == 1
