"""Compare the numba and numpy kernel backends.

Times GF(2) elimination on random decode-sized systems and the audit
batch kernel on sampled tapes. Run from the repository root:

    python3 benchmarks/bench_kernels.py [--rows 400] [--cols 360] [--samples 2000000]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from d2dpc import _kernels
from d2dpc.combinatorics import derive_stream
from d2dpc.placement import random_library, validate_params
from d2dpc.privacy_audit import (
    _demand_tables,
    _instance_tables,
    plan_layout,
    sample_tapes,
)


def bench_gf2(rows: int, cols: int, repeats: int) -> dict:
    rng = np.random.default_rng(7)
    systems = [
        np.concatenate(
            [
                rng.integers(0, 2, size=(rows, cols), dtype=np.uint8),
                rng.integers(0, 2, size=(rows, 1), dtype=np.uint8),
            ],
            axis=1,
        )
        for _ in range(repeats)
    ]
    out = {}
    for backend in ("numba", "numpy"):
        _kernels.gf2_rref(systems[0].copy(), cols, backend=backend)  # warm JIT
        t0 = time.perf_counter()
        for aug in systems:
            _kernels.gf2_rref(aug.copy(), cols, backend=backend)
        out[backend] = (time.perf_counter() - t0) / repeats
    return out


def bench_audit(samples: int, chunk: int) -> dict:
    params = validate_params(2, 3, 2, 6)
    library = random_library(params, 3)
    observers = (1,)
    layout = plan_layout(params, len(observers), False)
    tables = _instance_tables(params, library, observers)
    tables.update(_demand_tables(params, (1, 2)))
    out = {}
    for backend in ("numba", "numpy"):
        rng = derive_stream(0, ("bench",)).generator
        warm = sample_tapes(params, 256, rng, "honest")
        _kernels.audit_rows(
            *warm, tables, layout.f_word, layout.f_shift, layout.n_words, False,
            backend=backend,
        )
        done = 0
        spent = 0.0
        while done < samples:
            m = min(chunk, samples - done)
            tapes = sample_tapes(params, m, rng, "honest")
            t0 = time.perf_counter()
            _kernels.audit_rows(
                *tapes, tables, layout.f_word, layout.f_shift, layout.n_words,
                False, backend=backend,
            )
            spent += time.perf_counter() - t0
            done += m
        out[backend] = samples / spent
    return out


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=400)
    parser.add_argument("--cols", type=int, default=360)
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--samples", type=int, default=2_000_000)
    parser.add_argument("--chunk", type=int, default=1 << 18)
    args = parser.parse_args()

    gf2 = bench_gf2(args.rows, args.cols, args.repeats)
    print(f"gf2_rref {args.rows}x{args.cols}:")
    for backend, sec in gf2.items():
        print(f"  {backend:6s} {sec * 1e3:8.2f} ms/solve")
    print(f"  speedup numba/numpy: {gf2['numpy'] / gf2['numba']:.1f}x")

    audit = bench_audit(args.samples, args.chunk)
    print(f"audit_rows (2,3,2), {args.samples} tapes:")
    for backend, rate in audit.items():
        print(f"  {backend:6s} {rate / 1e6:8.2f} M tapes/s")
    print(f"  speedup numba/numpy: {audit['numba'] / audit['numpy']:.1f}x")


if __name__ == "__main__":
    main()
