#!/usr/bin/env python3
"""Time the compiled kernel lane against the pure-numpy fallback.

Both lanes of every hot kernel are imported explicitly (the njit
decorator is a no-op shim when TSDFMAP_NUMBA=0, so both variants are
always callable), timed on realistic workload shapes, and reported side
by side. Run as:

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from tsdfmap.kernels import JIT_ENABLED
from tsdfmap.kernels.hashkern import insert_rows_numba, insert_rows_numpy, \
    lookup_rows_numba, lookup_rows_numpy
from tsdfmap.kernels.march import classify_cells, emit_triangles_numba, \
    emit_triangles_numpy
from tsdfmap.kernels.mc_tables import CASE_TRIANGLES
from tsdfmap.kernels.scatter import adam_update_rows_numba, adam_update_rows_numpy, \
    scatter_add_rows_numba, scatter_add_rows_numpy
from tsdfmap.kernels.trace import trace_rays_numba, trace_rays_numpy


def timeit(fn, repeat):
    fn()  # warm up (and trigger JIT compilation)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_lookup(rng):
    cap = 1 << 20
    table_keys = np.full(cap, -1, dtype=np.int64)
    table_vals = np.zeros(cap, dtype=np.int64)
    keys = rng.choice(50_000_000, size=300_000, replace=False).astype(np.int64)
    rows = np.empty(keys.size, dtype=np.int64)
    insert_rows_numpy(table_keys, table_vals, keys, rows, 0)
    probe = np.concatenate([keys, keys + 1])  # half hits, (mostly) half misses
    return (lambda: lookup_rows_numba(table_keys, table_vals, probe),
            lambda: lookup_rows_numpy(table_keys, table_vals, probe))


def bench_insert(rng):
    keys = rng.choice(50_000_000, size=200_000, replace=False).astype(np.int64)
    rows = np.empty(keys.size, dtype=np.int64)

    def run(fn):
        table_keys = np.full(1 << 19, -1, dtype=np.int64)
        table_vals = np.zeros(1 << 19, dtype=np.int64)
        fn(table_keys, table_vals, keys, rows, 0)

    return (lambda: run(insert_rows_numba), lambda: run(insert_rows_numpy))


def bench_scatter(rng):
    rows = rng.integers(0, 200_000, size=16384 * 16).astype(np.int64)
    contrib = rng.standard_normal((rows.size, 8))
    out = np.zeros((200_000, 8))
    return (lambda: scatter_add_rows_numba(out, rows, contrib),
            lambda: scatter_add_rows_numpy(out, rows, contrib))


def bench_adam(rng):
    n = 200_000
    rows = np.sort(rng.choice(n, size=120_000, replace=False)).astype(np.int64)
    grad = rng.standard_normal((rows.size, 8))
    args = (0.01, 0.9, 0.999, 1e-8, 0.1, 0.001)

    def run(fn):
        param = np.zeros((n, 8))
        m = np.zeros((n, 8))
        v = np.zeros((n, 8))
        fn(param, m, v, grad, rows, *args)

    return (lambda: run(adam_update_rows_numba), lambda: run(adam_update_rows_numpy))


def bench_march(rng):
    ax = np.linspace(-1.2, 1.2, 64)
    X, Y, Z = np.meshgrid(ax, ax, ax, indexing="ij")
    values = np.sqrt(X**2 + Y**2 + Z**2) - 0.9 + 0.2 * np.sin(4 * X) * np.cos(3 * Y)
    _, cases = classify_cells(values, np.ones_like(values, dtype=bool))
    counts = (CASE_TRIANGLES[cases] >= 0).sum(axis=1) // 3
    offsets = np.zeros(cases.shape[0], dtype=np.int64)
    np.cumsum(counts[:-1], out=offsets[1:])
    total = int(counts.sum())
    out_cell = np.empty(total, dtype=np.int64)
    out_edges = np.empty((total, 3), dtype=np.int64)
    return (lambda: emit_triangles_numba(cases, CASE_TRIANGLES, counts, offsets,
                                         out_cell, out_edges),
            lambda: emit_triangles_numpy(cases, CASE_TRIANGLES, counts, offsets,
                                         out_cell, out_edges))


def bench_trace(rng):
    types = np.array([2, 2, 2, 2, 2, 2, 0], dtype=np.int8)
    params = np.zeros((7, 6))
    for i, (n, off) in enumerate([((1, 0, 0), -6), ((-1, 0, 0), -6),
                                  ((0, 1, 0), -6), ((0, -1, 0), -6),
                                  ((0, 0, 1), 0), ((0, 0, -1), -6)]):
        params[i, :3] = n
        params[i, 3] = off
    params[6, :4] = [0.0, 0.0, 3.0, 2.0]
    d = rng.standard_normal((8192, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    o = np.ascontiguousarray(np.tile([4.5, 0.0, 3.0], (8192, 1)))
    d = np.ascontiguousarray(d)
    return (lambda: trace_rays_numba(o, d, types, params, 30.0, 1e-5, 256),
            lambda: trace_rays_numpy(o, d, types, params, 30.0, 1e-5, 256))


BENCHES = [
    ("hash lookup (600k probes)", bench_lookup),
    ("hash insert (200k keys)", bench_insert),
    ("gradient scatter-add (262k rows)", bench_scatter),
    ("sparse adam update (120k rows)", bench_adam),
    ("triangle emission (64^3 grid)", bench_march),
    ("sphere tracing (8192 rays)", bench_trace),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5,
                    help="timing repetitions per kernel (best is reported)")
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    lane = "compiled" if JIT_ENABLED else "njit disabled (shim)"
    print(f"numba lane: {lane}")
    print(f"{'kernel':<36} {'numba':>10} {'numpy':>10} {'speedup':>8}")
    for name, setup in BENCHES:
        f_nb, f_np = setup(rng)
        t_nb = timeit(f_nb, args.repeat)
        t_np = timeit(f_np, args.repeat)
        print(f"{name:<36} {t_nb * 1e3:>8.2f}ms {t_np * 1e3:>8.2f}ms "
              f"{t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
