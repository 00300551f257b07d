"""Open-addressing probe loops for the int64 voxel-key hash tables.

Tables are power-of-two sized with linear probing and a splitmix64-style
bit mixer. Keys are non-negative packed coordinate triples; the empty
slot sentinel is -1.
"""

import numpy as np

from . import JIT_ENABLED, njit

EMPTY = np.int64(-1)

_MIX_A = 0x9E3779B97F4A7C15
_MIX_B = 0xBF58476D1CE4E5B9
_MIX_C = 0x94D049BB133111EB
_U64 = 0xFFFFFFFFFFFFFFFF


@njit(cache=True)
def _mix_scalar(key):
    z = np.uint64(key) + np.uint64(_MIX_A)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX_B)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX_C)
    return z ^ (z >> np.uint64(31))


def _mix_u64(z):
    """Vectorized splitmix64 finalizer over a uint64 array."""
    z = z + np.uint64(_MIX_A)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX_B)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX_C)
    return z ^ (z >> np.uint64(31))


def _mix_py(key: int) -> int:
    z = (key + _MIX_A) & _U64
    z = ((z ^ (z >> 30)) * _MIX_B) & _U64
    z = ((z ^ (z >> 27)) * _MIX_C) & _U64
    return z ^ (z >> 31)


@njit(cache=True)
def lookup_rows_numba(table_keys, table_vals, keys):
    n = keys.shape[0]
    mask = np.uint64(table_keys.shape[0] - 1)
    rows = np.full(n, -1, np.int64)
    for i in range(n):
        k = keys[i]
        j = np.int64(_mix_scalar(k) & mask)
        while True:
            cur = table_keys[j]
            if cur == k:
                rows[i] = table_vals[j]
                break
            if cur == EMPTY:
                break
            j = np.int64((np.uint64(j) + np.uint64(1)) & mask)
    return rows


def lookup_rows_numpy(table_keys, table_vals, keys):
    n = keys.shape[0]
    mask = np.uint64(table_keys.shape[0] - 1)
    rows = np.full(n, -1, np.int64)
    slots = (_mix_u64(keys.astype(np.uint64)) & mask).astype(np.int64)
    pending = np.arange(n)
    while pending.size:
        cur = table_keys[slots[pending]]
        hit = cur == keys[pending]
        if hit.any():
            found = pending[hit]
            rows[found] = table_vals[slots[found]]
        alive = ~(hit | (cur == EMPTY))
        pending = pending[alive]
        if pending.size:
            slots[pending] = ((slots[pending].astype(np.uint64) + np.uint64(1)) & mask).astype(np.int64)
    return rows


@njit(cache=True)
def insert_rows_numba(table_keys, table_vals, keys, rows, next_row):
    mask = np.uint64(table_keys.shape[0] - 1)
    for i in range(keys.shape[0]):
        k = keys[i]
        j = np.int64(_mix_scalar(k) & mask)
        while True:
            cur = table_keys[j]
            if cur == k:
                rows[i] = table_vals[j]
                break
            if cur == EMPTY:
                table_keys[j] = k
                table_vals[j] = next_row
                rows[i] = next_row
                next_row += 1
                break
            j = np.int64((np.uint64(j) + np.uint64(1)) & mask)
    return next_row


def insert_rows_numpy(table_keys, table_vals, keys, rows, next_row):
    # Insertion is sequential by nature; a plain loop is fine since it
    # runs once per frame on deduplicated keys, not per training batch.
    mask = table_keys.shape[0] - 1
    next_row = int(next_row)
    for i in range(keys.shape[0]):
        k = int(keys[i])
        j = _mix_py(k) & mask
        while True:
            cur = table_keys[j]
            if cur == k:
                rows[i] = table_vals[j]
                break
            if cur == EMPTY:
                table_keys[j] = k
                table_vals[j] = next_row
                rows[i] = next_row
                next_row += 1
                break
            j = (j + 1) & mask
    return next_row


if JIT_ENABLED:
    lookup_rows = lookup_rows_numba
    insert_rows = insert_rows_numba
else:
    lookup_rows = lookup_rows_numpy
    insert_rows = insert_rows_numpy
