"""Marching-cubes cell classification and triangle emission.

Classification is a vectorized gather; the per-cell triangle emission is
the loop-heavy part and exists in both lanes. Output ordering is fixed
(ascending cell id, table order within a cell) so meshes are identical
across lanes.
"""

import numpy as np

from . import JIT_ENABLED, njit
from .mc_tables import CASE_EDGES, CASE_TRIANGLES, EDGE_CORNERS, MC_CORNERS

# triangles per case, derived from the table
N_TRIS = (CASE_TRIANGLES >= 0).sum(axis=1) // 3

# every cell edge runs along one axis from a base corner
_a = MC_CORNERS[EDGE_CORNERS[:, 0]]
_b = MC_CORNERS[EDGE_CORNERS[:, 1]]
EDGE_AXIS = np.argmax(np.abs(_a - _b), axis=1)
EDGE_BASE = np.minimum(_a, _b)


def classify_cells(values, valid):
    """Flat ids + case index of cells that are valid and cut the surface.

    A corner is inside when its value < 0; bit i of the case index is
    corner v_i's inside flag. Cells with any invalid corner, or case
    0/255, are dropped.
    """
    nx, ny, nz = values.shape
    if min(nx, ny, nz) < 2:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    inside = values < 0.0

    def corner_block(arr, c):
        dx, dy, dz = MC_CORNERS[c]
        return arr[dx : nx - 1 + dx, dy : ny - 1 + dy, dz : nz - 1 + dz]

    case = np.zeros((nx - 1, ny - 1, nz - 1), dtype=np.int64)
    ok = np.ones((nx - 1, ny - 1, nz - 1), dtype=bool)
    for c in range(8):
        case |= corner_block(inside, c).astype(np.int64) << c
        ok &= corner_block(valid, c)
    keep = ok & (case > 0) & (case < 255)
    cell_ids = np.flatnonzero(keep.ravel())
    return cell_ids, case.ravel()[cell_ids]


@njit(cache=True)
def emit_triangles_numba(cases, tri_table, counts, offsets, out_cell, out_edges):
    for i in range(cases.shape[0]):
        c = cases[i]
        o = offsets[i]
        for t in range(counts[i]):
            out_cell[o + t] = i
            out_edges[o + t, 0] = tri_table[c, 3 * t]
            out_edges[o + t, 1] = tri_table[c, 3 * t + 1]
            out_edges[o + t, 2] = tri_table[c, 3 * t + 2]


def emit_triangles_numpy(cases, tri_table, counts, offsets, out_cell, out_edges):
    rows = tri_table[cases]
    out_edges[:] = rows[rows >= 0].reshape(-1, 3)
    out_cell[:] = np.repeat(np.arange(cases.shape[0]), counts)


if JIT_ENABLED:
    emit_triangles = emit_triangles_numba
else:
    emit_triangles = emit_triangles_numpy


def emit(cases):
    """Triangle (local cell index, edge triple) arrays for cut cells."""
    counts = N_TRIS[cases]
    total = int(counts.sum())
    offsets = np.zeros(cases.shape[0], dtype=np.int64)
    np.cumsum(counts[:-1], out=offsets[1:])
    out_cell = np.empty(total, dtype=np.int64)
    out_edges = np.empty((total, 3), dtype=np.int64)
    emit_triangles(cases, CASE_TRIANGLES, counts, offsets, out_cell, out_edges)
    return out_cell, out_edges
