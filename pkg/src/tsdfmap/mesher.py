"""Dense SDF evaluation on a uniform grid and mesh extraction.

The learned field is sampled at grid nodes (nodes in unallocated voxels
are masked invalid rather than guessed), then marching cubes walks the
valid cells: one welded vertex per cut edge at the linear zero crossing,
triangles from the classic 256-case table. Triangle winding puts
normals on the positive-value side, i.e. outward for a signed distance
field.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EmptyMap, NoSurface
from .kernels.march import EDGE_AXIS, EDGE_BASE, classify_cells, emit


@dataclass
class SdfGrid:
    origin: np.ndarray  # (3,) world position of node (0,0,0)
    spacing: float
    values: np.ndarray  # (nx, ny, nz) float
    valid: np.ndarray  # (nx, ny, nz) bool

    @property
    def dims(self):
        return self.values.shape


@dataclass
class TriMesh:
    vertices: np.ndarray  # (v, 3)
    faces: np.ndarray  # (t, 3) int
    scalar: Optional[np.ndarray] = None  # optional per-vertex value

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]


def _node_grid(bounds, spacing):
    lo = np.asarray(bounds[0], dtype=np.float64).reshape(3)
    hi = np.asarray(bounds[1], dtype=np.float64).reshape(3)
    if np.any(hi <= lo):
        raise ValueError("bounds must satisfy max > min per axis")
    dims = np.maximum(2, np.floor((hi - lo) / spacing + 1e-9).astype(np.int64) + 1)
    axes = [lo[a] + spacing * np.arange(dims[a]) for a in range(3)]
    return lo, dims, axes


def eval_sdf_grid(field, bounds, spacing: float = 0.10, batch_size: int = 262144) -> SdfGrid:
    """Sample a neural field on a uniform node grid over bounds.

    Nodes whose enclosing voxels are unallocated at any level get
    valid=False and NaN values. Raises EmptyMap when nothing is valid.
    """
    lo, dims, axes = _node_grid(bounds, spacing)
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    valid = np.zeros(nodes.shape[0], dtype=bool)
    values = np.full(nodes.shape[0], np.nan)
    for s in range(0, nodes.shape[0], batch_size):
        chunk = nodes[s : s + batch_size]
        ok = field.grid.voxels_allocated(chunk)
        valid[s : s + batch_size] = ok
        if ok.any():
            preds, _ = field.predict(chunk[ok])
            idx = s + np.flatnonzero(ok)
            values[idx] = preds
    if not valid.any():
        raise EmptyMap("no grid node falls inside an allocated voxel")
    shape = tuple(dims)
    return SdfGrid(lo, float(spacing), values.reshape(shape), valid.reshape(shape))


def sdf_grid_from_function(fn, bounds, spacing: float = 0.10) -> SdfGrid:
    """SdfGrid from an analytic SDF callable over (n, 3) points."""
    lo, dims, axes = _node_grid(bounds, spacing)
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    values = np.asarray(fn(nodes), dtype=np.float64).reshape(-1)
    shape = tuple(dims)
    return SdfGrid(lo, float(spacing), values.reshape(shape),
                   np.ones(shape, dtype=bool))


def extract_mesh(grid: SdfGrid) -> TriMesh:
    """Marching cubes over the valid cells of an SdfGrid."""
    values, valid = grid.values, grid.valid
    nx, ny, nz = values.shape
    cell_ids, cases = classify_cells(values, valid)
    if cell_ids.size == 0:
        raise NoSurface("no sign change among fully valid cells")
    tri_cell, tri_edges = emit(cases)

    cx, cy, cz = np.unravel_index(cell_ids, (nx - 1, ny - 1, nz - 1))
    cell_coords = np.stack([cx, cy, cz], axis=1)  # (m, 3)
    # weld vertices on shared edges: key = base-node linear index * 3 + axis
    base = cell_coords[tri_cell][:, None, :] + EDGE_BASE[tri_edges]  # (t, 3, 3)
    axis = EDGE_AXIS[tri_edges]  # (t, 3)
    lin = (base[..., 0] * ny + base[..., 1]) * nz + base[..., 2]
    keys = lin * 3 + axis
    ukeys, inv = np.unique(keys.ravel(), return_inverse=True)
    faces = inv.reshape(-1, 3)

    uaxis = ukeys % 3
    ulin = ukeys // 3
    a = np.stack([ulin // (ny * nz), (ulin // nz) % ny, ulin % nz], axis=1)
    step = np.zeros((ukeys.shape[0], 3), dtype=np.int64)
    step[np.arange(ukeys.shape[0]), uaxis] = 1
    b = a + step
    va = values[a[:, 0], a[:, 1], a[:, 2]]
    vb = values[b[:, 0], b[:, 1], b[:, 2]]
    t = va / (va - vb)  # cut edges have strictly opposite inside flags
    verts = grid.origin + (a + t[:, None] * step) * grid.spacing

    # winding: the table's order comes out inward for value<0 interiors
    faces = faces[:, ::-1]

    p0, p1, p2 = verts[faces[:, 0]], verts[faces[:, 1]], verts[faces[:, 2]]
    cr = np.cross(p1 - p0, p2 - p0)
    area2 = np.einsum("ij,ij->i", cr, cr)
    dup = (
        (faces[:, 0] == faces[:, 1])
        | (faces[:, 1] == faces[:, 2])
        | (faces[:, 0] == faces[:, 2])
    )
    faces = faces[(~dup) & (area2 > 0.0)]
    if faces.shape[0] == 0:
        raise NoSurface("every candidate triangle was degenerate")
    used, faces_flat = np.unique(faces.ravel(), return_inverse=True)
    return TriMesh(vertices=verts[used], faces=faces_flat.reshape(-1, 3))


def map_bounds(field, pad: float = 0.0):
    """World bounds of the allocated map, optionally padded."""
    b = field.grid.bounds()
    if b is None:
        raise EmptyMap("the map has no allocated vertices")
    return b[0] - pad, b[1] + pad


def extract_map_mesh(field, spacing: float = 0.10, pad: float = 0.0) -> TriMesh:
    """Mesh the learned field over its allocated extent."""
    return extract_mesh(eval_sdf_grid(field, map_bounds(field, pad), spacing))


def write_mesh(mesh: TriMesh, path, binary: bool = True):
    from .plyio import write_mesh_ply

    write_mesh_ply(path, mesh.vertices, mesh.faces, binary=binary)


def load_mesh(path) -> TriMesh:
    from .plyio import load_ply

    data = load_ply(path)
    faces = data.get("faces")
    if faces is None:
        faces = np.zeros((0, 3), dtype=np.int64)
    return TriMesh(vertices=data["points"], faces=faces)
