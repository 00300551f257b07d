"""Turn a posed LiDAR scan into truncated-SDF supervision samples.

Per ray with endpoint p and origin o (range ||r||, r = p - o):
  1 surface sample at depth ||r|| (label 0),
  n_front  at depth U(||r|| - trunc, ||r||),
  n_behind at depth U(||r||, ||r|| + trunc),
  n_free   at depth U(min_range, ||r|| - trunc)   (skipped for short rays).
Labels are the projective distance ||r|| - d clamped to [-trunc, +trunc],
so free-space samples sit exactly at +trunc. Each sample also carries the
generating ray's length and incidence cosine, from which the replay pool
scores reliability.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyScan
from .pool import ReliabilityParams, reliability_mse

# eigenvalue ratio below which a PCA neighborhood counts as degenerate
# (collinear or coincident points: the normal direction is ambiguous)
_DEGENERATE_RATIO = 1e-8


@dataclass
class Scan:
    """One posed scan: world-frame origin and endpoints."""

    origin: np.ndarray  # (3,)
    points: np.ndarray  # (n, 3) world frame
    frame_id: int = 0

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)


@dataclass
class SamplerConfig:
    n_front: int = 3
    n_behind: int = 1
    n_free: int = 2
    trunc_dist: float = 0.3
    min_range: float = 0.3
    normal_k: int = 20
    cos_eps: float = 1e-3
    downsample_voxel: float = 0.0  # 0 disables input decimation

    def __post_init__(self):
        if min(self.n_front, self.n_behind, self.n_free) < 0:
            raise ValueError("sample counts must be nonnegative")
        if not self.trunc_dist > 0:
            raise ValueError("trunc_dist must be positive")
        if not self.min_range > 0:
            raise ValueError("min_range must be positive")


@dataclass
class SampleBatch:
    """Columnar supervision samples (one row per sample)."""

    pos: np.ndarray  # (m, 3)
    label: np.ndarray  # (m,) in [-trunc, +trunc]
    ray_len: np.ndarray  # (m,) generating-ray length
    cos_inc: np.ndarray  # (m,) incidence cosine of the generating ray
    mse: np.ndarray  # (m,) reliability score (expected squared error)

    def __len__(self) -> int:
        return self.pos.shape[0]


def voxel_downsample(points, voxel_size, origin_shift=0.0):
    """Keep the first point per voxel (deterministic decimation)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    cells = np.floor((pts - origin_shift) / voxel_size).astype(np.int64)
    # lexicographic unique over rows, keeping first occurrence
    _, first = np.unique(cells, axis=0, return_index=True)
    return pts[np.sort(first)]


def estimate_normals(scan: Scan, k: int = 20):
    """PCA normals over k nearest neighbors, oriented toward the sensor.

    Returns (normals (n, 3), degenerate (n,) bool). Degenerate
    neighborhoods (collinear/coincident) fall back to the reversed ray
    direction and are flagged.
    """
    pts = scan.points
    n = pts.shape[0]
    if n == 0:
        raise EmptyScan("cannot estimate normals on an empty scan")
    to_sensor = scan.origin[None, :] - pts
    rng_len = np.linalg.norm(to_sensor, axis=1)
    fallback = to_sensor / np.maximum(rng_len, 1e-300)[:, None]

    if n < 3:
        return fallback.copy(), np.ones(n, dtype=bool)

    k_eff = min(k, n)
    tree = cKDTree(pts)
    _, idx = tree.query(pts, k=k_eff)
    neigh = pts[idx]  # (n, k, 3)
    centered = neigh - neigh.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / k_eff
    evals, evecs = np.linalg.eigh(cov)  # ascending eigenvalues
    normals = evecs[:, :, 0]

    degenerate = evals[:, 1] <= _DEGENERATE_RATIO * np.maximum(evals[:, 2], 1e-300)
    degenerate |= ~np.isfinite(normals).all(axis=1)
    # face the sensor: n . (o - p) >= 0
    flip = np.einsum("ni,ni->n", normals, to_sensor) < 0
    normals[flip] *= -1.0
    normals[degenerate] = fallback[degenerate]
    return normals, degenerate


def compute_incidence(rays, normals, cos_eps: float = 1e-3):
    """cos(theta) between ray and surface normal, clamped to [cos_eps, 1]."""
    rays = np.asarray(rays, dtype=np.float64).reshape(-1, 3)
    normals = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
    ray_len = np.linalg.norm(rays, axis=1)
    cos = np.abs(np.einsum("ni,ni->n", normals, rays)) / np.maximum(ray_len, 1e-300)
    return np.clip(cos, cos_eps, 1.0)


def generate_samples(
    scan: Scan, normals, cfg: SamplerConfig, rel: ReliabilityParams, rng
) -> SampleBatch:
    """Emit supervision samples for every ray of a scan.

    Sample order is fixed (surface block, then front, behind, free-space
    blocks, each ray-major), so a seeded rng reproduces batches exactly.
    """
    pts = scan.points
    if pts.shape[0] == 0:
        raise EmptyScan(f"frame {scan.frame_id} has no points")
    rays = pts - scan.origin[None, :]
    ray_len = np.linalg.norm(rays, axis=1)
    ok = ray_len > 0
    if not ok.all():
        pts, rays, ray_len = pts[ok], rays[ok], ray_len[ok]
        normals = np.asarray(normals)[ok]
    n = pts.shape[0]
    dirs = rays / ray_len[:, None]
    cos = compute_incidence(rays, normals, cfg.cos_eps)
    dt = cfg.trunc_dist

    depth_blocks = [ray_len[:, None]]  # surface
    ray_blocks = [np.arange(n)]
    if cfg.n_front > 0:
        lo = np.maximum(ray_len - dt, 0.0)
        d = lo[:, None] + rng.random((n, cfg.n_front)) * (ray_len - lo)[:, None]
        depth_blocks.append(d)
        ray_blocks.append(np.repeat(np.arange(n), cfg.n_front))
    if cfg.n_behind > 0:
        d = ray_len[:, None] + rng.random((n, cfg.n_behind)) * dt
        depth_blocks.append(d)
        ray_blocks.append(np.repeat(np.arange(n), cfg.n_behind))
    if cfg.n_free > 0:
        hi = ray_len - dt
        fmask = hi > cfg.min_range
        m = int(fmask.sum())
        if m:
            d = cfg.min_range + rng.random((m, cfg.n_free)) * (hi[fmask] - cfg.min_range)[:, None]
            depth_blocks.append(d)
            ray_blocks.append(np.repeat(np.flatnonzero(fmask), cfg.n_free))

    depth = np.concatenate([b.ravel() for b in depth_blocks])
    ray_idx = np.concatenate(ray_blocks)
    pos = scan.origin[None, :] + depth[:, None] * dirs[ray_idx]
    label = np.clip(ray_len[ray_idx] - depth, -dt, dt)
    label[: n] = 0.0  # surface block: exact zeros, no roundoff residue
    rl = ray_len[ray_idx]
    ci = cos[ray_idx]
    return SampleBatch(pos, label, rl, ci, reliability_mse(rl, ci, rel))
