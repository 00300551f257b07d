import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tsdfmap.errors import UnallocatedQuery
from tsdfmap.hashmap import unpack_key
from tsdfmap.grid import (
    CORNER_OFFSETS,
    FeatureGrid,
    cell_of,
    trilinear_weight_gradients,
    trilinear_weights,
)


def brute_weights(frac):
    """Product-form trilinear weights, one corner at a time."""
    out = np.empty((frac.shape[0], 8))
    for c, (i, j, k) in enumerate(CORNER_OFFSETS):
        wx = frac[:, 0] if i else 1.0 - frac[:, 0]
        wy = frac[:, 1] if j else 1.0 - frac[:, 1]
        wz = frac[:, 2] if k else 1.0 - frac[:, 2]
        out[:, c] = wx * wy * wz
    return out


def test_cell_of_basic():
    base, frac = cell_of(np.array([[0.35, -0.05, 0.0]]), 0.3)
    assert base.tolist() == [[1, -1, 0]]
    np.testing.assert_allclose(frac, [[0.35 / 0.3 - 1.0, -0.05 / 0.3 + 1.0, 0.0]],
                               atol=1e-12)
    assert frac.min() >= 0.0 and frac.max() < 1.0


def test_weights_match_brute_force(rng):
    frac = rng.random((500, 3))
    np.testing.assert_allclose(trilinear_weights(frac), brute_weights(frac),
                               rtol=0, atol=1e-12)


def test_weights_at_corner_are_delta():
    for c, off in enumerate(CORNER_OFFSETS):
        w = trilinear_weights(off[None].astype(np.float64))
        expect = np.zeros(8)
        expect[c] = 1.0
        np.testing.assert_allclose(w[0], expect, atol=1e-15)


def test_weight_gradients_match_finite_differences(rng):
    frac = rng.uniform(0.2, 0.8, size=(50, 3))
    vs = 0.3
    grads = trilinear_weight_gradients(frac, vs)
    h = 1e-6
    for a in range(3):
        dp = frac.copy()
        dm = frac.copy()
        dp[:, a] += h
        dm[:, a] -= h
        # d frac / d x = 1 / voxel_size
        fd = (trilinear_weights(dp) - trilinear_weights(dm)) / (2 * h) / vs
        np.testing.assert_allclose(grads[:, :, a], fd, rtol=0, atol=1e-8)


@settings(deadline=None, max_examples=100)
@given(arrays(np.float64, (7, 3), elements=st.floats(0, 1, exclude_max=True)))
def test_weights_sum_to_one_and_nonnegative(frac):
    w = trilinear_weights(frac)
    assert (w >= 0).all()
    np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12)


def test_allocate_is_idempotent(rng):
    g = FeatureGrid()
    pts = rng.uniform(-1, 1, size=(200, 3))
    added, skipped = g.allocate(pts)
    assert added > 0 and skipped == 0
    again, _ = g.allocate(pts)
    assert again == 0


def test_allocate_skips_nonfinite():
    g = FeatureGrid()
    pts = np.array([[0.0, 0.0, 0.0], [np.nan, 0, 0], [0, np.inf, 0]])
    added, skipped = g.allocate(pts)
    assert skipped == 2
    assert added == g.levels[0].n_vertices + g.levels[1].n_vertices


def test_interpolation_matches_manual(rng):
    g = FeatureGrid(voxel_sizes=(0.3, 0.45), feature_dim=4)
    pts = rng.uniform(-0.9, 0.9, size=(60, 3))
    g.allocate(pts)
    for lvl in g.levels:
        lvl.features[:] = rng.standard_normal(lvl.features.shape)
    feats, rec = g.interpolate(pts)
    manual = np.zeros_like(feats)
    for li, lvl in enumerate(g.levels):
        rows, frac = g.corner_rows(pts, li)
        w = trilinear_weights(frac)
        for n in range(pts.shape[0]):
            for c in range(8):
                manual[n] += w[n, c] * lvl.features[rows[n, c]]
    np.testing.assert_allclose(feats, manual, rtol=0, atol=1e-12)


def test_interpolation_is_exact_on_trilinear_functions(rng):
    """A field linear per-axis is reproduced exactly inside one cell."""
    g = FeatureGrid(voxel_sizes=(1.0,), feature_dim=1)
    pts = rng.random((40, 3))  # all inside cell [0,1)^3
    g.allocate(pts)
    coef = rng.standard_normal(3)
    lvl = g.levels[0]
    coords = unpack_key(lvl.vertices.keys).astype(np.float64)
    lvl.features[:, 0] = coords @ coef
    feats, _ = g.interpolate(pts)
    np.testing.assert_allclose(feats[:, 0], pts @ coef, atol=1e-12)


def test_features_sum_over_levels(rng):
    g = FeatureGrid(voxel_sizes=(0.3, 0.45), feature_dim=2)
    pts = rng.uniform(-0.5, 0.5, size=(30, 3))
    g.allocate(pts)
    for lvl in g.levels:
        lvl.features[:] = rng.standard_normal(lvl.features.shape)
    total, _ = g.interpolate(pts)
    parts = []
    for li, lvl in enumerate(g.levels):
        rows, frac = g.corner_rows(pts, li)
        w = trilinear_weights(frac)
        parts.append(np.einsum("nc,ncd->nd", w, lvl.features[rows]))
    np.testing.assert_allclose(total, parts[0] + parts[1], atol=1e-12)


def test_unallocated_query_raises():
    g = FeatureGrid()
    g.allocate(np.zeros((1, 3)))
    with pytest.raises(UnallocatedQuery):
        g.interpolate(np.array([[50.0, 50.0, 50.0]]))


def test_voxels_allocated_mask(rng):
    g = FeatureGrid()
    inside = rng.uniform(0.01, 0.29, size=(20, 3))  # one coarse voxel's interior
    g.allocate(inside)
    probe = np.vstack([inside[:3], [[40.0, 0, 0]]])
    mask = g.voxels_allocated(probe)
    assert mask.tolist() == [True, True, True, False]


def test_bounds_cover_allocations():
    g = FeatureGrid()
    pts = np.array([[0.0, 0.0, 0.0], [2.0, -1.0, 3.0]])
    g.allocate(pts)
    lo, hi = g.bounds()
    assert (lo <= pts.min(0)).all() and (hi >= pts.max(0)).all()
