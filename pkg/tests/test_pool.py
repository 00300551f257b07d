import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsdfmap.pool import PoolConfig, ReliabilityParams, ReplayPool, reliability_mse
from tsdfmap.sampler import SampleBatch


def make_batch(pos, mse=None, label=None):
    pos = np.asarray(pos, dtype=np.float64).reshape(-1, 3)
    n = pos.shape[0]
    mse = np.full(n, 0.5) if mse is None else np.asarray(mse, dtype=np.float64)
    label = np.zeros(n) if label is None else np.asarray(label, dtype=np.float64)
    return SampleBatch(pos=pos, label=label, ray_len=np.ones(n),
                       cos_inc=np.ones(n), mse=mse)


def rand_batch(rng, n, extent=5.0):
    return make_batch(rng.uniform(-extent, extent, size=(n, 3)),
                      mse=rng.random(n))


def test_reliability_examples():
    p = ReliabilityParams(alpha=1.0, prune_radius=50.0)
    # normal incidence at half the pruning radius: bias 0, sigma 0.5
    assert reliability_mse(np.array([25.0]), np.array([1.0]), p)[0] == \
        pytest.approx(0.25)
    # grazing incidence at the pruning radius: bias 1, sigma 1
    assert reliability_mse(np.array([50.0]), np.array([0.0]), p)[0] == \
        pytest.approx(2.0)
    # additivity of the two terms
    v = reliability_mse(np.array([25.0]), np.array([0.5]), p)[0]
    assert v == pytest.approx(0.25 + 0.25)


def test_reliability_monotonic_in_range_and_incidence(rng):
    p = ReliabilityParams()
    r = np.linspace(1.0, 50.0, 20)
    v = reliability_mse(r, np.full(20, 0.8), p)
    assert (np.diff(v) > 0).all()
    c = np.linspace(0.01, 1.0, 20)
    v = reliability_mse(np.full(20, 10.0), c, p)
    assert (np.diff(v) < 0).all()


def test_bucket_of_floor_convention():
    pool = ReplayPool(voxel_size=0.45)
    a = pool.bucket_of(np.array([[0.0, 0.0, 0.0]]))
    b = pool.bucket_of(np.array([[0.44, 0.44, 0.44]]))
    c = pool.bucket_of(np.array([[-0.01, 0.0, 0.0]]))
    assert a.tolist() == [[0, 0, 0]]
    assert b.tolist() == [[0, 0, 0]]
    assert c.tolist() == [[-1, 0, 0]]


def test_insert_appends_in_order(rng):
    pool = ReplayPool()
    pool.insert(rand_batch(rng, 10), frame_id=0)
    pool.insert(rand_batch(rng, 5), frame_id=1)
    assert pool.n == 15
    assert pool.seq.tolist() == list(range(15))
    assert pool.frame_id.tolist() == [0] * 10 + [1] * 5


def test_prune_window_strict_boundary():
    pool = ReplayPool(prune_radius=50.0)
    pos = np.array([[49.99, 0, 0], [50.0, 0, 0], [50.01, 0, 0]])
    pool.insert(make_batch(pos), frame_id=0)
    evicted = pool.prune_window(np.zeros(3))
    assert evicted == 2  # keep strictly inside the radius
    assert pool.n == 1
    np.testing.assert_allclose(pool.pos[0], pos[0])


def test_prune_window_is_idempotent(rng):
    pool = ReplayPool(prune_radius=5.0)
    pool.insert(rand_batch(rng, 200, extent=8.0), frame_id=0)
    pool.prune_window(np.zeros(3))
    n = pool.n
    assert pool.prune_window(np.zeros(3)) == 0
    assert pool.n == n


def brute_force_capacity(pool, capacity):
    """Reference: per bucket keep tau lowest-mse rows, newer frame wins
    ties, then insertion order."""
    keep = []
    for b in np.unique(pool.bucket):
        idx = np.flatnonzero(pool.bucket == b)
        ranked = sorted(idx, key=lambda i: (pool.mse[i], -pool.frame_id[i],
                                            pool.seq[i]))
        keep.extend(ranked[:capacity])
    return np.sort(np.asarray(keep))


def test_enforce_capacity_matches_brute_force(rng):
    pool = ReplayPool(voxel_size=0.45, capacity=4)
    for f in range(6):
        pool.insert(rand_batch(rng, 300, extent=2.0), frame_id=f)
    expect = brute_force_capacity(pool, 4)
    expect_seq = pool.seq[expect]
    evicted = pool.enforce_capacity()
    assert evicted == 1800 - expect_seq.size
    assert np.array_equal(np.sort(pool.seq), np.sort(expect_seq))


def test_enforce_capacity_tie_rule_prefers_newer_frame():
    pool = ReplayPool(voxel_size=1.0, capacity=1)
    p = [[0.5, 0.5, 0.5]]
    pool.insert(make_batch(p, mse=[0.7]), frame_id=0)
    pool.insert(make_batch(p, mse=[0.7]), frame_id=3)
    pool.insert(make_batch(p, mse=[0.7]), frame_id=1)
    pool.enforce_capacity()
    assert pool.n == 1
    assert pool.frame_id[0] == 3


def test_enforce_capacity_tie_rule_then_insertion_order():
    pool = ReplayPool(voxel_size=1.0, capacity=2)
    p = [[0.5, 0.5, 0.5]]
    for _ in range(4):
        pool.insert(make_batch(p, mse=[0.7]), frame_id=5)
    pool.enforce_capacity()
    assert pool.seq.tolist() == [0, 1]


def test_enforce_capacity_keeps_low_mse():
    pool = ReplayPool(voxel_size=1.0, capacity=2)
    p = np.tile([[0.5, 0.5, 0.5]], (5, 1))
    pool.insert(make_batch(p, mse=[0.9, 0.1, 0.5, 0.05, 0.8]), frame_id=0)
    pool.enforce_capacity()
    assert sorted(pool.mse.tolist()) == [0.05, 0.1]


def test_rows_stay_sequence_ordered_after_enforcement(rng):
    pool = ReplayPool(voxel_size=0.45, capacity=3)
    for f in range(5):
        pool.insert(rand_batch(rng, 100, extent=1.5), frame_id=f)
    pool.enforce_capacity()
    assert (np.diff(pool.seq) > 0).all()


def test_enforce_capacity_idempotent(rng):
    pool = ReplayPool(voxel_size=0.45, capacity=5)
    pool.insert(rand_batch(rng, 500, extent=2.0), frame_id=0)
    pool.enforce_capacity()
    n = pool.n
    assert pool.enforce_capacity() == 0
    assert pool.n == n


def test_bucket_census(rng):
    pool = ReplayPool(voxel_size=1.0)
    pos = np.array([[0.1, 0.1, 0.1], [0.2, 0.3, 0.4], [1.5, 0.0, 0.0]])
    pool.insert(make_batch(pos), frame_id=0)
    keys = pool.occupied_buckets()
    assert keys.size == 2
    keys2, counts = pool.bucket_sizes()
    assert np.array_equal(keys, keys2)
    assert sorted(counts.tolist()) == [1, 2]
    centers = pool.bucket_centers(keys)
    assert {tuple(c) for c in centers} == {(0.5, 0.5, 0.5), (1.5, 0.5, 0.5)}


def test_from_config_roundtrip():
    cfg = PoolConfig(voxel_size=0.6, capacity=99, prune_radius=12.0, alpha=2.0)
    pool = ReplayPool.from_config(cfg)
    assert pool.voxel_size == 0.6
    assert pool.capacity == 99
    assert pool.prune_radius == 12.0
    rel = cfg.reliability()
    assert rel.alpha == 2.0 and rel.prune_radius == 12.0


@settings(deadline=None, max_examples=40)
@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 6))
def test_capacity_enforcement_oracle_property(seed, capacity):
    r = np.random.default_rng(seed)
    pool = ReplayPool(voxel_size=0.9, capacity=capacity)
    for f in range(3):
        n = int(r.integers(1, 60))
        pool.insert(make_batch(r.uniform(-1, 1, size=(n, 3)), mse=r.random(n)),
                    frame_id=f)
    expect_seq = pool.seq[brute_force_capacity(pool, capacity)]
    pool.enforce_capacity()
    assert np.array_equal(pool.seq, np.sort(expect_seq))
    counts = np.unique(pool.bucket, return_counts=True)[1]
    assert (counts <= capacity).all()
