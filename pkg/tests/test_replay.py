import numpy as np
import pytest

from pompc import planner, replay


def _buf(capacity=100, obs_dim=3, action_dim=2, smin=0.05, smax=2.0):
    return replay.ReplayBuffer(capacity, obs_dim, action_dim, smin, smax)


def _rec(rng, episode, step, done=False, obs_dim=3, action_dim=2):
    return replay.TransitionRecord(
        obs=rng.standard_normal(obs_dim),
        action=rng.uniform(-1, 1, action_dim),
        reward=float(rng.uniform(-1, 1)),
        next_obs=rng.standard_normal(obs_dim),
        plan_mean=rng.uniform(-1, 1, action_dim),
        plan_std=rng.uniform(0.05, 2.0, action_dim),
        episode=episode, step=step, done=done)


def test_push_then_sample_singleton_roundtrip():
    rng = np.random.default_rng(0)
    buf = _buf()
    rec = _rec(rng, episode=0, step=0)
    buf.push(rec)
    batch = buf.sample_slices(1, 1, np.random.default_rng(1))
    np.testing.assert_array_equal(batch.obs[0, 0], rec.obs)
    np.testing.assert_array_equal(batch.action[0, 0], rec.action)
    assert batch.reward[0, 0] == rec.reward
    np.testing.assert_array_equal(batch.next_obs[0, 0], rec.next_obs)
    np.testing.assert_array_equal(batch.plan_mean[0, 0], rec.plan_mean)
    np.testing.assert_array_equal(batch.plan_std[0, 0], rec.plan_std)


def test_fifo_eviction():
    rng = np.random.default_rng(1)
    buf = _buf(capacity=2)
    first = _rec(rng, 0, 0)
    buf.push(first)
    buf.push(_rec(rng, 0, 1))
    buf.push(_rec(rng, 0, 2))
    assert buf.size == 2
    batch = buf.sample_slices(64, 1, np.random.default_rng(2))
    # evicted first record never appears
    assert not any(np.array_equal(batch.obs[i, 0], first.obs)
                   for i in range(64))


def test_push_rejects_out_of_range_sigma():
    rng = np.random.default_rng(2)
    buf = _buf()
    rec = _rec(rng, 0, 0)
    rec.plan_std = np.array([0.01, 0.5])
    with pytest.raises(ValueError):
        buf.push(rec)
    rec.plan_std = np.array([0.5, 3.0])
    with pytest.raises(ValueError):
        buf.push(rec)


def test_no_slice_crosses_episodes_exhaustive():
    rng = np.random.default_rng(3)
    buf = _buf(capacity=2_000)
    steps_per_episode = 200
    for ep in range(50):
        for t in range(steps_per_episode):
            buf.push(_rec(rng, ep, t, done=t == steps_per_episode - 1))
    starts = buf._valid_starts(3)
    lo = buf.count - buf.size
    for g in starts:
        slots = (g + np.arange(3)) % buf.capacity
        eps = buf.episode[slots]
        assert eps[0] == eps[1] == eps[2]
    # every sampled slice stays within one episode
    batch = buf.sample_slices(512, 3, np.random.default_rng(4))
    assert (batch.episode == batch.episode[:, :1]).all()
    assert starts.min() >= lo


def test_sample_uniformity_over_starts():
    rng = np.random.default_rng(5)
    buf = _buf(capacity=50)
    # one episode of 12 records -> 10 valid starts for H=3
    for t in range(12):
        buf.push(_rec(rng, 0, t))
    starts = buf._valid_starts(3)
    assert starts.size == 10
    batch = buf.sample_slices(100_000, 3, np.random.default_rng(6))
    first_steps = buf.step[batch.slots[:, 0]]
    counts = np.bincount(first_steps, minlength=10)
    p = 0.1
    sigma = np.sqrt(100_000 * p * (1 - p))
    assert (np.abs(counts - 10_000) < 5 * sigma).all()


def test_sample_deterministic_given_seed():
    rng = np.random.default_rng(7)
    buf = _buf()
    for t in range(20):
        buf.push(_rec(rng, 0, t))
    b1 = buf.sample_slices(8, 3, np.random.default_rng(42))
    b2 = buf.sample_slices(8, 3, np.random.default_rng(42))
    np.testing.assert_array_equal(b1.obs, b2.obs)
    np.testing.assert_array_equal(b1.slots, b2.slots)


def test_sample_requires_valid_slice():
    buf = _buf()
    with pytest.raises(ValueError):
        buf.sample_slices(1, 1, np.random.default_rng(0))
    rng = np.random.default_rng(8)
    buf.push(_rec(rng, 0, 0))
    buf.push(_rec(rng, 1, 0))  # two singleton episodes: no H=2 slice
    with pytest.raises(ValueError):
        buf.sample_slices(1, 2, np.random.default_rng(0))


def test_next_plan_stats_interior_and_boundary():
    rng = np.random.default_rng(9)
    buf = _buf()
    for t in range(4):
        buf.push(_rec(rng, 0, t, done=t == 3))
    buf.push(_rec(rng, 1, 0))
    batch = buf.sample_slices(64, 2, np.random.default_rng(10))
    for i in range(64):
        s0, s1 = batch.slots[i]
        np.testing.assert_array_equal(batch.next_plan_mean[i, 0],
                                      buf.plan_mean[s1])
        succ = s1 + 1
        if succ < buf.count and buf.episode[succ % buf.capacity] \
                == buf.episode[s1]:
            np.testing.assert_array_equal(batch.next_plan_mean[i, 1],
                                          buf.plan_mean[succ % buf.capacity])
        else:
            np.testing.assert_array_equal(batch.next_plan_mean[i, 1],
                                          buf.plan_mean[s1])


def _plan_result(mean0, std0, horizon=3, adim=2, fallback=False):
    mean = np.tile(np.asarray(mean0, float), (horizon, 1))
    std = np.tile(np.asarray(std0, float), (horizon, 1))
    return planner.PlanResult(mean[0].copy(), mean, std, fallback=fallback)


def test_reanalyze_off_interval_untouched():
    rng = np.random.default_rng(11)
    buf = _buf()
    for t in range(10):
        buf.push(_rec(rng, 0, t))
    batch = buf.sample_slices(4, 2, np.random.default_rng(0))
    before = batch.plan_mean.copy()
    calls = []
    batch2, report = replay.lazy_reanalyze(
        buf, batch, 2, 10, 1, lambda obs: calls.append(obs))
    assert not report.triggered
    assert not calls
    np.testing.assert_array_equal(batch2.plan_mean, before)


def test_reanalyze_writes_through_bit_exact():
    rng = np.random.default_rng(12)
    buf = _buf()
    for t in range(30):
        buf.push(_rec(rng, 0, t))
    batch = buf.sample_slices(8, 3, np.random.default_rng(1))
    fresh = _plan_result([0.123456789, -0.987654321], [0.3332221119, 0.77])

    batch2, report = replay.lazy_reanalyze(buf, batch, 5, 10, 20,
                                           lambda obs: fresh)
    assert report.triggered
    assert len(report.refreshed_rows) == 5
    for i in range(5):
        np.testing.assert_array_equal(batch2.plan_mean[i, 0], fresh.mean[0])
        np.testing.assert_array_equal(batch2.plan_std[i, 0], fresh.std[0])
        slot = batch2.slots[i, 0]
        np.testing.assert_array_equal(buf.plan_mean[slot], fresh.mean[0])
        np.testing.assert_array_equal(buf.plan_std[slot], fresh.std[0])
    # untouched rows keep their stats
    for i in range(5, 8):
        assert i not in report.refreshed_rows


def test_reanalyze_full_refresh_and_count():
    rng = np.random.default_rng(13)
    buf = _buf()
    for t in range(30):
        buf.push(_rec(rng, 0, t))
    batch = buf.sample_slices(6, 2, np.random.default_rng(2))
    fresh = _plan_result([0.0, 0.0], [0.5, 0.5], horizon=2)
    _, report = replay.lazy_reanalyze(buf, batch, 99, 5, 10, lambda o: fresh)
    assert len(report.refreshed_rows) == min(99, 6) == 6


def test_reanalyze_fallback_keeps_old_stats():
    rng = np.random.default_rng(14)
    buf = _buf()
    for t in range(10):
        buf.push(_rec(rng, 0, t))
    batch = buf.sample_slices(3, 2, np.random.default_rng(3))
    before = batch.plan_mean.copy()
    bad = _plan_result([0.0, 0.0], [0.5, 0.5], horizon=2, fallback=True)
    _, report = replay.lazy_reanalyze(buf, batch, 3, 1, 1, lambda o: bad)
    assert report.failures == 3
    np.testing.assert_array_equal(batch.plan_mean, before)


def test_buffer_persistence_roundtrip(tmp_path):
    rng = np.random.default_rng(15)
    buf = _buf(capacity=16)
    for t in range(25):  # wraps the ring
        buf.push(_rec(rng, t // 5, t % 5))
    path = tmp_path / "buffer.bin"
    buf.save(path)
    loaded = replay.ReplayBuffer.load(path)
    assert loaded.count == buf.count
    assert loaded.capacity == buf.capacity
    np.testing.assert_array_equal(loaded.obs, buf.obs)
    np.testing.assert_array_equal(loaded.plan_std, buf.plan_std)
    np.testing.assert_array_equal(loaded.episode, buf.episode)
    b1 = buf.sample_slices(4, 2, np.random.default_rng(9))
    b2 = loaded.sample_slices(4, 2, np.random.default_rng(9))
    np.testing.assert_array_equal(b1.obs, b2.obs)
