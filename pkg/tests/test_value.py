import numpy as np
import pytest

from pompc import dists, nnet, value, worldmodel

from oracles import fd_check, mlp_forward_oracle


@pytest.fixture
def grid():
    return worldmodel.TwoHotGrid(7, -10.0, 10.0)


def _zeroed(ens):
    for h in ens.heads + ens.target_heads:
        for w in h.weights:
            w[:] = 0.0
        for b in h.biases:
            b[:] = 0.0
    return ens


def _ensemble(rng, grid, n_heads=3, latent=4, adim=1, hidden=6):
    return value.init_q_ensemble(rng, latent, adim, hidden, grid, n_heads)


def test_q_value_zero_weights_is_zero(grid):
    rng = np.random.default_rng(0)
    e = _zeroed(_ensemble(rng, grid))
    z = rng.standard_normal((5, 4))
    a = rng.uniform(-1, 1, (5, 1))
    np.testing.assert_allclose(value.q_value(e, z, a, reduce="mean"), 0.0,
                               atol=1e-12)
    np.testing.assert_allclose(
        value.q_value(e, z, a, reduce="min2", rng=np.random.default_rng(1)),
        0.0, atol=1e-12)


def test_q_value_identical_heads_reductions_agree(grid):
    rng = np.random.default_rng(1)
    e = _ensemble(rng, grid)
    clone = e.heads[0]
    e.heads = [clone.copy() for _ in range(3)]
    z = rng.standard_normal((4, 4))
    a = rng.uniform(-1, 1, (4, 1))
    mean = value.q_value(e, z, a, reduce="mean")
    mn = value.q_value(e, z, a, reduce="min2", rng=np.random.default_rng(0))
    single = e.grid.decode(nnet.forward_eval(clone, np.concatenate([z, a], -1)))
    np.testing.assert_allclose(mean, single, atol=1e-12)
    np.testing.assert_allclose(mn, single, atol=1e-12)


def test_q_value_matches_decode_reduce_oracle(grid):
    rng = np.random.default_rng(0)
    e = _ensemble(rng, grid)
    z = rng.standard_normal((3, 4))
    a = rng.uniform(-1, 1, (3, 1))
    za = np.concatenate([z, a], axis=-1)
    per_head = np.array([grid.decode(mlp_forward_oracle(h, za))
                         for h in e.heads])
    np.testing.assert_allclose(value.q_value(e, z, a, reduce="mean"),
                               per_head.mean(axis=0), atol=1e-12)
    idx = np.random.default_rng(42).choice(3, size=2, replace=False)
    np.testing.assert_allclose(
        value.q_value(e, z, a, reduce="min2",
                      rng=np.random.default_rng(42)),
        np.minimum(per_head[idx[0]], per_head[idx[1]]), atol=1e-12)


def _const_policy(mean, std):
    def dist(z):
        shape = z.shape[:-1] + (len(mean),)
        return dists.DiagGaussian(np.broadcast_to(mean, shape).copy(),
                                  np.broadcast_to(std, shape).copy())
    return dist


def test_td_target_bootstrap_gamma_zero(grid):
    rng = np.random.default_rng(2)
    e = _ensemble(rng, grid)
    r = np.array([0.7, -0.3])
    z = rng.standard_normal((2, 4))
    td = value.td_target_bootstrap(r, z, _const_policy([0.0], [0.5]), e,
                                   0.0, np.random.default_rng(0))
    np.testing.assert_allclose(td, r, atol=1e-12)


def test_td_target_bootstrap_zero_nets(grid):
    rng = np.random.default_rng(3)
    e = _zeroed(_ensemble(rng, grid))
    td = value.td_target_bootstrap(np.zeros(3), rng.standard_normal((3, 4)),
                                   _const_policy([0.0], [0.5]), e, 0.99,
                                   np.random.default_rng(0))
    np.testing.assert_allclose(td, 0.0, atol=1e-12)


def test_td_target_bootstrap_hand_case(grid):
    # Hand-built single state: target heads output a constant value.
    rng = np.random.default_rng(4)
    e = _zeroed(_ensemble(rng, grid))
    const = 2.0
    w = grid.encode(const)
    for h in e.target_heads:
        h.biases[-1][:] = np.log(w + 1e-300)
    z = np.zeros((1, 4))
    td = value.td_target_bootstrap(np.array([1.0]), z,
                                   _const_policy([0.5], [1e-9]), e, 0.99,
                                   np.random.default_rng(0))
    assert td[0] == pytest.approx(1.0 + 0.99 * const, abs=1e-9)


def test_td_target_klreg_lambda_zero_equals_bootstrap(grid):
    rng = np.random.default_rng(5)
    e = _ensemble(rng, grid)
    r = np.array([0.2, 0.4])
    z = rng.standard_normal((2, 4))
    policy_dist = _const_policy([0.3], [0.7])
    prior = dists.DiagGaussian(np.full((2, 1), -0.5), np.full((2, 1), 0.3))
    a = value.td_target_bootstrap(r, z, policy_dist, e, 0.99,
                                  np.random.default_rng(9))
    b = value.td_target_klreg(r, z, policy_dist, prior, e, 0.0, 1.0, 0.99,
                              np.random.default_rng(9))
    np.testing.assert_array_equal(a, b)


def test_td_target_klreg_identical_policies(grid):
    rng = np.random.default_rng(6)
    e = _ensemble(rng, grid)
    r = np.array([0.2])
    z = rng.standard_normal((1, 4))
    policy_dist = _const_policy([0.3], [0.7])
    prior = policy_dist(z)
    a = value.td_target_bootstrap(r, z, policy_dist, e, 0.99,
                                  np.random.default_rng(3))
    b = value.td_target_klreg(r, z, policy_dist, prior, e, 5.0, 1.0, 0.99,
                              np.random.default_rng(3))
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_td_target_klreg_scalar_case(grid):
    # KL(N(0,1) || N(1,1)) = 0.5; target = 1 + 0.99 * (2 - 0.5) = 2.485
    rng = np.random.default_rng(7)
    e = _zeroed(_ensemble(rng, grid))
    w = grid.encode(2.0)
    for h in e.target_heads:
        h.biases[-1][:] = np.log(w + 1e-300)
    z = np.zeros((1, 4))
    prior = dists.DiagGaussian(np.array([[1.0]]), np.array([[1.0]]))
    td = value.td_target_klreg(np.array([1.0]), z,
                               _const_policy([0.0], [1.0]), prior, e,
                               1.0, 1.0, 0.99, np.random.default_rng(0))
    assert td[0] == pytest.approx(2.485, abs=1e-9)


def test_q_loss_at_optimum_floor(grid):
    rng = np.random.default_rng(8)
    e = _ensemble(rng, grid, n_heads=2)
    targets = np.array([[1.3]])
    w = grid.encode(1.3)
    for h in e.heads:
        for wt in h.weights:
            wt[:] = 0.0
        for b in h.biases:
            b[:] = 0.0
        h.biases[-1][:] = np.log(w + 1e-300)
    latents = np.zeros((1, 1, 4))
    actions = np.zeros((1, 1, 1))
    loss, grads, _ = value.q_loss(e, latents, actions, targets, 0.5,
                                  np.random.default_rng(0))
    floor = float(-np.sum(w[w > 0] * np.log(w[w > 0])))
    assert loss == pytest.approx(floor, abs=1e-9)
    assert all(g.global_norm < 1e-8 for g in grads)


def test_q_loss_h1_weight_one(grid):
    rng = np.random.default_rng(9)
    e = _ensemble(rng, grid, n_heads=2)
    latents = rng.standard_normal((3, 1, 4))
    actions = rng.uniform(-1, 1, (3, 1, 1))
    targets = rng.uniform(-2, 2, (3, 1))
    loss, _, _ = value.q_loss(e, latents, actions, targets, 0.5,
                              np.random.default_rng(0))
    za = np.concatenate([latents[:, 0], actions[:, 0]], axis=-1)
    w = grid.encode(targets[:, 0])
    expected = np.mean([np.mean(worldmodel.cross_entropy(
        mlp_forward_oracle(h, za), w)) for h in e.heads])
    assert loss == pytest.approx(expected, rel=1e-12)


def test_q_loss_gradients_finite_difference(grid):
    rng = np.random.default_rng(10)
    e = _ensemble(rng, grid, n_heads=2)
    latents = rng.standard_normal((2, 2, 4))
    actions = rng.uniform(-1, 1, (2, 2, 1))
    targets = rng.uniform(-2, 2, (2, 2))

    def loss_fn():
        loss, _, _ = value.q_loss(e, latents, actions, targets, 0.5,
                                  np.random.default_rng(0))
        return loss

    _, grads, _ = value.q_loss(e, latents, actions, targets, 0.5,
                               np.random.default_rng(0))
    assert fd_check(loss_fn, e.heads, grads) is None


def test_q_loss_grads_ignore_target_heads(grid):
    # Stop-gradient semantics: with the target values fixed, target-head
    # parameters never enter the online gradients.
    rng = np.random.default_rng(11)
    e = _ensemble(rng, grid, n_heads=2)
    latents = rng.standard_normal((2, 1, 4))
    actions = rng.uniform(-1, 1, (2, 1, 1))
    targets = rng.uniform(-2, 2, (2, 1))
    _, g1, _ = value.q_loss(e, latents, actions, targets, 0.5,
                            np.random.default_rng(0))
    for h in e.target_heads:
        for w in h.weights:
            w += 123.0
    _, g2, _ = value.q_loss(e, latents, actions, targets, 0.5,
                            np.random.default_rng(0))
    for a, b in zip(g1, g2):
        for x, y in zip(a.d_weights, b.d_weights):
            np.testing.assert_array_equal(x, y)


def test_polyak_full_copy_and_fixed_point(grid):
    rng = np.random.default_rng(12)
    e = _ensemble(rng, grid, n_heads=2)
    value.polyak_update(e, 1.0)
    for o, t in zip(e.heads, e.target_heads):
        for a, b in zip(o.weights, t.weights):
            np.testing.assert_array_equal(a, b)
    before = [w.copy() for w in e.target_heads[0].weights]
    value.polyak_update(e, 0.3)
    for a, b in zip(before, e.target_heads[0].weights):
        np.testing.assert_allclose(a, b, atol=1e-15)


def test_polyak_scalar_and_contraction(grid):
    rng = np.random.default_rng(13)
    e = _ensemble(rng, grid, n_heads=2)
    e.heads[0].weights[0][:] = 1.0
    e.target_heads[0].weights[0][:] = 0.0
    value.polyak_update(e, 0.01)
    np.testing.assert_allclose(e.target_heads[0].weights[0], 0.01, atol=1e-15)
    # contraction: ||target' - online|| = (1 - tau) ||target - online||
    gap_before = 1.0
    gap_after = abs(e.target_heads[0].weights[0][0, 0] - 1.0)
    assert gap_after == pytest.approx((1 - 0.01) * gap_before, rel=1e-12)


def test_scale_tracker_constant_observations_floor():
    t = value.ScaleTracker(s=1.0, ema_rate=0.5)
    for _ in range(50):
        t.update(np.full(10, 3.3))
    assert t.s < 1e-10
    assert t.scale() == 1.0


def test_scale_tracker_percentile_grid():
    t = value.ScaleTracker(s=0.0, ema_rate=1.0)
    t.update(np.arange(101, dtype=np.float64))
    assert t.s == pytest.approx(90.0, abs=1e-12)


def test_scale_tracker_eta_one_matches_statistic():
    t = value.ScaleTracker(s=123.0, ema_rate=1.0)
    obs = np.array([1.0, 2.0, 10.0])
    t.update(obs)
    p5, p95 = np.percentile(obs, [5, 95])
    assert t.s == pytest.approx(p95 - p5, abs=1e-12)


def test_scale_never_amplifies():
    t = value.ScaleTracker(s=0.2)
    assert t.scale() == 1.0
    t.s = 7.0
    assert t.scale() == 7.0
