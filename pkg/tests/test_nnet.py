import numpy as np
import pytest

from pompc import nnet

from oracles import fd_check, mlp_forward_oracle, scalar_adam_oracle


def _mlp(rng, dims, **kw):
    return nnet.init_mlp(rng, dims, **kw)


def test_identity_single_layer():
    p = nnet.MlpParams([np.eye(2)], [np.zeros(2)], ["identity"], [0.0])
    y, _ = nnet.forward(p, np.array([1.0, 2.0]))
    np.testing.assert_array_equal(y, [1.0, 2.0])


def test_zero_weights_tanh_net_outputs_zero():
    p = nnet.MlpParams([np.zeros((4, 3)), np.zeros((2, 4))],
                       [np.zeros(4), np.zeros(2)],
                       ["tanh", "tanh"], [0.0, 0.0])
    y, _ = nnet.forward(p, np.array([0.3, -1.0, 5.0]))
    np.testing.assert_array_equal(y, np.zeros(2))


def test_forward_matches_straightline_oracle():
    rng = np.random.default_rng(0)
    p = _mlp(rng, (2, 8, 8, 3))
    x = np.array([0.5, -0.5])
    y, _ = nnet.forward(p, x)
    y_eval = nnet.forward_eval(p, x)
    expected = mlp_forward_oracle(p, x)
    np.testing.assert_allclose(y, expected, rtol=0, atol=1e-12)
    np.testing.assert_allclose(y_eval, expected, rtol=1e-12, atol=1e-12)


def test_forward_eval_matches_forward_batch():
    rng = np.random.default_rng(3)
    p = _mlp(rng, (4, 16, 5))
    x = rng.standard_normal((7, 4))
    y, _ = nnet.forward(p, x)
    np.testing.assert_allclose(nnet.forward_eval(p, x), y,
                               rtol=1e-12, atol=1e-14)


def test_forward_shape_and_numeric_errors():
    rng = np.random.default_rng(1)
    p = _mlp(rng, (3, 4, 2))
    with pytest.raises(nnet.ShapeError):
        nnet.forward(p, np.zeros(5))
    with pytest.raises(nnet.NumericError):
        nnet.forward(p, np.array([np.nan, 0.0, 0.0]))


def test_backward_linear_layer_analytic():
    w = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    p = nnet.MlpParams([w.copy()], [np.zeros(3)], ["identity"], [0.0])
    x = np.array([0.7, -1.3])
    _, tape = nnet.forward(p, x)
    g = np.array([1.0, -2.0, 0.5])
    grads, dx = nnet.backward(tape, g)
    np.testing.assert_allclose(grads.d_weights[0], np.outer(g, x), atol=1e-15)
    np.testing.assert_allclose(grads.d_biases[0], g, atol=1e-15)
    np.testing.assert_allclose(dx, w.T @ g, atol=1e-15)


def test_backward_zero_grad_gives_zero():
    rng = np.random.default_rng(2)
    p = _mlp(rng, (3, 6, 2))
    _, tape = nnet.forward(p, rng.standard_normal(3))
    grads, dx = nnet.backward(tape, np.zeros(2))
    assert grads.global_norm == 0.0
    np.testing.assert_array_equal(dx, np.zeros(3))


@pytest.mark.parametrize("activation", ["tanh", "mish"])
def test_backward_matches_finite_differences(activation):
    rng = np.random.default_rng(0)
    p = _mlp(rng, (3, 5, 2), hidden_activation=activation)
    x = rng.standard_normal((4, 3))
    target = rng.standard_normal((4, 2))

    def loss():
        y, _ = nnet.forward(p, x)
        return 0.5 * float(np.sum((y - target) ** 2))

    y, tape = nnet.forward(p, x)
    grads, _ = nnet.backward(tape, y - target)
    assert fd_check(loss, [p], [grads]) is None


def test_dropout_gradient_with_fixed_mask():
    rng = np.random.default_rng(5)
    p = _mlp(rng, (3, 8, 2), dropout=0.4)
    x = rng.standard_normal((3, 3))
    target = rng.standard_normal((3, 2))

    def loss():
        y, _ = nnet.forward(p, x, train=True, rng=np.random.default_rng(99))
        return 0.5 * float(np.sum((y - target) ** 2))

    y, tape = nnet.forward(p, x, train=True, rng=np.random.default_rng(99))
    grads, _ = nnet.backward(tape, y - target)
    assert fd_check(loss, [p], [grads]) is None


def test_dropout_disabled_at_eval():
    rng = np.random.default_rng(6)
    p = _mlp(rng, (3, 32, 2), dropout=0.5)
    x = rng.standard_normal(3)
    y1, _ = nnet.forward(p, x)
    y2, _ = nnet.forward(p, x)
    np.testing.assert_array_equal(y1, y2)
    yt, _ = nnet.forward(p, x, train=True, rng=np.random.default_rng(0))
    assert not np.array_equal(y1, yt)


def test_determinism_bit_identical():
    def run():
        rng = np.random.default_rng(123)
        p = _mlp(rng, (4, 8, 8, 2), dropout=0.1)
        x = rng.standard_normal((5, 4))
        y, tape = nnet.forward(p, x, train=True, rng=np.random.default_rng(7))
        grads, _ = nnet.backward(tape, np.ones_like(y))
        return y, grads

    y1, g1 = run()
    y2, g2 = run()
    np.testing.assert_array_equal(y1, y2)
    for a, b in zip(g1.d_weights, g2.d_weights):
        np.testing.assert_array_equal(a, b)


def test_adam_zero_grad_keeps_params():
    rng = np.random.default_rng(0)
    p = _mlp(rng, (2, 4, 1))
    before = [w.copy() for w in p.weights]
    state = nnet.init_adam(p)
    nnet.adam_step(p, state, nnet.zero_grads(p), lr=0.1)
    assert state.step == 1
    for w, b in zip(p.weights, before):
        np.testing.assert_array_equal(w, b)


def test_adam_scalar_first_step():
    p = nnet.MlpParams([np.array([[0.0]])], [np.zeros(1)],
                       ["identity"], [0.0])
    state = nnet.init_adam(p)
    g = nnet.GradBundle([np.array([[1.0]])], [np.zeros(1)])
    nnet.adam_step(p, state, g, lr=0.1)
    # bias correction makes m_hat = g and v_hat = g^2 on step one
    assert p.weights[0][0, 0] == pytest.approx(-0.1, rel=1e-7)


def test_adam_two_steps_match_scalar_oracle():
    p = nnet.MlpParams([np.array([[0.3]])], [np.zeros(1)],
                       ["identity"], [0.0])
    state = nnet.init_adam(p)
    g = nnet.GradBundle([np.array([[1.0]])], [np.zeros(1)])
    nnet.adam_step(p, state, g, lr=0.05)
    nnet.adam_step(p, state, g, lr=0.05)
    expected = scalar_adam_oracle(0.3, [1.0, 1.0], 0.05)
    assert abs(p.weights[0][0, 0] - expected) < 1e-12


def test_adam_refuses_nonfinite():
    rng = np.random.default_rng(0)
    p = _mlp(rng, (2, 2))
    state = nnet.init_adam(p)
    g = nnet.zero_grads(p)
    g.d_weights[0][0, 0] = np.inf
    with pytest.raises(nnet.NumericError):
        nnet.adam_step(p, state, g, lr=0.1)


def test_clip_below_threshold_unchanged():
    g = nnet.GradBundle([np.array([[6.0, 8.0]])], [np.zeros(1)])
    assert g.global_norm == pytest.approx(10.0)
    out = nnet.clip_global_norm(g, 20.0)
    np.testing.assert_array_equal(out.d_weights[0], g.d_weights[0])


def test_clip_scales_to_max_norm():
    g = nnet.GradBundle([np.array([[30.0, 40.0]])], [np.zeros(1)])
    out = nnet.clip_global_norm(g, 20.0)
    np.testing.assert_allclose(out.d_weights[0], [[12.0, 16.0]], atol=1e-12)
    assert out.global_norm == pytest.approx(20.0)


def test_clip_zero_stays_zero():
    g = nnet.GradBundle([np.zeros((2, 2))], [np.zeros(2)])
    out = nnet.clip_global_norm(g, 20.0)
    assert out.global_norm == 0.0


def test_clip_idempotent_never_increases():
    rng = np.random.default_rng(8)
    for _ in range(20):
        g = nnet.GradBundle([rng.standard_normal((3, 3)) * 10],
                            [rng.standard_normal(3)])
        once = nnet.clip_global_norm(g, 5.0)
        twice = nnet.clip_global_norm(once, 5.0)
        assert once.global_norm <= g.global_norm + 1e-12
        assert once.global_norm <= 5.0 + 1e-12
        for a, b in zip(once.d_weights, twice.d_weights):
            np.testing.assert_array_equal(a, b)


def test_joint_clip_shares_one_factor():
    g1 = nnet.GradBundle([np.array([[3.0]])], [np.zeros(1)])
    g2 = nnet.GradBundle([np.array([[4.0]])], [np.zeros(1)])
    c1, c2 = nnet.clip_global_norm_joint([g1, g2], 1.0)
    total = np.sqrt(c1.global_norm ** 2 + c2.global_norm ** 2)
    assert total == pytest.approx(1.0)
    # direction preserved
    assert c1.d_weights[0][0, 0] / c2.d_weights[0][0, 0] == pytest.approx(0.75)


def test_grad_bundle_norm_cache_accurate():
    rng = np.random.default_rng(11)
    g = nnet.GradBundle([rng.standard_normal((4, 3))],
                        [rng.standard_normal(4)])
    manual = np.sqrt(sum(float(np.sum(a * a))
                         for a in g.d_weights + g.d_biases))
    assert abs(g.global_norm - manual) <= 1e-12 * max(manual, 1.0)
