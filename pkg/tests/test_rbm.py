import numpy as np
import pytest
from scipy.special import expit

from spkdbn.rbm import (
    NumericalError,
    RbmParams,
    RbmTrainConfig,
    RbmVelocity,
    cd1_step,
    hidden_probs,
    init_rbm,
    load_rbm,
    reconstruct_visible,
    sample_bernoulli,
    save_rbm,
    train_rbm,
)


def test_init_rbm_contract():
    rbm = init_rbm(2, 3, "bernoulli", seed=1)
    assert rbm.W.shape == (2, 3)
    assert np.all((rbm.W >= 0.0) & (rbm.W < 0.01))
    assert np.all(rbm.b_vis == 0.0) and np.all(rbm.b_hid == 0.0)
    again = init_rbm(2, 3, "bernoulli", seed=1)
    assert np.array_equal(rbm.W, again.W)
    other = init_rbm(2, 3, "bernoulli", seed=2)
    assert not np.array_equal(rbm.W, other.W)


def test_hidden_probs_trivial_and_oracle():
    rbm = RbmParams("bernoulli", np.zeros((3, 4)), np.zeros(3), np.zeros(4))
    np.testing.assert_allclose(hidden_probs(rbm, np.ones(3)), 0.5)
    rbm1 = RbmParams("bernoulli", np.array([[2.0]]), np.zeros(1), np.array([-2.0]))
    np.testing.assert_allclose(hidden_probs(rbm1, np.array([1.0])), 0.5)

    rng = np.random.default_rng(4)
    rbm = RbmParams("gaussian", rng.normal(size=(5, 4)), rng.normal(size=5), rng.normal(size=4))
    v = rng.normal(size=5)
    expected = np.array(
        [1.0 / (1.0 + np.exp(-(rbm.b_hid[j] + sum(v[i] * rbm.W[i, j] for i in range(5)))))
         for j in range(4)]
    )
    np.testing.assert_allclose(hidden_probs(rbm, v), expected, atol=1e-12)
    out = hidden_probs(rbm, rng.normal(size=(6, 5)))
    assert np.all((out > 0.0) & (out < 1.0))
    with pytest.raises(ValueError):
        hidden_probs(rbm, np.zeros(4))


def test_sample_bernoulli():
    rng = np.random.default_rng(0)
    assert np.all(sample_bernoulli(np.zeros(10), rng) == 0.0)
    assert np.all(sample_bernoulli(np.ones(10), rng) == 1.0)
    draws = sample_bernoulli(np.full(100_000, 0.5), np.random.default_rng(1))
    assert abs(draws.mean() - 0.5) < 0.01
    a = sample_bernoulli(np.full(50, 0.3), np.random.default_rng(5))
    b = sample_bernoulli(np.full(50, 0.3), np.random.default_rng(5))
    assert np.array_equal(a, b)


def test_reconstruct_visible():
    rbm_g = RbmParams("gaussian", np.zeros((3, 2)), np.array([1.0, -2.0, 0.5]), np.zeros(2))
    np.testing.assert_array_equal(reconstruct_visible(rbm_g, np.ones(2)), rbm_g.b_vis)
    rbm_b = RbmParams("bernoulli", np.zeros((3, 2)), np.zeros(3), np.zeros(2))
    np.testing.assert_allclose(reconstruct_visible(rbm_b, np.ones(2)), 0.5)

    rng = np.random.default_rng(8)
    rbm = RbmParams("bernoulli", rng.normal(size=(3, 2)), rng.normal(size=3), rng.normal(size=2))
    h = rng.random(2)
    expected = np.array(
        [1.0 / (1.0 + np.exp(-(rbm.b_vis[i] + sum(h[j] * rbm.W[i, j] for j in range(2)))))
         for i in range(3)]
    )
    np.testing.assert_allclose(reconstruct_visible(rbm, h), expected, atol=1e-12)


def _cfg(**kw):
    base = dict(learning_rate=0.1, epochs=1, momentum=0.0, weight_decay=0.0,
                minibatch_size=10, seed=0)
    base.update(kw)
    return RbmTrainConfig(**base)


def test_cd1_zero_learning_rate_is_noop():
    rng = np.random.default_rng(2)
    rbm = init_rbm(4, 3, "gaussian", seed=3)
    before = rbm.copy()
    cd1_step(rbm, rng.normal(size=(5, 4)), _cfg(learning_rate=0.0, momentum=0.9,
                                                weight_decay=0.01), RbmVelocity.zeros_like(rbm), rng)
    assert np.array_equal(rbm.W, before.W)
    assert np.array_equal(rbm.b_vis, before.b_vis)
    assert np.array_equal(rbm.b_hid, before.b_hid)


def test_cd1_perfect_reconstruction_gives_zero_update():
    # gaussian units with W=0 reconstruct exactly b_vis; feed that as data
    b_vis = np.array([0.3, -1.2])
    rbm = RbmParams("gaussian", np.zeros((2, 2)), b_vis.copy(), np.array([0.7, -0.4]))
    data = np.tile(b_vis, (6, 1))
    before = rbm.copy()
    cd1_step(rbm, data, _cfg(), RbmVelocity.zeros_like(rbm), np.random.default_rng(0))
    np.testing.assert_array_equal(rbm.W, before.W)
    np.testing.assert_array_equal(rbm.b_vis, before.b_vis)
    np.testing.assert_array_equal(rbm.b_hid, before.b_hid)


def test_cd1_scalar_hand_trace():
    # huge hidden bias makes the hidden sample deterministically 1
    w, bv, bh, v = 0.5, 0.2, 40.0, 0.8
    rbm = RbmParams("gaussian", np.array([[w]]), np.array([bv]), np.array([bh]))
    vel = RbmVelocity.zeros_like(rbm)
    eta = 0.1
    cd1_step(rbm, np.array([[v]]), _cfg(learning_rate=eta), vel, np.random.default_rng(0))
    p1 = expit(bh + v * w)
    v_rec = bv + w  # h sampled to 1
    p2 = expit(bh + v_rec * w)
    np.testing.assert_allclose(rbm.W[0, 0], w + eta * (v * p1 - v_rec * p2), atol=1e-12)
    np.testing.assert_allclose(rbm.b_vis[0], bv + eta * (v - v_rec), atol=1e-12)
    np.testing.assert_allclose(rbm.b_hid[0], bh + eta * (p1 - p2), atol=1e-12)


def test_cd1_momentum_recurrence():
    w, bv, bh, v = 0.5, 0.2, 40.0, 0.8
    eta, mom = 0.1, 0.9
    rbm = RbmParams("gaussian", np.array([[w]]), np.array([bv]), np.array([bh]))
    vel = RbmVelocity.zeros_like(rbm)
    rng = np.random.default_rng(0)
    cfg = _cfg(learning_rate=eta, momentum=mom)
    w0 = rbm.W[0, 0]
    cd1_step(rbm, np.array([[v]]), cfg, vel, rng)
    d1 = rbm.W[0, 0] - w0
    w1, bv1, bh1 = rbm.W[0, 0], rbm.b_vis[0], rbm.b_hid[0]
    cd1_step(rbm, np.array([[v]]), cfg, vel, rng)
    d2 = rbm.W[0, 0] - w1
    # second delta = momentum * first delta + eta * fresh gradient
    p1 = expit(bh1 + v * w1)
    v_rec = bv1 + w1
    p2 = expit(bh1 + v_rec * w1)
    np.testing.assert_allclose(d2, mom * d1 + eta * (v * p1 - v_rec * p2), atol=1e-12)


def test_cd1_dimension_mismatch():
    rbm = init_rbm(3, 2, "gaussian", seed=0)
    with pytest.raises(ValueError):
        cd1_step(rbm, np.zeros((2, 4)), _cfg(), RbmVelocity.zeros_like(rbm),
                 np.random.default_rng(0))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_cd1_divergence_raises():
    rbm = init_rbm(2, 2, "gaussian", seed=0)
    rbm.W[:] = 1e300
    with pytest.raises(NumericalError):
        cd1_step(rbm, np.full((2, 2), 1e300), _cfg(learning_rate=1e300),
                 RbmVelocity.zeros_like(rbm), np.random.default_rng(0))


def _bimodal(seed, n=60):
    rng = np.random.default_rng(seed)
    a = rng.normal([2.0, 2.0], 0.3, size=(n // 2, 2))
    b = rng.normal([-2.0, -2.0], 0.3, size=(n // 2, 2))
    return np.vstack([a, b])


def test_train_rbm_zero_lr_keeps_initialization():
    X = _bimodal(0)
    cfg = _cfg(learning_rate=0.0, epochs=1, seed=5)
    rbm, errors = train_rbm(X, cfg, "gaussian", 4)
    init = init_rbm(2, 4, "gaussian", seed=5)
    assert np.array_equal(rbm.W, init.W)
    assert len(errors) == 1


def test_train_rbm_reduces_reconstruction_error():
    wins = 0
    for seed in range(5):
        cfg = RbmTrainConfig(learning_rate=0.01, epochs=50, momentum=0.9,
                             weight_decay=0.0002, minibatch_size=10, seed=seed)
        _, errors = train_rbm(_bimodal(seed), cfg, "gaussian", 8)
        if errors[-1] < errors[0]:
            wins += 1
    assert wins >= 4


def test_train_rbm_deterministic():
    X = _bimodal(3)
    cfg = _cfg(learning_rate=0.01, epochs=5, momentum=0.9, seed=2)
    r1, e1 = train_rbm(X, cfg, "gaussian", 4)
    r2, e2 = train_rbm(X, cfg, "gaussian", 4)
    assert np.array_equal(r1.W, r2.W)
    assert e1 == e2


def test_rbm_file_roundtrip(tmp_path):
    rbm, _ = train_rbm(_bimodal(1), _cfg(learning_rate=0.01, epochs=3), "gaussian", 4)
    p = tmp_path / "m.rbm"
    save_rbm(rbm, p)
    back = load_rbm(p)
    assert back.visible_kind == rbm.visible_kind
    assert np.array_equal(back.W, rbm.W)
    assert np.array_equal(back.b_vis, rbm.b_vis)
    assert np.array_equal(back.b_hid, rbm.b_hid)
