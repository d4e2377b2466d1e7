"""PPO building blocks: networks, GAE, loss gradients, Adam, reward scaling,
and the training loop's bookkeeping."""

import math

import numpy as np
import pytest

from chainplan.ppo import (
    Adam,
    DivergenceError,
    PolicyBundle,
    PpoHyperparams,
    RewardNormalizer,
    clip_grads,
    compute_gae,
    deterministic_eval,
    gaussian_log_prob,
    global_norm,
    load_checkpoint,
    ppo_loss,
    save_checkpoint,
    train,
    write_curve_csv,
)


def test_default_hyperparameters_match_published_tuning():
    hp = PpoHyperparams()
    assert hp.learning_rate == 1e-4
    assert hp.clip_range == 0.2
    assert hp.gamma == 0.999
    assert hp.gae_lambda == 0.95
    assert hp.epochs == 20
    assert hp.minibatch_size == 64
    assert hp.rollout_steps == 1024
    assert hp.n_actors == 4
    assert hp.vf_coef == pytest.approx(0.88331)
    assert hp.ent_coef == 0.0
    assert hp.max_grad_norm == 0.5
    assert hp.hidden == (64, 64)
    assert hp.activation == "tanh"


def zeroed_bundle(obs_dim=27, act_dim=14, **hp_kw):
    bundle = PolicyBundle(obs_dim, act_dim, PpoHyperparams(**hp_kw), seed=0)
    bundle.set_params([np.zeros(s) for s in bundle.param_shapes()])
    return bundle


def test_zero_weight_network_outputs_zero():
    bundle = zeroed_bundle()
    obs = np.linspace(-1, 1, 27)
    np.testing.assert_array_equal(bundle.action_mean(obs)[0], 0.0)
    assert bundle.value(obs)[0] == 0.0


def test_fixed_seed_initialization_is_reproducible():
    a = PolicyBundle(27, 14, seed=9)
    b = PolicyBundle(27, 14, seed=9)
    for pa, pb in zip(a.params, b.params):
        np.testing.assert_array_equal(pa, pb)
    c = PolicyBundle(27, 14, seed=10)
    assert any((pa != pc).any() for pa, pc in zip(a.params, c.params))
    obs = np.full(27, 0.25)
    np.testing.assert_array_equal(a.action_mean(obs), b.action_mean(obs))


def test_deterministic_sample_log_prob_closed_form():
    """Mean 0, std 1 at the mean: log density is 14 * (-0.5 * ln(2 pi))."""
    bundle = zeroed_bundle()
    action, logp = bundle.sample(np.zeros(27), deterministic=True)
    np.testing.assert_array_equal(action, 0.0)
    assert logp == pytest.approx(14 * (-0.5 * math.log(2 * math.pi)))
    assert logp == pytest.approx(-12.865, abs=5e-4)


def test_tiny_std_sample_collapses_to_mean():
    bundle = zeroed_bundle()
    bundle.log_std[:] = -40.0
    action, _ = bundle.sample(np.zeros(27), rng=np.random.default_rng(0))
    np.testing.assert_allclose(action, 0.0, atol=1e-15)
    a1, _ = bundle.sample(np.zeros(27), deterministic=True)
    a2, _ = bundle.sample(np.zeros(27), deterministic=True)
    np.testing.assert_array_equal(a1, a2)


def test_gaussian_log_prob_batch_shape():
    logp = gaussian_log_prob(np.zeros((5, 3)), np.zeros((5, 3)), np.zeros(3))
    np.testing.assert_allclose(logp, 3 * (-0.5 * math.log(2 * math.pi)))


# ---- GAE ----

def test_gae_single_step():
    adv, ret = compute_gae(np.array([1.0]), np.array([0.0]), np.array([True]),
                           np.array([0.0]), gamma=1.0, lam=1.0)
    assert adv[0] == 1.0 and ret[0] == 1.0


def test_gae_two_step_telescoping():
    adv, ret = compute_gae(np.array([1.0, 2.0]), np.zeros(2),
                           np.array([False, True]), np.array([0.0]),
                           gamma=1.0, lam=1.0)
    np.testing.assert_array_equal(adv, [3.0, 2.0])
    np.testing.assert_array_equal(ret, [3.0, 2.0])


def gae_series_oracle(rewards, values, dones, last_value, gamma, lam):
    """Direct (gamma*lam)-weighted delta sums with episode-boundary resets."""
    t_len = len(rewards)
    cont = 1.0 - dones.astype(float)
    adv = np.zeros(t_len)
    for t in range(t_len):
        acc = 0.0
        weight = 1.0
        for k in range(t, t_len):
            nxt = values[k + 1] if k + 1 < t_len else last_value
            delta = rewards[k] + gamma * cont[k] * nxt - values[k]
            acc += weight * delta
            if cont[k] == 0.0:
                break
            weight *= gamma * lam
        adv[t] = acc
    return adv


def test_gae_matches_series_oracle():
    rng = np.random.default_rng(77)
    rewards = rng.normal(size=50)
    values = rng.normal(size=50)
    dones = rng.random(50) < 0.1
    last_value = float(rng.normal())
    adv, ret = compute_gae(rewards, values, dones, np.array([last_value]),
                           gamma=0.99, lam=0.95)
    oracle = gae_series_oracle(rewards, values, dones, last_value, 0.99, 0.95)
    np.testing.assert_allclose(adv, oracle, atol=1e-10, rtol=0)
    np.testing.assert_allclose(ret, oracle + values, atol=1e-10, rtol=0)


def test_gae_vectorized_columns_match_single():
    rng = np.random.default_rng(3)
    rewards = rng.normal(size=(20, 4))
    values = rng.normal(size=(20, 4))
    dones = rng.random((20, 4)) < 0.15
    last = rng.normal(size=4)
    adv, ret = compute_gae(rewards, values, dones, last, gamma=0.999, lam=0.9)
    for n in range(4):
        a1, r1 = compute_gae(rewards[:, n], values[:, n], dones[:, n],
                             last[n:n + 1], gamma=0.999, lam=0.9)
        np.testing.assert_allclose(adv[:, n], a1, atol=1e-12)
        np.testing.assert_allclose(ret[:, n], r1, atol=1e-12)


# ---- clipped surrogate loss ----

def single_sample_loss(advantage, log_ratio, vf_coef=0.0):
    """Loss for one transition where the bundle's own logp defines ratio
    exp(-log_ratio) relative to old_logp."""
    bundle = zeroed_bundle(obs_dim=4, act_dim=2, vf_coef=vf_coef, ent_coef=0.0,
                           hidden=(4, 4))
    obs = np.zeros((1, 4))
    actions = np.zeros((1, 2))
    logp_now = float(gaussian_log_prob(actions, actions, bundle.log_std)[0])
    old_logp = np.array([logp_now - log_ratio])
    loss, grads, stats = ppo_loss(bundle, obs, actions, old_logp,
                                  np.array([advantage]), np.zeros(1))
    return loss, stats


def test_surrogate_hand_values():
    # ratio 1.5, eps 0.2, A = 1 -> surrogate min(1.5, 1.2) = 1.2
    loss, _ = single_sample_loss(1.0, math.log(1.5))
    assert loss == pytest.approx(-1.2, abs=1e-12)
    # ratio 0.5, eps 0.2, A = -1 -> min(-0.5, -0.8) = -0.8
    loss, _ = single_sample_loss(-1.0, math.log(0.5))
    assert loss == pytest.approx(0.8, abs=1e-12)


def test_clip_is_inert_at_ratio_one():
    rng = np.random.default_rng(8)
    bundle = PolicyBundle(5, 3, PpoHyperparams(hidden=(4, 4), vf_coef=0.0,
                                               ent_coef=0.0), seed=2)
    obs = rng.uniform(-1, 1, (6, 5))
    mean = bundle.action_mean(obs)
    actions = mean + rng.normal(size=mean.shape)
    old_logp = gaussian_log_prob(actions, mean, bundle.log_std)
    adv = rng.normal(size=6)
    loss, _, stats = ppo_loss(bundle, obs, actions, old_logp, adv, np.zeros(6))
    assert loss == pytest.approx(-adv.mean(), rel=1e-12)
    assert stats["clip_fraction"] == 0.0
    assert stats["approx_kl"] == pytest.approx(0.0, abs=1e-12)


def test_non_finite_loss_raises_divergence_error():
    bundle = zeroed_bundle(obs_dim=4, act_dim=2, hidden=(4, 4))
    before = [p.copy() for p in bundle.params]
    with pytest.raises(DivergenceError):
        ppo_loss(bundle, np.zeros((1, 4)), np.zeros((1, 2)),
                 np.array([0.0]), np.array([np.inf]), np.zeros(1))
    for p, b in zip(bundle.params, before):
        np.testing.assert_array_equal(p, b)


def test_non_finite_parameters_raise_corrupted_bundle_error():
    bundle = zeroed_bundle(obs_dim=4, act_dim=2, hidden=(4, 4))
    bad = [p.copy() for p in bundle.params]
    bad[0][0, 0] = np.nan
    bundle.set_params(bad)
    with pytest.raises(DivergenceError):
        bundle.action_mean(np.zeros(4))


def fd_max_rel_err(bundle, batch, step=1e-5):
    """Central finite differences of the full loss against analytic grads."""
    _, grads, _ = ppo_loss(bundle, **batch)
    params = [p.copy() for p in bundle.params]
    worst = 0.0
    for i, base in enumerate(params):
        flat = base.ravel()
        gflat = grads[i].ravel()
        for j in range(flat.size):
            keep = flat[j]
            flat[j] = keep + step
            bundle.set_params(params)
            up, _, _ = ppo_loss(bundle, **batch, compute_grads=False)
            flat[j] = keep - step
            bundle.set_params(params)
            down, _, _ = ppo_loss(bundle, **batch, compute_grads=False)
            flat[j] = keep
            numeric = (up - down) / (2 * step)
            err = abs(numeric - gflat[j]) / max(abs(numeric), abs(gflat[j]), 1e-6)
            worst = max(worst, err)
    bundle.set_params(params)
    return worst


def gradient_check_batch(seed=12):
    """Downsized bundle and an 8-transition minibatch with ratios straddling
    the clip boundary."""
    rng = np.random.default_rng(seed)
    hp = PpoHyperparams(hidden=(4, 4), vf_coef=0.7, ent_coef=0.01,
                        clip_range=0.2)
    bundle = PolicyBundle(6, 3, hp, seed=seed)
    obs = rng.uniform(-1, 1, (8, 6))
    mean = bundle.action_mean(obs)
    actions = mean + rng.normal(size=mean.shape)
    logp = gaussian_log_prob(actions, mean, bundle.log_std)
    batch = {
        "obs": obs,
        "actions": actions,
        "old_logp": logp + rng.uniform(-0.3, 0.3, 8),
        "advantages": rng.normal(size=8),
        "returns": rng.normal(size=8),
    }
    return bundle, batch


def test_loss_gradients_match_finite_differences():
    bundle, batch = gradient_check_batch()
    assert fd_max_rel_err(bundle, batch) <= 1e-4


def test_value_gradient_matches_finite_differences():
    """Critic-only direction: zero advantages isolate the value-loss term."""
    bundle, batch = gradient_check_batch(seed=21)
    batch["advantages"] = np.zeros(8)
    assert fd_max_rel_err(bundle, batch) <= 1e-4


# ---- optimizer ----

def test_gradient_norm_clipping():
    grads = [np.array([1.2, 1.6])]  # global norm 2.0
    assert global_norm(grads) == pytest.approx(2.0)
    clipped, norm = clip_grads(grads, 0.5)
    assert norm == pytest.approx(2.0)
    np.testing.assert_allclose(clipped[0], [0.3, 0.4])
    small = [np.array([0.1])]
    np.testing.assert_array_equal(clip_grads(small, 0.5)[0][0], small[0])


def test_adam_first_step_is_bias_corrected():
    opt = Adam([(1,)], lr=0.1)
    new = opt.step([np.zeros(1)], [np.ones(1)])
    assert new[0][0] == pytest.approx(-0.1, rel=1e-6)


def test_adam_zero_gradient_keeps_parameters():
    opt = Adam([(2,)], lr=0.1)
    params = [np.array([3.0, -4.0])]
    new = opt.step(params, [np.zeros(2)])
    np.testing.assert_array_equal(new[0], params[0])


# ---- reward normalization ----

def test_first_reward_passes_through():
    norm = RewardNormalizer(1, gamma=0.99)
    out = norm.normalize(np.array([2.5]), np.array([False]))
    assert out[0] == pytest.approx(2.5, rel=1e-7)


def test_constant_stream_with_gamma_zero_stabilizes():
    norm = RewardNormalizer(1, gamma=0.0)
    outs = [norm.normalize(np.array([-1.0]), np.array([False]))[0]
            for _ in range(200)]
    # variance of a constant return series collapses toward zero, so the
    # scaled value saturates at the clip bound and stays there
    assert norm.var == pytest.approx(0.0, abs=1e-3)
    assert outs[-1] == -10.0 and outs[-2] == outs[-1]


def test_outputs_respect_clip_bound():
    norm = RewardNormalizer(3, gamma=0.999)
    out = norm.normalize(np.array([-1e12, 1e12, 0.0]), np.zeros(3, bool))
    assert (out >= -10.0).all() and (out <= 10.0).all()
    assert out[0] == -10.0 and out[1] == 10.0


def test_done_resets_return_accumulator():
    norm = RewardNormalizer(2, gamma=0.9)
    norm.normalize(np.array([1.0, 1.0]), np.array([True, False]))
    assert norm.returns[0] == 0.0
    assert norm.returns[1] == 1.0


def test_scale_leaves_state_untouched():
    norm = RewardNormalizer(1, gamma=0.99)
    norm.normalize(np.array([4.0]), np.array([False]))
    state = norm.state_dict()
    norm.scale(np.array([123.0]))
    after = norm.state_dict()
    assert state["var"] == after["var"] and state["count"] == after["count"]


# ---- training loop ----

SMOKE_HP = PpoHyperparams(rollout_steps=64, n_actors=2, epochs=2,
                          minibatch_size=32, hidden=(8, 8))


def smoke_train(catalog, seed=1, total_steps=384, **kw):
    return train(catalog["rN0cl"], seed=seed, total_steps=total_steps,
                 hp=SMOKE_HP, eval_every=128, eval_episodes=1, **kw)


def test_train_evaluation_cadence_and_bookkeeping(catalog, tmp_path):
    res = smoke_train(catalog, out_dir=str(tmp_path))
    assert res.env_steps == 384
    assert len(res.curve) == 384 // 128
    assert [r["env_steps"] for r in res.curve] == [128, 256, 384]
    assert not res.diverged
    assert res.best_cost <= res.curve[-1]["eval_mean_cost"] + 1e-9
    assert res.best_cost == min(r["eval_mean_cost"] for r in res.curve)
    assert res.checkpoint_path is not None

    csv_path = tmp_path / "curve.csv"
    write_curve_csv(res.curve, str(csv_path))
    lines = csv_path.read_text().strip().splitlines()
    assert lines[1].split(",") == ["env_steps", "eval_mean_cost",
                                   "eval_std_cost", "is_best"]
    assert len(lines) == 2 + len(res.curve)


def test_train_is_bit_reproducible(catalog):
    a = smoke_train(catalog)
    b = smoke_train(catalog)
    assert [r["eval_mean_cost"] for r in a.curve] == [r["eval_mean_cost"]
                                                      for r in b.curve]
    for pa, pb in zip(a.final_bundle.params, b.final_bundle.params):
        np.testing.assert_array_equal(pa, pb)
    c = smoke_train(catalog, seed=2)
    assert [r["eval_mean_cost"] for r in a.curve] != [r["eval_mean_cost"]
                                                      for r in c.curve]


def test_checkpoint_round_trip(catalog, tmp_path):
    from chainplan.simulator import SupplyChainEnv

    res = smoke_train(catalog)
    path = str(tmp_path / "bundle.npz")
    save_checkpoint(res.best_bundle, path, extra={"note": "smoke"})
    loaded = load_checkpoint(path)
    for pa, pb in zip(res.best_bundle.params, loaded.params):
        np.testing.assert_array_equal(pa, pb)
    env = SupplyChainEnv(catalog["rN0cl"])
    costs_a = deterministic_eval(res.best_bundle, env, [11, 12])
    costs_b = deterministic_eval(loaded, env, [11, 12])
    np.testing.assert_array_equal(costs_a, costs_b)


def test_train_callback_can_stop_early(catalog):
    res = smoke_train(catalog, total_steps=10_000,
                      callback=lambda record: True)
    assert res.stopped
    assert res.env_steps < 10_000
