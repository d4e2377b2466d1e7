"""Training loop: synchronized actors, clipped-surrogate updates, periodic
deterministic evaluation with best-checkpoint tracking.

All randomness (episode seeds, exploration noise, minibatch shuffling,
parameter init, evaluation episodes) derives from the one training seed
through labeled substreams, so a run is bit-for-bit reproducible and the
per-actor streams do not depend on scheduling.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from ..chain import ScenarioSpec
from ..simulator import SupplyChainEnv
from ..stochastic import derive_seed
from .agent import (
    DivergenceError,
    PolicyBundle,
    PpoHyperparams,
    compute_gae,
    gaussian_log_prob,
    ppo_loss,
)
from .nets import Adam, clip_grads

# substream labels under the training seed
_INIT, _ACTOR_NOISE, _EPISODES, _SHUFFLE, _EVAL = 11, 12, 13, 14, 15


@dataclass
class TrainResult:
    curve: list = field(default_factory=list)  # rows: env_steps, eval costs
    best_cost: float = np.inf
    best_bundle: PolicyBundle | None = None
    final_bundle: PolicyBundle | None = None
    env_steps: int = 0
    wall_time: float = 0.0
    train_episodes: list = field(default_factory=list)  # (env_steps, raw cost)
    checkpoint_path: str | None = None
    diverged: bool = False
    stopped: bool = False  # a callback ended the run before total_steps


def deterministic_eval(bundle: PolicyBundle, env: SupplyChainEnv,
                       episode_seeds) -> np.ndarray:
    """Total raw episode costs of the mean-action policy."""
    costs = np.empty(len(episode_seeds))
    codec = env.codec
    for k, s in enumerate(episode_seeds):
        obs = env.reset(int(s))
        done = False
        while not done:
            action = bundle.action_mean(codec.normalize_observation(obs))[0]
            out = env.step(action)
            obs = out.observation
            done = out.done
        costs[k] = env.total_cost
    return costs


def clone_bundle(bundle: PolicyBundle) -> PolicyBundle:
    clone = PolicyBundle(bundle.obs_dim, bundle.act_dim, bundle.hp, seed=0)
    clone.set_params([p.copy() for p in bundle.params])
    clone.normalizer.load_state(bundle.normalizer.state_dict())
    clone.env_steps = bundle.env_steps
    clone.updates = bundle.updates
    return clone


def train(scenario: ScenarioSpec, seed: int, total_steps: int,
          hp: PpoHyperparams | None = None, eval_every: int = 18_000,
          eval_episodes: int = 10, out_dir: str | None = None,
          callback=None, verbose: bool = False) -> TrainResult:
    """Run PPO until at least total_steps environment steps are collected.

    One evaluation record is emitted per crossed multiple of eval_every.
    callback(record) may return True to stop early (used by the tuner).
    """
    hp = hp or PpoHyperparams()
    t0 = time.time()
    n = hp.n_actors
    envs = [SupplyChainEnv(scenario) for _ in range(n)]
    codec = envs[0].codec
    bundle = PolicyBundle(codec.obs_dim, codec.action_dim, hp,
                          seed=derive_seed(seed, _INIT))
    noise_rngs = [np.random.default_rng(np.random.PCG64(derive_seed(seed, _ACTOR_NOISE, a)))
                  for a in range(n)]
    shuffle_rng = np.random.default_rng(np.random.PCG64(derive_seed(seed, _SHUFFLE)))
    eval_env = SupplyChainEnv(scenario)
    eval_seeds = [derive_seed(seed, _EVAL, k) for k in range(eval_episodes)]
    adam = Adam(bundle.param_shapes(), hp.learning_rate)

    episode_counter = [0] * n
    episode_cost = [0.0] * n

    def reset_actor(a):
        s = derive_seed(seed, _EPISODES, a, episode_counter[a])
        episode_counter[a] += 1
        episode_cost[a] = 0.0
        return codec.normalize_observation(envs[a].reset(s))

    obs = np.stack([reset_actor(a) for a in range(n)])
    t_len = hp.rollout_steps
    obs_buf = np.empty((t_len, n, codec.obs_dim))
    act_buf = np.empty((t_len, n, codec.action_dim))
    logp_buf = np.empty((t_len, n))
    val_buf = np.empty((t_len, n))
    rew_buf = np.empty((t_len, n))
    done_buf = np.empty((t_len, n))

    result = TrainResult()
    std_floor = np.exp(-20)
    evals_done = 0
    stop = False

    while result.env_steps < total_steps and not stop:
        for t in range(t_len):
            means = bundle.actor(obs)
            values = bundle.critic(obs)[:, 0]
            std = np.maximum(np.exp(bundle.log_std), std_floor)
            noise = np.stack([noise_rngs[a].standard_normal(codec.action_dim)
                              for a in range(n)])
            actions = means + std * noise
            logps = gaussian_log_prob(actions, means, bundle.log_std)
            obs_buf[t] = obs
            act_buf[t] = actions
            logp_buf[t] = logps
            val_buf[t] = values
            raw_rewards = np.empty(n)
            dones = np.zeros(n)
            for a in range(n):
                out = envs[a].step(actions[a])
                raw_rewards[a] = out.reward
                episode_cost[a] -= out.reward
                if out.done:
                    dones[a] = 1.0
                    result.train_episodes.append(
                        (result.env_steps + (t + 1) * n, episode_cost[a]))
                    obs[a] = reset_actor(a)
                else:
                    obs[a] = codec.normalize_observation(out.observation)
            if hp.normalize_rewards:
                rew_buf[t] = bundle.normalizer.normalize(raw_rewards, dones)
            else:
                rew_buf[t] = raw_rewards
            done_buf[t] = dones

        last_values = bundle.critic(obs)[:, 0]
        adv, ret = compute_gae(rew_buf, val_buf, done_buf, last_values,
                               hp.gamma, hp.gae_lambda)
        flat = t_len * n
        obs_flat = obs_buf.reshape(flat, -1)
        act_flat = act_buf.reshape(flat, -1)
        logp_flat = logp_buf.reshape(flat)
        adv_flat = adv.reshape(flat)
        ret_flat = ret.reshape(flat)

        try:
            for _ in range(hp.epochs):
                perm = shuffle_rng.permutation(flat)
                for start in range(0, flat, hp.minibatch_size):
                    idx = perm[start:start + hp.minibatch_size]
                    if len(idx) < 2:
                        continue
                    a_mb = adv_flat[idx]
                    a_mb = (a_mb - a_mb.mean()) / (a_mb.std() + 1e-8)
                    _, grads, _ = ppo_loss(bundle, obs_flat[idx], act_flat[idx],
                                           logp_flat[idx], a_mb, ret_flat[idx])
                    grads, _ = clip_grads(grads, hp.max_grad_norm)
                    bundle.set_params(adam.step(bundle.params, grads))
                    bundle.updates += 1
        except DivergenceError:
            # abort training; parameters before the failed minibatch survive,
            # and the best checkpoint so far is the run's outcome
            result.diverged = True
            stop = True

        result.env_steps += flat
        bundle.env_steps = result.env_steps

        target = result.env_steps // eval_every
        if target > evals_done:
            costs = deterministic_eval(bundle, eval_env, eval_seeds)
            mean_cost = float(costs.mean())
            std_cost = float(costs.std())
            improved = mean_cost < result.best_cost
            if improved:
                result.best_cost = mean_cost
                result.best_bundle = clone_bundle(bundle)
                if out_dir:
                    result.checkpoint_path = os.path.join(out_dir, "best.npz")
                    save_checkpoint(result.best_bundle, result.checkpoint_path,
                                    {"scenario": scenario.name, "seed": seed,
                                     "eval_mean_cost": mean_cost})
            while evals_done < target:
                evals_done += 1
                record = {"env_steps": evals_done * eval_every,
                          "eval_mean_cost": mean_cost,
                          "eval_std_cost": std_cost,
                          "is_best": int(improved)}
                result.curve.append(record)
                improved = False
                if callback is not None and callback(record):
                    stop = True
                    result.stopped = True
            if verbose:
                print(f"steps {result.env_steps:>10,}  eval cost "
                      f"{mean_cost:>14,.0f}  best {result.best_cost:>14,.0f}")

    result.final_bundle = bundle
    if result.best_bundle is None:
        result.best_bundle = clone_bundle(bundle)
        result.best_cost = float(deterministic_eval(bundle, eval_env, eval_seeds).mean())
    result.wall_time = time.time() - t0
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        save_checkpoint(bundle, os.path.join(out_dir, "final.npz"),
                        {"scenario": scenario.name, "seed": seed})
        if result.checkpoint_path is None:
            result.checkpoint_path = os.path.join(out_dir, "best.npz")
            save_checkpoint(result.best_bundle, result.checkpoint_path,
                            {"scenario": scenario.name, "seed": seed,
                             "eval_mean_cost": result.best_cost})
        write_curve_csv(result.curve, os.path.join(out_dir, "curve.csv"))
    return result


def write_curve_csv(curve, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# chainplan learning-curve v1: one row per evaluation\n")
        fh.write("env_steps,eval_mean_cost,eval_std_cost,is_best\n")
        for row in curve:
            fh.write(f"{row['env_steps']},{row['eval_mean_cost']:.6f},"
                     f"{row['eval_std_cost']:.6f},{row['is_best']}\n")


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(bundle: PolicyBundle, path: str, extra: dict | None = None):
    """Atomic, self-describing checkpoint of a whole PolicyBundle."""
    arrays = {}
    for i, p in enumerate(bundle.actor.params):
        arrays[f"actor_{i}"] = p
    for i, p in enumerate(bundle.critic.params):
        arrays[f"critic_{i}"] = p
    arrays["log_std"] = bundle.log_std
    arrays["norm_returns"] = bundle.normalizer.returns
    meta = {
        "version": CHECKPOINT_VERSION,
        "obs_dim": bundle.obs_dim,
        "act_dim": bundle.act_dim,
        "hp": bundle.hp.to_dict(),
        "normalizer": {"mean": bundle.normalizer.mean,
                       "var": bundle.normalizer.var,
                       "count": bundle.normalizer.count},
        "env_steps": bundle.env_steps,
        "updates": bundle.updates,
        "extra": extra or {},
    }
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    tmp = path + ".tmp.npz"
    with open(tmp, "wb") as fh:
        np.savez(fh, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
                 **arrays)
    os.replace(tmp, path)


def load_checkpoint(path: str) -> PolicyBundle:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        hp = PpoHyperparams.from_dict(meta["hp"])
        bundle = PolicyBundle(meta["obs_dim"], meta["act_dim"], hp, seed=0)
        actor = [data[f"actor_{i}"] for i in range(len(bundle.actor.params))]
        critic = [data[f"critic_{i}"] for i in range(len(bundle.critic.params))]
        bundle.set_params(actor + [data["log_std"]] + critic)
        bundle.normalizer.load_state({"returns": data["norm_returns"],
                                      **meta["normalizer"]})
        bundle.env_steps = meta["env_steps"]
        bundle.updates = meta["updates"]
    return bundle
