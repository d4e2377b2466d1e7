"""Policy bundle, clipped-surrogate loss with hand-derived gradients, GAE,
and the discounted-return reward normalizer."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .nets import Mlp

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class PpoHyperparams:
    """Tuned defaults of the training setup."""

    learning_rate: float = 1e-4
    clip_range: float = 0.2
    gamma: float = 0.999
    gae_lambda: float = 0.95
    epochs: int = 20
    minibatch_size: int = 64
    rollout_steps: int = 1024
    n_actors: int = 4
    vf_coef: float = 0.88331
    ent_coef: float = 0.0
    max_grad_norm: float = 0.5
    hidden: tuple = (64, 64)
    activation: str = "tanh"
    log_std_init: float = 0.0
    normalize_rewards: bool = True
    reward_clip: float = 10.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PpoHyperparams":
        d = dict(d)
        d["hidden"] = tuple(d.get("hidden", (64, 64)))
        return cls(**d)


class RewardNormalizer:
    """Scales rewards by the running std of the discounted return.

    normalize() first scales with the current statistics (so the very first
    reward passes through against the warmup variance of 1), then folds the
    updated return accumulators into the running variance. Finished episodes
    reset their accumulator. Evaluation must not call normalize(); scaling
    outside training uses scale() which leaves all state untouched.
    """

    def __init__(self, n_streams: int, gamma: float, clip: float = 10.0,
                 epsilon: float = 1e-8):
        self.gamma = gamma
        self.clip = clip
        self.epsilon = epsilon
        self.returns = np.zeros(n_streams)
        self.mean = 0.0
        self.var = 1.0
        self.count = 1e-4

    def scale(self, rewards: np.ndarray) -> np.ndarray:
        scaled = np.asarray(rewards, dtype=np.float64) / np.sqrt(self.var + self.epsilon)
        return np.clip(scaled, -self.clip, self.clip)

    def normalize(self, rewards: np.ndarray, dones: np.ndarray) -> np.ndarray:
        rewards = np.asarray(rewards, dtype=np.float64)
        self.returns = self.gamma * self.returns + rewards
        scaled = self.scale(rewards)
        self._update(self.returns)
        self.returns[np.asarray(dones, dtype=bool)] = 0.0
        return scaled

    def _update(self, batch: np.ndarray):
        n = batch.size
        batch_mean = float(batch.mean())
        batch_var = float(batch.var())
        delta = batch_mean - self.mean
        total = self.count + n
        self.mean += delta * n / total
        m2 = self.var * self.count + batch_var * n + delta * delta * self.count * n / total
        self.var = m2 / total
        self.count = total

    def state_dict(self) -> dict:
        return {"returns": self.returns.copy(), "mean": self.mean,
                "var": self.var, "count": self.count}

    def load_state(self, state: dict):
        self.returns = np.asarray(state["returns"], dtype=np.float64).copy()
        self.mean = float(state["mean"])
        self.var = float(state["var"])
        self.count = float(state["count"])


class DivergenceError(RuntimeError):
    """Raised when a loss or parameter turns non-finite during training."""


def gaussian_log_prob(actions: np.ndarray, mean: np.ndarray,
                      log_std: np.ndarray) -> np.ndarray:
    """Diagonal-Gaussian log density, one value per batch row."""
    z = (actions - mean) / np.exp(log_std)
    return -0.5 * (z * z).sum(axis=-1) - log_std.sum() - 0.5 * len(log_std) * LOG_2PI


def gaussian_entropy(log_std: np.ndarray) -> float:
    return float(log_std.sum() + 0.5 * len(log_std) * (1.0 + LOG_2PI))


class PolicyBundle:
    """Actor/critic parameters plus everything needed to resume training."""

    def __init__(self, obs_dim: int, act_dim: int,
                 hp: PpoHyperparams | None = None, seed: int = 0):
        self.obs_dim = int(obs_dim)
        self.act_dim = int(act_dim)
        self.hp = hp or PpoHyperparams()
        rng = np.random.default_rng(np.random.PCG64(seed))
        hidden = tuple(self.hp.hidden)
        self.actor = Mlp((obs_dim, *hidden, act_dim), self.hp.activation,
                         rng, out_gain=0.01)
        self.critic = Mlp((obs_dim, *hidden, 1), self.hp.activation,
                          rng, out_gain=1.0)
        self.log_std = np.full(act_dim, float(self.hp.log_std_init))
        self.normalizer = RewardNormalizer(self.hp.n_actors, self.hp.gamma,
                                           self.hp.reward_clip)
        self.env_steps = 0
        self.updates = 0

    @property
    def params(self) -> list:
        return self.actor.params + [self.log_std] + self.critic.params

    def set_params(self, arrays):
        arrays = list(arrays)
        n_actor = len(self.actor.params)
        self.actor.set_params(arrays[:n_actor])
        self.log_std = arrays[n_actor]
        self.critic.set_params(arrays[n_actor + 1:])

    def param_shapes(self) -> list:
        return [p.shape for p in self.params]

    def require_finite(self):
        for p in self.params:
            if not np.all(np.isfinite(p)):
                raise DivergenceError("policy bundle holds non-finite parameters")

    def action_mean(self, obs: np.ndarray) -> np.ndarray:
        out = self.actor(np.atleast_2d(obs))
        if not np.all(np.isfinite(out)):
            raise DivergenceError("actor produced non-finite action means")
        return out

    def value(self, obs: np.ndarray) -> np.ndarray:
        return self.critic(np.atleast_2d(obs))[:, 0]

    def sample(self, obs: np.ndarray, rng: np.random.Generator | None = None,
               deterministic: bool = False):
        """Action and log-prob for a single observation.

        Stochastic samples are the raw Gaussian draw (the action interface
        clips); deterministic mode returns the mean.
        """
        mean = self.action_mean(obs)[0]
        if deterministic:
            return mean, float(gaussian_log_prob(mean[None], mean[None], self.log_std)[0])
        z = rng.standard_normal(self.act_dim)
        action = mean + np.exp(self.log_std) * z
        logp = gaussian_log_prob(action[None], mean[None], self.log_std)[0]
        return action, float(logp)

    def policy(self, codec):
        """Deterministic evaluation policy over physical observations."""
        def act(obs):
            return self.action_mean(codec.normalize_observation(obs))[0]
        return act


def compute_gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray,
                last_values: np.ndarray, gamma: float, lam: float):
    """Generalized advantage estimation by backward recursion.

    Shapes (T,) or (T, N). `dones[t]` marks a true terminal after step t
    (next value 0); the rollout's trailing partial episode bootstraps from
    last_values. Returns (advantages, returns = advantages + values).
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    squeeze = rewards.ndim == 1
    rewards = np.atleast_2d(rewards.T).T
    values = np.atleast_2d(np.asarray(values, dtype=np.float64).T).T
    cont = 1.0 - np.atleast_2d(np.asarray(dones, dtype=np.float64).T).T
    nxt = np.atleast_1d(np.asarray(last_values, dtype=np.float64))
    t_len = rewards.shape[0]
    adv = np.zeros_like(rewards)
    carry = np.zeros(rewards.shape[1])
    for t in range(t_len - 1, -1, -1):
        delta = rewards[t] + gamma * cont[t] * nxt - values[t]
        carry = delta + gamma * lam * cont[t] * carry
        adv[t] = carry
        nxt = values[t]
    returns = adv + values
    if squeeze:
        return adv[:, 0], returns[:, 0]
    return adv, returns


def ppo_loss(bundle: PolicyBundle, obs: np.ndarray, actions: np.ndarray,
             old_logp: np.ndarray, advantages: np.ndarray, returns: np.ndarray,
             compute_grads: bool = True):
    """Clipped-surrogate PPO objective on one minibatch.

    loss = -mean(min(ratio*A, clip(ratio)*A)) + vf_coef*mean((V-ret)^2)
           - ent_coef*entropy

    Returns (loss, grads aligned with bundle.params, stats). Advantages are
    used as given; standardization happens per minibatch in the trainer.
    """
    hp = bundle.hp
    obs = np.asarray(obs, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.float64)
    m = len(obs)

    mean, actor_cache = bundle.actor.forward(obs)
    std = np.exp(bundle.log_std)
    z = (actions - mean) / std
    logp = -0.5 * (z * z).sum(axis=1) - bundle.log_std.sum() - 0.5 * bundle.act_dim * LOG_2PI
    ratio = np.exp(logp - old_logp)
    clipped = np.clip(ratio, 1.0 - hp.clip_range, 1.0 + hp.clip_range)
    s_plain = ratio * advantages
    s_clip = clipped * advantages
    policy_loss = -float(np.minimum(s_plain, s_clip).mean())

    v, critic_cache = bundle.critic.forward(obs)
    v = v[:, 0]
    v_err = v - returns
    value_loss = float((v_err * v_err).mean())
    entropy = gaussian_entropy(bundle.log_std)
    loss = policy_loss + hp.vf_coef * value_loss - hp.ent_coef * entropy
    if not np.isfinite(loss):
        raise DivergenceError(f"non-finite loss {loss}; update aborted")

    stats = {
        "loss": loss,
        "policy_loss": policy_loss,
        "value_loss": value_loss,
        "entropy": entropy,
        "clip_fraction": float((np.abs(ratio - 1.0) > hp.clip_range).mean()),
        "approx_kl": float((old_logp - logp).mean()),
    }
    if not compute_grads:
        return loss, None, stats

    # d loss / d logp: active only where the unclipped branch attains the min
    active = (s_plain <= s_clip).astype(np.float64)
    dlogp = -(advantages * ratio * active) / m

    # logp gradients: d/d mean = z/std, d/d log_std per dim = z^2 - 1
    dmean = dlogp[:, None] * (z / std)
    dlog_std = (dlogp[:, None] * (z * z - 1.0)).sum(axis=0)
    dlog_std -= hp.ent_coef  # entropy gradient d entropy / d log_std = 1
    _, actor_grads = bundle.actor.backward(actor_cache, dmean)

    dv = (hp.vf_coef * 2.0 / m) * v_err
    _, critic_grads = bundle.critic.backward(critic_cache, dv[:, None])

    grads = actor_grads + [dlog_std] + critic_grads
    return loss, grads, stats
