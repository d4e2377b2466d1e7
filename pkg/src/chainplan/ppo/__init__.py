"""From-scratch PPO: numpy networks, clipped surrogate, GAE, training loop."""

from .agent import (
    DivergenceError,
    PolicyBundle,
    PpoHyperparams,
    RewardNormalizer,
    compute_gae,
    gaussian_entropy,
    gaussian_log_prob,
    ppo_loss,
)
from .nets import Adam, Mlp, clip_grads, global_norm, orthogonal
from .train import (
    TrainResult,
    clone_bundle,
    deterministic_eval,
    load_checkpoint,
    save_checkpoint,
    train,
    write_curve_csv,
)

__all__ = [
    "Adam",
    "DivergenceError",
    "Mlp",
    "PolicyBundle",
    "PpoHyperparams",
    "RewardNormalizer",
    "TrainResult",
    "clip_grads",
    "clone_bundle",
    "compute_gae",
    "deterministic_eval",
    "gaussian_entropy",
    "gaussian_log_prob",
    "global_norm",
    "load_checkpoint",
    "orthogonal",
    "ppo_loss",
    "save_checkpoint",
    "train",
    "write_curve_csv",
]
