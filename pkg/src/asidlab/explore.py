"""Exploration policy synthesis by minimising the domain-randomised A-criterion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as rng_mod
from .cem import CemConfig, CemResult, cem_minimize
from .envlab import EnvSpec, ParamDistribution
from .fisher import FdConfig, batch_a_objective, information_scale, objective_samples
from .policy import Policy, n_params

__all__ = [
    "CemConfig",
    "CemResult",
    "SearchSpace",
    "cem_minimize",
    "random_policy",
    "search_space",
    "train_exploration_policy",
]

GAIN_LIMIT = 10.0


@dataclass(frozen=True)
class SearchSpace:
    """Box and default sampling scale for a policy class on one env."""

    mean: np.ndarray
    scale: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def search_space(env: EnvSpec, kind: str) -> SearchSpace:
    low, high = np.array(env.action_low), np.array(env.action_high)
    centre, half = 0.5 * (low + high), 0.5 * (high - low)
    if kind == "open_loop":
        H = env.horizon
        return SearchSpace(np.tile(centre, H), np.tile(half, H), np.tile(low, H), np.tile(high, H))
    p = n_params(kind, env.n_s, env.n_a, env.horizon)
    gain = float(env.extras.get("gain_scale", 1.0))
    n_k = env.n_a * env.n_s
    mean = np.concatenate([np.zeros(n_k), centre])
    scale = np.concatenate([np.full(n_k, gain), half])
    lower = np.concatenate([np.full(n_k, -GAIN_LIMIT), low])
    upper = np.concatenate([np.full(n_k, GAIN_LIMIT), high])
    assert mean.shape[0] == p
    return SearchSpace(mean, scale, lower, upper)


def scaled_config(cem: CemConfig, space: SearchSpace) -> CemConfig:
    """``cem.init_std`` is read relative to the search space's default scale."""
    rel = np.broadcast_to(np.asarray(cem.init_std, float), space.scale.shape)
    return CemConfig(**{**cem.__dict__, "init_std": tuple(rel * space.scale)})


def random_policy(env: EnvSpec, kind: str, seed: int, init_std: float = 1.0) -> Policy:
    """A policy with parameters drawn from the CEM starting distribution."""
    space = search_space(env, kind)
    gen = rng_mod.generator(seed, "random-policy")
    params = space.mean + init_std * space.scale * gen.standard_normal(space.mean.shape)
    return Policy.for_env(env, kind, np.clip(params, space.lower, space.upper))


def train_exploration_policy(
    env: EnvSpec,
    q0: ParamDistribution,
    kind: str,
    cem: CemConfig,
    fisher_cfg: FdConfig | None = None,
    ridge: float = 1e-3,
    n_rollouts: int = 8,
    info_scale: float | None = None,
    return_result: bool = False,
):
    """Find ``argmin_pi E_{theta ~ q0} tr((I(theta, pi) + ridge Id)^-1)`` with CEM.

    Every candidate in a CEM iteration is scored on the same theta draws and
    noise seeds (common random numbers); the sample set changes between
    iterations.
    """
    fisher_cfg = fisher_cfg or FdConfig()
    scale = information_scale(env, info_scale)
    space = search_space(env, kind)

    def objective(X, iteration):
        thetas, noise = objective_samples(q0, n_rollouts, rng_mod.derive_seed(cem.seed, "explore", iteration), env)
        return batch_a_objective(env, kind, X, thetas, noise, fisher_cfg, ridge, scale)

    result = cem_minimize(
        objective, space.mean, scaled_config(cem, space), space.lower, space.upper, batched=True
    )
    # the theta and noise draws change every iteration: report the final mean
    policy = Policy.for_env(env, kind, result.solution(stochastic=True))
    return (policy, result) if return_result else policy
