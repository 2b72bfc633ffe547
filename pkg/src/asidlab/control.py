"""Downstream task policies trained in simulation and scored on the true system."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from . import rng as rng_mod
from .cem import CemConfig, cem_minimize
from .envlab import (
    EnvSpec,
    ParamDistribution,
    noise_batch,
    sample_param_array,
    simulate,
    task_env,
    theta_array,
)
from .envlab.simulate import family
from .explore import scaled_config, search_space
from .policy import Policy


@dataclass(frozen=True)
class TaskReport:
    policy: Policy
    value_real: float
    value_oracle: float
    suboptimality: float
    success_rate: float
    episodes: int
    # standard error of value_real over episodes
    value_se: float = 0.0
    metric_name: str = "reward"
    metric: float = float("nan")

    def __post_init__(self):
        if not 0.0 <= self.success_rate <= 1.0:
            raise ValueError(f"success_rate {self.success_rate} outside [0, 1]")

    def to_dict(self) -> dict[str, Any]:
        return {
            "policy": self.policy.to_dict(),
            "value_real": self.value_real,
            "value_oracle": self.value_oracle,
            "suboptimality": self.suboptimality,
            "success_rate": self.success_rate,
            "episodes": self.episodes,
            "value_se": self.value_se,
            "metric_name": self.metric_name,
            "metric": self.metric,
        }


def _task_objective(env: EnvSpec, kind: str, sampler, n_samples: int, cem_seed: int, label: str):
    fam = family(env)

    def objective(X, iteration):
        key = rng_mod.derive_seed(cem_seed, label, iteration)
        thetas = sampler(key, n_samples)
        noise = noise_batch(env, [rng_mod.derive_seed(key, "noise", k) for k in range(n_samples)])
        P = X.shape[0]
        states, actions = simulate(
            env,
            kind,
            np.repeat(X, n_samples, axis=0),
            np.tile(thetas, (P, 1)),
            np.tile(noise, (P, 1, 1)),
        )
        return -fam.reward(env, states, actions).reshape(P, n_samples).mean(axis=1)

    return objective


def _optimise(env: EnvSpec, kind: str, objective, cem: CemConfig, stochastic: bool) -> Policy:
    space = search_space(env, kind)
    result = cem_minimize(objective, space.mean, scaled_config(cem, space), space.lower, space.upper, batched=True)
    return Policy.for_env(env, kind, result.solution(stochastic))


def _episodes(env: EnvSpec) -> int:
    # a deterministic env needs a single rollout per candidate
    return 1 if env.sigma_w == 0 else int(env.extras.get("task_rollouts", 4))


def train_task_policy(
    env: EnvSpec, theta_hat, kind: str, cem: CemConfig, n_rollouts: int | None = None
) -> Policy:
    """Maximise expected task reward under the dynamics at ``theta_hat``.

    ``env`` may be the exploration environment; the task is solved in its
    task environment. Rollout noise seeds are fixed within each CEM
    iteration and change between iterations, so in a noisy env the final
    CEM mean is returned rather than the best-ever candidate.
    """
    tenv = task_env(env)
    th = theta_array(tenv, theta_hat)
    n = n_rollouts or _episodes(tenv)
    objective = _task_objective(tenv, kind, lambda key, m: np.tile(th, (m, 1)), n, cem.seed, "task")
    return _optimise(tenv, kind, objective, cem, stochastic=tenv.sigma_w > 0)


def train_dr_policy(
    env: EnvSpec, q0: ParamDistribution, kind: str, cem: CemConfig, n_samples: int = 16
) -> Policy:
    """Maximise reward averaged over ``theta ~ q0`` (domain randomisation).

    One theta-sample set per CEM iteration, shared by the whole population.
    """
    tenv = task_env(env)

    def sampler(key, m):
        return sample_param_array(q0, rng_mod.generator(key, "theta"), m)

    objective = _task_objective(tenv, kind, sampler, n_samples, cem.seed, "dr")
    return _optimise(tenv, kind, objective, cem, stochastic=True)


def rollout_stats(policy: Policy, env: EnvSpec, theta, n_episodes: int, seed: int):
    """Per-episode (reward, success, metric) of ``policy`` on the task env at ``theta``."""
    tenv = task_env(env)
    policy.check_env(tenv)
    th = theta_array(tenv, theta)
    noise = noise_batch(tenv, [rng_mod.derive_seed(seed, "episode", k) for k in range(n_episodes)])
    params = np.tile(policy.params, (n_episodes, 1))
    states, actions = simulate(tenv, policy.kind, params, np.tile(th, (n_episodes, 1)), noise)
    fam = family(tenv)
    reward = fam.reward(tenv, states, actions)
    success = fam.success(tenv, states, actions) if fam.success else np.zeros(n_episodes, bool)
    metric = fam.metric(tenv, states, actions) if fam.metric else reward
    return reward, success, metric


def evaluate(
    policy: Policy,
    env: EnvSpec,
    theta_star,
    n_episodes: int,
    seed: int,
    oracle: Policy | None = None,
    oracle_cem: CemConfig | None = None,
) -> TaskReport:
    """Zero-shot score of ``policy`` on the true parameters.

    The oracle is the same optimiser given ``theta_star``; pass a trained
    ``oracle`` to avoid retraining it per call. Both are scored on the same
    episode seeds.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    if oracle is None:
        oracle = train_task_policy(env, theta_star, policy.kind, oracle_cem or CemConfig(seed=seed))
    reward, success, metric = rollout_stats(policy, env, theta_star, n_episodes, seed)
    oracle_reward, _, _ = rollout_stats(oracle, env, theta_star, n_episodes, seed)
    value, value_oracle = float(reward.mean()), float(oracle_reward.mean())
    se = float(reward.std(ddof=1) / math.sqrt(n_episodes)) if n_episodes > 1 else 0.0
    return TaskReport(
        policy=policy,
        value_real=value,
        value_oracle=value_oracle,
        suboptimality=value_oracle - value,
        success_rate=float(success.mean()),
        episodes=n_episodes,
        value_se=se,
        metric_name=family(task_env(env)).metric_name,
        metric=float(metric.mean()),
    )
