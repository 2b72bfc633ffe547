"""Parameter identification by replay-discrepancy minimisation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from . import rng as rng_mod
from .cem import CemConfig, cem_minimize
from .envlab import EnvSpec, ParamDistribution, ParamVector, Trajectory, noise_batch, simulate_actions, theta_array
from .errors import ConfigurationError


@dataclass(frozen=True)
class IdentificationResult:
    point_estimate: ParamVector
    posterior: ParamDistribution
    discrepancy: float
    evaluations: int
    # False when every evaluated theta explained the data equally well
    identifiable: bool = True

    def __post_init__(self):
        if self.discrepancy < 0:
            raise ValueError("discrepancy must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        return {
            "point_estimate": self.point_estimate.to_dict(),
            "posterior": self.posterior.to_dict(),
            "discrepancy": self.discrepancy,
            "evaluations": self.evaluations,
            "identifiable": self.identifiable,
        }

    @classmethod
    def from_dict(cls, data) -> IdentificationResult:
        return cls(
            point_estimate=ParamVector.from_dict(data["point_estimate"]),
            posterior=ParamDistribution.from_dict(data["posterior"]),
            discrepancy=float(data["discrepancy"]),
            evaluations=int(data["evaluations"]),
            identifiable=bool(data["identifiable"]),
        )


def state_weights(env: EnvSpec, traj: Trajectory) -> np.ndarray:
    """Per-dimension inverse scales for the squared state distance.

    Uniform unless the env mixes state units, in which case each dimension
    is divided by the real trajectory's standard deviation.
    """
    if not env.extras.get("normalize_discrepancy", False):
        return np.ones(env.n_s)
    sd = traj.states.std(axis=0)
    return 1.0 / np.where(sd > 0, sd, 1.0)


def _check(traj: Trajectory, env: EnvSpec) -> None:
    if traj.env_id != env.env_id:
        raise ConfigurationError(f"trajectory from {traj.env_id!r} replayed on {env.env_id!r}")
    if traj.states.shape[1] != env.n_s or traj.actions.shape[1] != env.n_a:
        raise ConfigurationError("trajectory dimensions do not match the environment")


def replay_noise(env: EnvSpec, traj: Trajectory, n_noise_draws: int, seed: int) -> np.ndarray:
    """(max(n, 1), H, n_s) noise for the simulated replays; zeros when n == 0."""
    if n_noise_draws == 0:
        return np.zeros((1, traj.horizon, env.n_s))
    seeds = [rng_mod.derive_seed(seed, "replay", k) for k in range(n_noise_draws)]
    return noise_batch(env, seeds, traj.horizon)


def batch_discrepancy(
    env: EnvSpec, traj: Trajectory, Theta: np.ndarray, noise: np.ndarray, weights: np.ndarray
) -> np.ndarray:
    """Mean weighted squared state distance for each row of Theta (P, d)."""
    P, n = Theta.shape[0], noise.shape[0]
    Th = np.repeat(Theta, n, axis=0)
    W = np.tile(noise, (P, 1, 1))
    acts = np.broadcast_to(traj.actions, (P * n, *traj.actions.shape))
    s0 = np.broadcast_to(traj.states[0], (P * n, env.n_s))
    sim = simulate_actions(env, acts, Th, W, s0)
    err = ((sim - traj.states[None]) * weights) ** 2
    return err.sum(axis=(1, 2)).reshape(P, n).mean(axis=1)


def trajectory_discrepancy(
    traj_real: Trajectory, theta, env: EnvSpec, n_noise_draws: int = 1, seed: int = 0
) -> float:
    """Mean over replays of ``sum_h ||s_h^real - s_h^sim||^2``.

    Each replay plays the real trajectory's actions from its initial state
    under ``theta`` with fresh process noise derived from ``seed``;
    ``n_noise_draws=0`` replays the noiseless dynamics once.
    """
    _check(traj_real, env)
    if n_noise_draws < 0:
        raise ConfigurationError("n_noise_draws must be >= 0")
    th = theta_array(env, theta)[None, :]
    noise = replay_noise(env, traj_real, n_noise_draws, seed)
    return float(batch_discrepancy(env, traj_real, th, noise, state_weights(env, traj_real))[0])


def identify(
    traj_real: Trajectory,
    env: EnvSpec,
    prior: ParamDistribution,
    cem: CemConfig,
    n_noise_draws: int = 1,
) -> IdentificationResult:
    """Estimate theta from one real trajectory with CEM over the discrepancy.

    The search starts from the prior (``cem.init_std`` multiplies the prior
    std) and is confined to the prior's bounds. The posterior is the final
    CEM sampling distribution; the point estimate is the best theta seen.
    """
    _check(traj_real, env)
    lo, hi = np.array(prior.lower), np.array(prior.upper)
    if prior.d != env.d or np.any(lo < env.param_lower) or np.any(hi > env.param_upper):
        raise ConfigurationError("prior bounds must lie inside the environment's parameter bounds")
    weights = state_weights(env, traj_real)

    def objective(X, iteration):
        noise = replay_noise(env, traj_real, n_noise_draws, rng_mod.derive_seed(cem.seed, "sysid", iteration))
        return batch_discrepancy(env, traj_real, X, noise, weights)

    rel = np.broadcast_to(np.asarray(cem.init_std, float), (prior.d,))
    cfg = CemConfig(**{**cem.__dict__, "init_std": tuple(rel * np.array(prior.std))})
    result = cem_minimize(objective, prior.mean, cfg, lo, hi, batched=True)

    floor = np.maximum(cem.min_std, 1e-12 * (hi - lo))
    posterior = ParamDistribution(
        mean=np.clip(result.final_mean, lo, hi),
        std=np.maximum(result.final_std, floor),
        lower=lo,
        upper=hi,
    )
    return IdentificationResult(
        point_estimate=env.params(np.clip(result.best_params, lo, hi)),
        posterior=posterior,
        discrepancy=max(0.0, result.best_value),
        evaluations=cem.population * cem.iterations,
        identifiable=any(h.refit for h in result.history),
    )
