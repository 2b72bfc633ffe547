"""Stepping, rollout, replay and prior sampling."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import stats

from .. import rng as rng_mod
from ..errors import ConfigurationError, DomainError
from ..policy import Policy, batch_actions
from .dynamics import FAMILIES
from .types import EnvSpec, ParamDistribution, ParamVector, Trajectory


def family(env: EnvSpec):
    try:
        return FAMILIES[env.family]
    except KeyError:
        raise ConfigurationError(f"env {env.env_id!r} has unknown family {env.family!r}") from None


def theta_array(env: EnvSpec, theta: ParamVector | Sequence[float] | np.ndarray) -> np.ndarray:
    """Validate ``theta`` against the env's parameter box and return it as an array."""
    if isinstance(theta, ParamVector):
        values = theta.array
    else:
        values = np.asarray(theta, dtype=float).ravel()
    if values.shape[0] != env.d:
        raise ConfigurationError(f"{env.env_id} has {env.d} parameters, got {values.shape[0]}")
    lo, hi = np.array(env.param_lower), np.array(env.param_upper)
    if np.any(values < lo) or np.any(values > hi):
        raise ConfigurationError(f"theta {values.tolist()} outside bounds of {env.env_id}")
    return values


def noise_mask(env: EnvSpec) -> np.ndarray:
    mask = np.zeros(env.n_s)
    mask[list(env.extras.get("noise_dims", range(env.n_s)))] = 1.0
    return mask


def episode_noise(env: EnvSpec, seed: int, horizon: int | None = None) -> np.ndarray:
    """Scaled process noise (H, n_s) for the episode keyed on ``seed``."""
    horizon = env.horizon if horizon is None else horizon
    if env.sigma_w == 0:
        return np.zeros((horizon, env.n_s))
    return env.sigma_w * noise_mask(env) * rng_mod.standard_noise(seed, horizon, env.n_s)


def noise_batch(env: EnvSpec, seeds: Sequence[int], horizon: int | None = None) -> np.ndarray:
    return np.stack([episode_noise(env, s, horizon) for s in seeds])


def nominal_step(env: EnvSpec, S: np.ndarray, A: np.ndarray, Theta: np.ndarray) -> np.ndarray:
    """Batched noiseless dynamics; clips actions to the action box."""
    A = np.clip(A, env.action_low, env.action_high)
    return family(env).step(env, S, A, Theta)


def simulate(
    env: EnvSpec,
    kind: str,
    params: np.ndarray,
    theta: np.ndarray,
    noise: np.ndarray,
    s0: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Roll out a batch of policies.

    Parameters
    ----------
    params : (B, p) policy parameters, one row per episode.
    theta : (B, d) physics parameters.
    noise : (B, H, n_s) additive process noise, already scaled.
    s0 : (B, n_s) initial states; defaults to the env's fixed initial state.

    Returns
    -------
    states : (B, H+1, n_s)
    actions : (B, H, n_a)
    """
    B, H = noise.shape[0], noise.shape[1]
    low, high = np.array(env.action_low), np.array(env.action_high)
    states = np.empty((B, H + 1, env.n_s))
    actions = np.empty((B, H, env.n_a))
    states[:, 0] = env.init_state if s0 is None else s0
    step = family(env).step
    for h in range(H):
        A = batch_actions(kind, params, h, states[:, h], low, high)
        actions[:, h] = A
        states[:, h + 1] = step(env, states[:, h], A, theta) + noise[:, h]
    return states, actions


def simulate_actions(
    env: EnvSpec, actions: np.ndarray, theta: np.ndarray, noise: np.ndarray, s0: np.ndarray
) -> np.ndarray:
    """Open-loop re-execution of (B, H, n_a) action sequences; returns states."""
    B, H = actions.shape[0], actions.shape[1]
    actions = np.clip(actions, env.action_low, env.action_high)
    states = np.empty((B, H + 1, env.n_s))
    states[:, 0] = s0
    step = family(env).step
    for h in range(H):
        states[:, h + 1] = step(env, states[:, h], actions[:, h], theta) + noise[:, h]
    return states


def step(env: EnvSpec, s, a, theta, w=None) -> np.ndarray:
    """One transition ``f_theta(s, a) + w``; actions outside the box are clipped."""
    s = np.asarray(s, dtype=float).reshape(-1)
    a = np.asarray(a, dtype=float).reshape(-1)
    if s.shape[0] != env.n_s or a.shape[0] != env.n_a:
        raise ConfigurationError(f"state/action shapes do not match {env.env_id}")
    if not np.all(np.isfinite(s)):
        raise DomainError(f"non-finite state {s.tolist()}")
    th = theta_array(env, theta)
    nxt = nominal_step(env, s[None, :], a[None, :], th[None, :])[0]
    if w is not None:
        nxt = nxt + np.asarray(w, dtype=float).reshape(-1)
    return nxt


def rollout(env: EnvSpec, policy: Policy, theta, seed: int, s0=None) -> Trajectory:
    """One episode of ``policy`` under ``theta``; deterministic in ``seed``."""
    policy.check_env(env)
    th = theta_array(env, theta)
    noise = episode_noise(env, seed)[None]
    start = None if s0 is None else np.asarray(s0, dtype=float)[None]
    states, actions = simulate(env, policy.kind, policy.params[None, :], th[None, :], noise, start)
    return Trajectory(states[0], actions[0], env.env_id, seed)


def replay(env: EnvSpec, actions, theta, s1, seed: int) -> Trajectory:
    """Open-loop replay of a recorded action sequence from ``s1``."""
    actions = np.asarray(actions, dtype=float)
    if actions.ndim == 1:
        actions = actions.reshape(-1, env.n_a)
    if actions.ndim != 2 or actions.shape[1] != env.n_a:
        raise ConfigurationError(f"actions must be (H, {env.n_a}), got {actions.shape}")
    s1 = np.asarray(s1, dtype=float).reshape(-1)
    if s1.shape[0] != env.n_s:
        raise ConfigurationError(f"initial state must have {env.n_s} entries")
    th = theta_array(env, theta)
    noise = episode_noise(env, seed, actions.shape[0])[None]
    states = simulate_actions(env, actions[None], th[None], noise, s1[None])
    return Trajectory(states[0], np.clip(actions, env.action_low, env.action_high), env.env_id, seed)


def sample_param_array(q: ParamDistribution, gen: np.random.Generator, n: int) -> np.ndarray:
    """(n, d) draws from the truncated diagonal Gaussian ``q``."""
    mean, std = np.array(q.mean), np.array(q.std)
    lo, hi = np.array(q.lower), np.array(q.upper)
    out = np.empty((n, q.d))
    for i in range(q.d):
        # below this the truncated law is numerically a point mass
        if std[i] <= 1e-12 * max(1.0, abs(mean[i]), hi[i] - lo[i]):
            out[:, i] = np.clip(mean[i], lo[i], hi[i])
            continue
        a, b = (lo[i] - mean[i]) / std[i], (hi[i] - mean[i]) / std[i]
        draws = stats.truncnorm.rvs(a, b, loc=mean[i], scale=std[i], size=n, random_state=gen)
        out[:, i] = np.clip(draws, lo[i], hi[i])
    return out


def sample_params(
    q: ParamDistribution, gen: np.random.Generator, names: Sequence[str] | None = None
) -> ParamVector:
    """One parameter vector drawn from ``q``, always inside its bounds."""
    names = tuple(names) if names is not None else tuple(f"theta{i}" for i in range(q.d))
    return ParamVector(sample_param_array(q, gen, 1)[0], names, q.lower, q.upper)
