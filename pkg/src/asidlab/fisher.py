"""Finite-difference parameter Jacobians and Fisher information.

Under additive Gaussian process noise ``s' = f_theta(s, a) + w`` with
``w ~ N(0, sigma_w^2 I)``, the information carried by one trajectory is
``sigma_w^-2 * sum_h J_h^T J_h`` with ``J_h = d f_theta(s_h, a_h) / d theta``.
The Jacobians are taken numerically so the dynamics may be non-smooth.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import rng as rng_mod
from .envlab import (
    EnvSpec,
    ParamDistribution,
    Trajectory,
    noise_batch,
    nominal_step,
    sample_param_array,
    simulate,
    theta_array,
)
from .errors import ConfigurationError, DomainError
from .policy import Policy

SYMMETRY_RTOL = 1e-12
PSD_RTOL = 1e-10


class FdFallbackWarning(RuntimeWarning):
    """A central difference would leave the parameter box; a one-sided one was used."""


@dataclass(frozen=True)
class FdConfig:
    step: float = 1e-4
    relative: bool = True

    def __post_init__(self):
        if not self.step > 0:
            raise ConfigurationError(f"finite-difference step must be positive, got {self.step}")


@dataclass(frozen=True, eq=False)
class FisherMatrix:
    """Symmetric positive semi-definite information matrix."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.array(self.entries, dtype=float)
        if m.ndim == 0:
            m = m.reshape(1, 1)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DomainError(f"Fisher matrix must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise DomainError("Fisher matrix has non-finite entries")
        scale = max(1.0, float(np.max(np.abs(m))))
        if np.max(np.abs(m - m.T)) > SYMMETRY_RTOL * scale:
            raise DomainError("Fisher matrix is not symmetric")
        if np.min(np.linalg.eigvalsh(m)) < -PSD_RTOL * scale:
            raise DomainError("Fisher matrix is not positive semi-definite")
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    def a_criterion(self, ridge: float) -> float:
        """tr((I + ridge * Id)^-1)."""
        return float(np.trace(np.linalg.inv(self.entries + ridge * np.eye(self.d))))


def _fd_points(env: EnvSpec, Theta: np.ndarray, cfg: FdConfig):
    lo, hi = np.array(env.param_lower), np.array(env.param_upper)
    h = cfg.step * (np.maximum(1.0, np.abs(Theta)) if cfg.relative else np.ones_like(Theta))
    plus, minus = Theta + h, Theta - h
    over, under = plus > hi, minus < lo
    # one side out: fall back to the one-sided difference through theta itself
    plus = np.where(over & ~under, Theta, plus)
    minus = np.where(under & ~over, Theta, minus)
    both = over & under
    plus = np.where(both, np.minimum(plus, hi), plus)
    minus = np.where(both, np.maximum(minus, lo), minus)
    return plus, minus, over | under


def batch_param_jacobians(
    env: EnvSpec, S: np.ndarray, A: np.ndarray, Theta: np.ndarray, cfg: FdConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Jacobians d f / d theta for N state-action-parameter triples.

    Returns ``(J, fallback)`` with J of shape (N, n_s, d) and ``fallback`` an
    (N, d) mask of columns that used a one-sided difference.
    """
    N, d = Theta.shape
    plus, minus, fallback = _fd_points(env, Theta, cfg)
    # stack all 2d perturbed parameter sets into one batched call
    Tp = np.repeat(Theta[None], d, axis=0)
    Tm = Tp.copy()
    idx = np.arange(d)
    Tp[idx, :, idx] = plus.T
    Tm[idx, :, idx] = minus.T
    Theta_all = np.concatenate([Tp, Tm]).reshape(2 * d * N, d)
    S_all = np.tile(S, (2 * d, 1))
    A_all = np.tile(A, (2 * d, 1))
    F = nominal_step(env, S_all, A_all, Theta_all).reshape(2, d, N, env.n_s)
    span = (plus - minus).T  # (d, N)
    safe = np.where(span > 0, span, 1.0)
    J = np.where(span[..., None] > 0, (F[0] - F[1]) / safe[..., None], 0.0)  # (d, N, n_s)
    return np.transpose(J, (1, 2, 0)), fallback


def fd_param_jacobian(env: EnvSpec, s, a, theta, cfg: FdConfig | None = None) -> np.ndarray:
    """Central-difference Jacobian of the noiseless step w.r.t. theta, shape (n_s, d).

    Column i is ``(f(theta + h e_i) - f(theta - h e_i)) / (2 h_i)``. Near the
    parameter bounds a one-sided difference is used and an
    :class:`FdFallbackWarning` is emitted.
    """
    cfg = cfg or FdConfig()
    s = np.asarray(s, dtype=float).reshape(1, -1)
    a = np.asarray(a, dtype=float).reshape(1, -1)
    if s.shape[1] != env.n_s or a.shape[1] != env.n_a:
        raise ConfigurationError(f"state/action shapes do not match {env.env_id}")
    if not np.all(np.isfinite(s)):
        raise DomainError("non-finite state")
    th = theta_array(env, theta)[None, :]
    J, fallback = batch_param_jacobians(env, s, a, th, cfg)
    if fallback.any():
        warnings.warn(
            f"finite difference for parameters {np.flatnonzero(fallback[0]).tolist()} "
            "used a one-sided step at the parameter bounds",
            FdFallbackWarning,
            stacklevel=2,
        )
    return J[0]


def information_scale(env: EnvSpec, info_scale: float | None = None) -> float:
    if info_scale is not None:
        if not info_scale > 0:
            raise ConfigurationError("info_scale must be positive")
        return float(info_scale)
    if env.sigma_w == 0:
        raise DomainError(
            f"{env.env_id} has sigma_w = 0, so sigma_w^-2 is undefined; "
            "pass an explicit info_scale"
        )
    return env.sigma_w**-2


def batch_fisher(
    env: EnvSpec,
    states: np.ndarray,
    actions: np.ndarray,
    Theta: np.ndarray,
    cfg: FdConfig,
    scale: float,
) -> np.ndarray:
    """(B, d, d) information matrices for B trajectories simulated at Theta (B, d)."""
    B, H = actions.shape[0], actions.shape[1]
    S = states[:, :H].reshape(B * H, env.n_s)
    A = actions.reshape(B * H, env.n_a)
    T = np.repeat(Theta, H, axis=0)
    J, _ = batch_param_jacobians(env, S, A, T, cfg)
    J = J.reshape(B, H, env.n_s, -1)
    info = scale * np.einsum("bhsi,bhsj->bij", J, J)
    return 0.5 * (info + np.transpose(info, (0, 2, 1)))


def fisher_matrix(
    traj: Trajectory,
    env: EnvSpec,
    theta,
    cfg: FdConfig | None = None,
    info_scale: float | None = None,
) -> FisherMatrix:
    """Information in one trajectory: ``sigma_w^-2 sum_h J_h^T J_h``.

    Jacobians are evaluated on the noiseless dynamics at the realised states.
    When ``sigma_w`` is zero the caller must supply ``info_scale`` in place of
    ``sigma_w^-2``.
    """
    if traj.env_id != env.env_id:
        raise ConfigurationError(f"trajectory from {traj.env_id} used with {env.env_id}")
    scale = information_scale(env, info_scale)
    th = theta_array(env, theta)
    info = batch_fisher(env, traj.states[None], traj.actions[None], th[None], cfg or FdConfig(), scale)
    return FisherMatrix(info[0])


def a_criteria(info: np.ndarray, ridge: float) -> np.ndarray:
    """tr((I + ridge Id)^-1) for a stack of matrices (..., d, d)."""
    d = info.shape[-1]
    if d == 1:
        return 1.0 / (info[..., 0, 0] + ridge)
    return np.trace(np.linalg.inv(info + ridge * np.eye(d)), axis1=-2, axis2=-1)


def objective_samples(q: ParamDistribution, n_rollouts: int, seed: int, env: EnvSpec):
    """Parameter draws and episode noise shared by every policy scored under ``seed``."""
    thetas = sample_param_array(q, rng_mod.generator(seed, "theta"), n_rollouts)
    seeds = [rng_mod.derive_seed(seed, "noise", k) for k in range(n_rollouts)]
    return thetas, noise_batch(env, seeds)


def batch_a_objective(
    env: EnvSpec,
    kind: str,
    params: np.ndarray,
    thetas: np.ndarray,
    noise: np.ndarray,
    cfg: FdConfig,
    ridge: float,
    scale: float,
) -> np.ndarray:
    """Mean A-criterion of P candidate policies over a shared sample set.

    ``params`` is (P, p); ``thetas`` (n, d) and ``noise`` (n, H, n_s) are the
    common random numbers. Returns (P,).
    """
    P, n = params.shape[0], thetas.shape[0]
    Pm = np.repeat(params, n, axis=0)
    Th = np.tile(thetas, (P, 1))
    W = np.tile(noise, (P, 1, 1))
    states, actions = simulate(env, kind, Pm, Th, W)
    info = batch_fisher(env, states, actions, Th, cfg, scale)
    # per-theta inverse, then average: the expectation sits outside the trace
    return a_criteria(info, ridge).reshape(P, n).mean(axis=1)


def a_optimal_objective(
    policy: Policy,
    env: EnvSpec,
    q: ParamDistribution,
    n_rollouts: int,
    ridge: float = 1e-3,
    seed: int = 0,
    cfg: FdConfig | None = None,
    info_scale: float | None = None,
) -> float:
    """Monte-Carlo estimate of ``E_{theta ~ q} tr((I(theta, pi) + ridge Id)^-1)``.

    One rollout per sampled theta. Deterministic in ``seed``.
    """
    if n_rollouts < 1:
        raise ConfigurationError("n_rollouts must be >= 1")
    if not ridge > 0:
        raise ConfigurationError("ridge must be positive")
    policy.check_env(env)
    thetas, noise = objective_samples(q, n_rollouts, seed, env)
    scale = information_scale(env, info_scale)
    value = batch_a_objective(
        env, policy.kind, policy.params[None, :], thetas, noise, cfg or FdConfig(), ridge, scale
    )
    return float(value[0])


def crlb_bound(info: FisherMatrix | np.ndarray | float, T: int | float) -> float:
    """Cramer-Rao bound on the mean squared error: ``tr(I^-1) / T``.

    Returns ``inf`` for a singular information matrix.
    """
    if not T > 0:
        raise DomainError(f"episode count must be positive, got {T}")
    m = info.entries if isinstance(info, FisherMatrix) else np.atleast_2d(np.asarray(info, float))
    eig = np.linalg.eigvalsh(m)
    if eig.max() <= 0 or eig.min() <= 1e-14 * eig.max():
        return float("inf")
    return float(np.sum(1.0 / eig) / T)
