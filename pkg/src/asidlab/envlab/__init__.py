"""Parametric toy dynamical systems with seeded rollout and replay."""

from .catalog import CATALOG, make_env, task_env
from .simulate import (
    episode_noise,
    noise_batch,
    nominal_step,
    replay,
    rollout,
    sample_param_array,
    sample_params,
    simulate,
    simulate_actions,
    step,
    theta_array,
)
from .types import EnvSpec, ParamDistribution, ParamVector, Trajectory

__all__ = [
    "CATALOG",
    "EnvSpec",
    "ParamDistribution",
    "ParamVector",
    "Trajectory",
    "episode_noise",
    "make_env",
    "noise_batch",
    "nominal_step",
    "replay",
    "rollout",
    "sample_param_array",
    "sample_params",
    "simulate",
    "simulate_actions",
    "step",
    "task_env",
    "theta_array",
]
